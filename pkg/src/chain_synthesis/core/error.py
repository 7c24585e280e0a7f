from ..utils.logger import get_logger

logger = get_logger()

INPUT_ERROR_EXIT_CODE = 2
NUMERICAL_ERROR_EXIT_CODE = 3


class ChainSynthesisError(Exception):
    """
    Chain Synthesis Error

    Base class of every error raised by the package. The message starts with
    a title line, then one line per context field.
    """

    exit_code = NUMERICAL_ERROR_EXIT_CODE
    default_title = "Chain synthesis failed"
    # pipeline stage that raised, set by the command line
    stage = None

    def __init__(self, title: str = None, **kwargs):
        """
        Chain Synthesis Error

        Args:
            title (str, optional): title shown as the first error line. Defaults to the class title.

        >>> raise SolverError("No triple found", site=3, restarts=32)
        ... SolverError: No triple found
        ... site: `3`
        ... restarts: `32`
        """
        self.title = title if title is not None else self.default_title
        self.fields = kwargs
        message = self.title
        for field_name, field_value in kwargs.items():
            message += f"\n{field_name}: `{field_value}`"
        logger.error(self.title)
        super().__init__(message)


class InputError(ChainSynthesisError):
    """
    Input Error

    Malformed or out-of-domain input. Maps to exit code 2.
    """

    exit_code = INPUT_ERROR_EXIT_CODE
    default_title = "Invalid input"


class NotSymplecticError(InputError):
    default_title = "Matrix is not symplectic"


class DimensionError(InputError):
    default_title = "Dimension mismatch"


class SiteRangeError(InputError):
    default_title = "Site index out of range"


class GeneratorSpanError(InputError):
    default_title = "Matrix is not in the span of the Sp(2) generators"


class PhononTargetError(InputError):
    default_title = "Invalid pseudo-phonon target"


class PhysicalityError(InputError):
    default_title = "Covariance matrix is not physical"


class RwaRangeError(InputError):
    default_title = "Rotating-wave ratio out of range"


class StepSizeError(InputError):
    default_title = "Integration step size too coarse"


class FileFormatError(InputError):
    """
    File Format Error
    """

    default_title = "Malformed input file"

    def __init__(self, title: str = None, line: int = None, field: str = None, **kwargs):
        """
        File Format Error

        Args:
            title (str, optional): title shown as the first error line.
            line (int, optional): 1-indexed line of the offending record.
            field (str, optional): name or position of the offending field.

        >>> raise FileFormatError("Not a number", line=4, field="column 2", path="plan.txt")
        ... FileFormatError: Not a number
        ... line: `4`
        ... field: `column 2`
        ... path: `plan.txt`
        """
        self.line = line
        self.field = field
        context = dict()
        if line is not None:
            context["line"] = line
        if field is not None:
            context["field"] = field
        context.update(kwargs)
        super().__init__(title, **context)


class NumericalError(ChainSynthesisError):
    """
    Numerical Error

    A computation that was given valid input failed to meet its tolerance.
    Maps to exit code 3.
    """

    default_title = "Numerical failure"


class SolverError(NumericalError):
    default_title = "Solver failed to meet tolerance"


class IntegrationError(NumericalError):
    default_title = "Propagator drifted off the symplectic group"


class ConstructionError(NumericalError):
    default_title = "Internal construction certificate failed"


class BudgetError(NumericalError):
    default_title = "Pulse validation error above budget"
