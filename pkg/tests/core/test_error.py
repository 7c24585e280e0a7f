from chain_synthesis.core.error import (
    BudgetError,
    ChainSynthesisError,
    FileFormatError,
    InputError,
    IntegrationError,
    NotSymplecticError,
    NumericalError,
    SiteRangeError,
    SolverError,
)


def test_SolverError():
    # Expected error output
    expected_output = "No triple found\n"
    expected_output += "site: `3`\n"
    expected_output += "restarts: `32`"

    # Test error
    try:
        raise SolverError("No triple found", site=3, restarts=32)
    except SolverError as e:
        assert e.__str__() == expected_output
        assert e.title == "No triple found"
        assert e.fields == dict(site=3, restarts=32)
        assert e.exit_code == 3


def test_NotSymplecticError_default_title():
    # Expected error output
    expected_output = "Matrix is not symplectic\n"
    expected_output += "defect: `0.5`"

    # Test error
    try:
        raise NotSymplecticError(defect=0.5)
    except InputError as e:
        assert e.__str__() == expected_output
        assert e.exit_code == 2


def test_FileFormatError():
    # Expected error output
    expected_output = "Expected a number, got `x`\n"
    expected_output += "line: `4`\n"
    expected_output += "field: `column 2`\n"
    expected_output += "path: `target.csv`"

    # Test error
    try:
        raise FileFormatError("Expected a number, got `x`", line=4, field="column 2", path="target.csv")
    except FileFormatError as e:
        assert e.__str__() == expected_output
        assert e.line == 4
        assert e.field == "column 2"
        assert e.exit_code == 2


def test_error_hierarchy():
    for error_class in (SiteRangeError, FileFormatError, NotSymplecticError):
        assert issubclass(error_class, InputError)
    for error_class in (SolverError, IntegrationError, BudgetError):
        assert issubclass(error_class, NumericalError)
    assert issubclass(InputError, ChainSynthesisError)
    assert issubclass(NumericalError, ChainSynthesisError)
    assert ChainSynthesisError().stage is None
