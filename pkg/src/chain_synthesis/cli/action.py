from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Iterable, List, TypeVar

from pydantic import BaseModel, Field

from ..core.error import ChainSynthesisError
from ..core.schemas import Tolerances
from ..utils.logger import get_logger

logger = get_logger()

Item = TypeVar("Item")
Result = TypeVar("Result")


class CommandOutcome(BaseModel):
    report: List[str] = Field(default_factory=list, description="Lines printed on stdout")
    exit_code: int = Field(0, description="0 success, 2 input validation, 3 numerical failure")
    files: List[Path] = Field(default_factory=list, description="Files written by the command")


class BaseCommand(BaseModel):
    """
    Abstract class `Command`

    Holds the job configuration shared by every command and runs the
    load, compute, write pipeline.
    """

    output_dir: Path = Field(Path("."), description="Directory receiving every output file")
    seed: int = Field(0, description="Seed of every randomized solver step")
    tolerances: Tolerances = Field(default_factory=Tolerances, description="Numerical tolerances")
    jobs: int = Field(1, ge=1, description="Worker threads for independent per-pair or per-step work")

    def load(self) -> Any:
        """
        Load and validate the command input
        """
        raise NotImplementedError("`load` is not implemented")

    def compute(self, data: Any) -> Any:
        """
        Run the numerical pipeline on the loaded input
        """
        raise NotImplementedError("`compute` is not implemented")

    def write(self, result: Any) -> CommandOutcome:
        """
        Write output files and build the report
        """
        raise NotImplementedError("`write` is not implemented")

    def map_jobs(self, function: Callable[[Item], Result], items: Iterable[Item]) -> List[Result]:
        """
        Ordered map over `items`, threaded when `jobs > 1`
        """
        items = list(items)
        if self.jobs == 1 or len(items) < 2:
            return [function(item) for item in items]
        with ThreadPoolExecutor(max_workers=self.jobs) as executor:
            return list(executor.map(function, items))

    def stage(self, name: str, function: Callable[..., Result], *args) -> Result:
        """
        Run one pipeline stage, tagging any package error with the stage name
        """
        logger.info(f"Running stage `{name}`...")
        try:
            result = function(*args)
        except ChainSynthesisError as error:
            error.stage = error.stage or name
            raise
        logger.info(f"Stage `{name}` is done")
        return result

    def output_path(self, name: str) -> Path:
        return Path(self.output_dir) / name

    def execute(self) -> CommandOutcome:
        """
        Execute command
        """
        logger.info("Start execution")

        logger.info("Loading input...")
        data = self.stage("load", self.load)
        logger.info("Input has been loaded")

        logger.info("Computing...")
        result = self.compute(data)
        logger.info("Computation is done")

        logger.info("Writing output...")
        outcome = self.stage("write", self.write, result)
        logger.info(f"{len(outcome.files)} files have been written")

        logger.info("All has been done for this command !")
        return outcome
