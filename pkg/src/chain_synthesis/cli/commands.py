from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import Field, ValidationError

from ..core.chain_basis import controllability_dimension
from ..core.error import BudgetError, DimensionError, InputError, NUMERICAL_ERROR_EXIT_CODE, PhononTargetError
from ..core.gaussian_state import (
    apply_symplectic,
    check_covariance,
    cradle_to_site,
    negativity_table,
    pair_ellipses,
    phonon_target_symplectic,
    site_pairs,
    vacuum_state,
)
from ..core.pulse import compile_step, validate_schedule
from ..core.schemas import EllipseReport, PhononTarget, PulseSchedule, ScheduleValidation, SynthesisPlan
from ..core.synthesis import correlation_trace, plan_matrix, synthesize, verify_plan
from ..utils.logger import get_logger
from ..utils.serialization import (
    file_hash,
    read_matrix,
    read_plan,
    sha256_bytes,
    write_ellipses,
    write_matrix,
    write_negativity,
    write_plan,
    write_schedules,
    write_trace,
    write_validation,
)
from .action import BaseCommand, CommandOutcome

logger = get_logger()

# a schedule passes when its error plus leakage stays within this multiple of the strength ratio
RWA_BUDGET_FACTOR = 1.0


def _all_ellipses(command: BaseCommand, sigma: np.ndarray) -> List[EllipseReport]:
    N = sigma.shape[0] // 2
    pairs = command.map_jobs(lambda pair: pair_ellipses(sigma, *pair), site_pairs(N))
    reports = [sum_report for sum_report, _ in pairs]
    reports += [difference for _, difference in pairs if difference is not None]
    return reports


def _check_budget(results: List[Tuple[PulseSchedule, ScheduleValidation]], budget: float) -> float:
    worst = max((validation.total for _, validation in results), default=0.0)
    failing = [schedule.step_index for schedule, validation in results if validation.total > budget]
    if failing:
        raise BudgetError(steps=" ".join(map(str, failing)), worst=worst, budget=budget)
    return worst


class PhononCommand(BaseCommand):
    """
    Prepare a pseudo-phonon pair-squeezed state from the vacuum
    """

    chain_length: int = Field(..., ge=2, description="Chain length N")
    k1: int = Field(..., description="First pseudo-phonon index")
    k2: int = Field(..., description="Second pseudo-phonon index")
    xi: float = Field(..., ge=0, description="Squeezing parameter")
    use_column_variant: bool = Field(False, description="Decorrelate columns instead of rows")

    def load(self) -> PhononTarget:
        try:
            return PhononTarget(n_oscillators=self.chain_length, k1=self.k1, k2=self.k2, xi=self.xi)
        except ValidationError as error:
            raise PhononTargetError(reason=str(error).splitlines()[-1], k1=self.k1, k2=self.k2)

    def compute(self, target: PhononTarget):
        T = self.stage("phonon target", phonon_target_symplectic, target)
        plan = self.stage(
            "synthesize", synthesize, T, self.seed, self.tolerances, self.use_column_variant
        )
        trace = self.stage("trace", correlation_trace, plan, self.tolerances.entanglement_threshold)
        n_modes = plan.n_modes
        state = cradle_to_site(apply_symplectic(vacuum_state(n_modes), plan_matrix(plan.steps, n_modes)))
        ellipses = self.stage("ellipses", _all_ellipses, self, state)
        return target, plan, trace, state, ellipses

    def write(self, result) -> CommandOutcome:
        target, plan, trace, state, ellipses = result
        parameters = f"N={target.n_oscillators},k1={target.k1},k2={target.k2},xi={target.xi!r}"
        header = dict(seed=self.seed, input_hash=sha256_bytes(parameters.encode("ascii")))
        files = [
            write_plan(self.output_path("plan.txt"), plan, header),
            write_matrix(self.output_path("state.csv"), state, dict(header, chain_length=plan.chain_length), "site covariance"),
            write_ellipses(self.output_path("ellipses.csv"), ellipses, header),
            write_trace(self.output_path("trace.csv"), trace, header),
        ]
        report = [
            f"steps: {len(plan.steps)}",
            f"bound: {plan.step_bound}",
            f"residual: {plan.residual:.3e}",
            f"entangled pairs: {trace[-1].pair_count}",
        ]
        return CommandOutcome(report=report, files=files)


class ControllabilityCommand(BaseCommand):
    """
    Certify that the springs of a chain reach every symplectic map of its cradle modes
    """

    chain_length: int = Field(..., ge=2, description="Chain length N")

    def load(self) -> int:
        return self.chain_length - 1

    def compute(self, n_modes: int) -> Tuple[int, int, int]:
        dimension = self.stage("lie closure", controllability_dimension, n_modes)
        return n_modes, dimension, n_modes * (2 * n_modes + 1)

    def write(self, result: Tuple[int, int, int]) -> CommandOutcome:
        n_modes, dimension, expected = result
        passed = dimension == expected
        report = [
            f"modes: {n_modes}",
            f"dimension: {dimension}",
            f"expected: {expected}",
            "PASS" if passed else "FAIL",
        ]
        return CommandOutcome(report=report, exit_code=0 if passed else NUMERICAL_ERROR_EXIT_CODE)


class SynthesizeCommand(BaseCommand):
    """
    Factor a symplectic target read from a CSV file into coupling steps
    """

    target_file: Path = Field(..., description="CSV matrix on the N-1 cradle modes")
    chain_length: Optional[int] = Field(None, ge=2, description="Expected chain length N")
    use_column_variant: bool = Field(False, description="Decorrelate columns instead of rows")

    def load(self) -> np.ndarray:
        T = read_matrix(self.target_file)
        chain_length = T.shape[0] // 2 + 1
        if self.chain_length is not None and self.chain_length != chain_length:
            raise DimensionError(
                "Target size does not match the chain length",
                chain_length=self.chain_length,
                target_modes=T.shape[0] // 2,
            )
        return T

    def compute(self, T: np.ndarray) -> SynthesisPlan:
        return self.stage(
            "synthesize", synthesize, T, self.seed, self.tolerances, self.use_column_variant
        )

    def write(self, plan: SynthesisPlan) -> CommandOutcome:
        header = dict(seed=self.seed, input_hash=file_hash(self.target_file))
        files = [write_plan(self.output_path("plan.txt"), plan, header)]
        report = [f"steps: {len(plan.steps)}", f"bound: {plan.step_bound}", f"residual: {plan.residual:.3e}"]
        return CommandOutcome(report=report, files=files)


class VerifyCommand(BaseCommand):
    """
    Recompute the residual of a plan file and check the step bound
    """

    plan_file: Path = Field(..., description="Plan written by `synthesize` or `phonon`")

    def load(self) -> SynthesisPlan:
        return read_plan(self.plan_file)

    def compute(self, plan: SynthesisPlan) -> SynthesisPlan:
        self.stage("verify", verify_plan, plan)
        return plan

    def write(self, plan: SynthesisPlan) -> CommandOutcome:
        within_tolerance = plan.residual <= self.tolerances.tol_plan
        within_bound = len(plan.steps) <= plan.step_bound
        passed = within_tolerance and within_bound
        report = [
            f"residual: {plan.residual:.3e}",
            f"steps: {len(plan.steps)}",
            f"bound: {plan.step_bound}",
            "PASS" if passed else "FAIL",
        ]
        return CommandOutcome(report=report, exit_code=0 if passed else NUMERICAL_ERROR_EXIT_CODE)


class PulsesCommand(BaseCommand):
    """
    Compile every step of a plan to a spring-drive schedule and validate it by integration
    """

    plan_file: Path = Field(..., description="Plan written by `synthesize` or `phonon`")
    omega: float = Field(1.0, gt=0, description="Bare oscillator frequency")
    dt: Optional[float] = Field(None, gt=0, description="Integration step, units of 1/omega")

    def load(self) -> SynthesisPlan:
        plan = read_plan(self.plan_file)
        residual = verify_plan(plan)
        if residual > self.tolerances.tol_plan:
            raise InputError("Plan does not reproduce its target", residual=residual, path=self.plan_file)
        return plan

    def compute(self, plan: SynthesisPlan) -> Tuple[SynthesisPlan, List[Tuple[PulseSchedule, ScheduleValidation]]]:
        rwa_ratio = self.tolerances.rwa_ratio

        def compile_indexed(indexed_step) -> PulseSchedule:
            index, step = indexed_step
            return compile_step(step, self.omega, rwa_ratio, step_index=index)

        schedules = self.stage("compile", self.map_jobs, compile_indexed, list(enumerate(plan.steps, start=1)))
        validations = self.stage(
            "validate",
            self.map_jobs,
            lambda schedule: validate_schedule(schedule, plan.chain_length, self.dt),
            schedules,
        )
        return plan, list(zip(schedules, validations))

    def write(self, result) -> CommandOutcome:
        plan, results = result
        budget = RWA_BUDGET_FACTOR * self.tolerances.rwa_ratio
        header = dict(
            seed=plan.seed,
            plan_hash=file_hash(self.plan_file),
            omega=self.omega,
            rwa_ratio=self.tolerances.rwa_ratio,
        )
        files = [
            write_schedules(self.output_path("schedules.txt"), [schedule for schedule, _ in results], header),
            write_validation(self.output_path("validation.csv"), results, budget, header),
        ]
        worst = self.stage("budget", _check_budget, results, budget)
        report = [f"steps: {len(results)}", f"budget: {budget:.3e}", f"worst: {worst:.3e}", "PASS"]
        return CommandOutcome(report=report, files=files)


class ReportCommand(BaseCommand):
    """
    Ellipse and log-negativity tables of a site-basis covariance read from a CSV file
    """

    state_file: Path = Field(..., description="CSV covariance on the N site modes")

    def load(self) -> np.ndarray:
        sigma = check_covariance(read_matrix(self.state_file))
        if sigma.shape[0] < 4:
            raise DimensionError("A chain needs at least two oscillators", shape=sigma.shape)
        return sigma

    def compute(self, sigma: np.ndarray):
        ellipses = self.stage("ellipses", _all_ellipses, self, sigma)
        table = self.stage("negativity", negativity_table, sigma)
        return ellipses, table

    def write(self, result) -> CommandOutcome:
        ellipses, table = result
        threshold = self.tolerances.entanglement_threshold
        header = dict(seed=self.seed, input_hash=file_hash(self.state_file))
        files = [
            write_ellipses(self.output_path("ellipses.csv"), ellipses, header),
            write_negativity(self.output_path("negativity.csv"), table, threshold, header),
        ]
        pairs = int(np.count_nonzero(np.triu(table, k=1) > threshold))
        return CommandOutcome(report=[f"entangled pairs: {pairs}"], files=files)


COMMANDS: Dict[str, type] = dict(
    phonon=PhononCommand,
    controllability=ControllabilityCommand,
    synthesize=SynthesizeCommand,
    verify=VerifyCommand,
    pulses=PulsesCommand,
    report=ReportCommand,
)
