import math
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, root_validator, validator

from ..utils.config import Config
from .symplectic import TOL_RECON, TOL_SYM, check_symplectic, scaled_tolerance


def _as_matrix(value) -> np.ndarray:
    return np.asarray(value, dtype=float)


class ArrayModel(BaseModel):
    class Config:
        arbitrary_types_allowed = True


# Tolerances


class Tolerances(BaseModel):
    tol_sym: float = Field(TOL_SYM, gt=0, description="Max-norm tolerance of the symplectic condition")
    tol_recon: float = Field(TOL_RECON, gt=0, description="Round-trip tolerance of decompositions")
    tol_block: float = Field(
        1e-10,
        gt=0,
        description="Row-matching tolerance of a decorrelation sweep, relative to max(1, |goal|)",
    )
    tol_plan: float = Field(1e-8, gt=0, description="Spectral-norm tolerance of a verified plan")
    max_restarts: int = Field(32, ge=1, description="Random restarts of the triple solver")
    initial_damping: float = Field(1e-3, gt=0, description="Initial Levenberg-Marquardt damping")
    rwa_ratio: float = Field(
        0.01, gt=0, le=0.1, description="Upper bound of the mean spring strength in units of omega"
    )
    entanglement_threshold: float = Field(
        1e-9, ge=0, description="Log-negativity above which a pair counts as entangled"
    )

    @classmethod
    def from_config(cls, config: Config, **overrides) -> "Tolerances":
        """
        Build tolerances from `CHAIN_SYNTHESIS_*` variables, e.g. `CHAIN_SYNTHESIS_TOL_PLAN`.

        Keyword overrides set to None are ignored.
        """
        values = dict()
        for name in cls.__fields__:
            raw = config.get(name.upper())
            if raw is not None:
                values[name] = raw
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)


# Chain basis


class CradleBasis(ArrayModel):
    n_oscillators: int = Field(..., ge=2, description="Chain length N")
    position_matrix: np.ndarray = Field(
        ..., description="N x N orthogonal matrix, rows are cradle modes then the total displacement"
    )
    phase_space_matrix: np.ndarray = Field(
        ..., description="2N x 2N matrix acting with `position_matrix` on x and p alike"
    )


class EmbeddedCoupling(ArrayModel):
    site: int = Field(..., ge=1, description="Spring index n, coupling oscillators n and n+1")
    inner: np.ndarray = Field(..., description="2x2 symplectic action on the relative coordinates")
    matrix: np.ndarray = Field(..., description="D_n(inner) on the N-1 cradle modes")


class LieClosure(ArrayModel):
    basis: np.ndarray = Field(
        ..., description="Orthonormal basis of the closure, one vectorized matrix per row"
    )
    dimension: int = Field(..., ge=0, description="Rank of the closure")
    rounds: int = Field(..., ge=0, description="Commutator rounds that enlarged the span")


# Gaussian states


def phonon_index_range(n_oscillators: int) -> Tuple[int, int]:
    """Inclusive range of crystal-momentum indices for a chain of length N."""
    if n_oscillators % 2 == 0:
        return -n_oscillators // 2 + 1, n_oscillators // 2
    return -(n_oscillators - 1) // 2, (n_oscillators - 1) // 2


class PhononTarget(BaseModel):
    n_oscillators: int = Field(..., ge=2, description="Chain length N")
    k1: int = Field(..., description="First pseudo-phonon index")
    k2: int = Field(..., description="Second pseudo-phonon index")
    xi: float = Field(..., ge=0, description="Squeezing parameter")

    @validator("k1", "k2")
    def nonzero_index(cls, k):
        if k == 0:
            raise ValueError("k = 0 is the total displacement, which cannot be driven")
        return k

    @root_validator(skip_on_failure=True)
    def index_in_range(cls, values):
        low, high = phonon_index_range(values["n_oscillators"])
        for name in ("k1", "k2"):
            if not low <= values[name] <= high:
                raise ValueError(f"{name}={values[name]} outside [{low}, {high}]")
        return values


class EllipseReport(BaseModel):
    pair: Tuple[int, int] = Field(..., description="Sites (n, m), equal for a single-site ellipse")
    kind: Literal["sum", "difference"] = Field(..., description="Sum or difference coordinates")
    semi_major: float = Field(..., description="Square root of the larger variance")
    semi_minor: float = Field(..., gt=0, description="Square root of the smaller variance")
    angle: float = Field(..., description="Major-axis angle from the x axis, in (-pi/2, pi/2]")

    @root_validator(skip_on_failure=True)
    def ordered_axes(cls, values):
        if values["semi_major"] < values["semi_minor"]:
            raise ValueError("semi_major must not be smaller than semi_minor")
        if not -math.pi / 2 < values["angle"] <= math.pi / 2:
            raise ValueError("angle must lie in (-pi/2, pi/2]")
        return values


# Synthesis


class CouplingStep(ArrayModel):
    site: int = Field(..., ge=1, description="Spring index n")
    inner: np.ndarray = Field(..., description="2x2 symplectic action on the relative coordinates")

    _as_matrix = validator("inner", pre=True, allow_reuse=True)(_as_matrix)

    @validator("inner")
    def symplectic_inner(cls, inner):
        if inner.shape != (2, 2):
            raise ValueError(f"inner must be 2x2, got {inner.shape}")
        return check_symplectic(inner, scaled_tolerance(TOL_SYM, inner), name="inner")


class SynthesisPlan(ArrayModel):
    chain_length: int = Field(..., ge=2, description="Chain length N")
    steps: List[CouplingStep] = Field(
        default_factory=list, description="Coupling steps, first applied first"
    )
    target: np.ndarray = Field(..., description="Target on the N-1 cradle modes")
    residual: float = Field(0.0, ge=0, description="Spectral norm of plan matrix minus target")
    seed: int = Field(0, description="Seed of the triple solver")
    variant: Literal["row", "column"] = Field("row", description="Decorrelation variant")
    stage_boundaries: List[int] = Field(
        default_factory=list, description="Number of steps applied when each stage is complete"
    )
    stage_modes: List[int] = Field(
        default_factory=list, description="Cradle mode decorrelated by each stage"
    )

    _as_matrix = validator("target", pre=True, allow_reuse=True)(_as_matrix)

    @validator("target")
    def target_shape(cls, target, values):
        if "chain_length" in values:
            size = 2 * (values["chain_length"] - 1)
            if target.shape != (size, size):
                raise ValueError(f"target must be {size}x{size}, got {target.shape}")
        return target

    @validator("steps", each_item=True)
    def site_in_chain(cls, step, values):
        if "chain_length" in values and step.site > values["chain_length"] - 1:
            raise ValueError(f"site {step.site} outside a chain of {values['chain_length']}")
        return step

    @property
    def n_modes(self) -> int:
        return self.chain_length - 1

    @property
    def step_bound(self) -> int:
        return 3 * self.chain_length * (self.chain_length - 1) // 2


class TraceRecord(ArrayModel):
    step: int = Field(..., ge=0, description="Number of steps applied, 0 for the vacuum")
    site: Optional[int] = Field(None, description="Site of the step just applied")
    stage: Optional[int] = Field(None, description="Cradle mode being decorrelated")
    pair_count: int = Field(..., ge=0, description="Entangled pairs after this step")
    bound: int = Field(..., ge=0, description="Pairs among oscillators touched so far")
    table: np.ndarray = Field(..., description="Symmetric N x N log-negativity table")


# Pulses


class PulseSegment(BaseModel):
    site: int = Field(..., ge=1, description="Driven spring")
    mean_strength: float = Field(..., ge=0, description="Mean spring strength, units of omega")
    modulation_depth: float = Field(..., ge=0, description="Relative modulation depth A")
    modulation_phase: float = Field(0.0, description="Modulation phase in (-pi, pi]")
    duration: float = Field(..., ge=0, description="Duration, units of 1/omega")

    @validator("modulation_phase")
    def phase_range(cls, phase):
        if not -math.pi < phase <= math.pi:
            raise ValueError("modulation_phase must lie in (-pi, pi]")
        return phase


class PulseSchedule(BaseModel):
    omega: float = Field(1.0, gt=0, description="Bare oscillator frequency")
    target_step: CouplingStep = Field(..., description="Step realized by the schedule")
    segments: List[PulseSegment] = Field(default_factory=list, description="Segments in time order")
    step_index: Optional[int] = Field(None, description="Index of the step in its plan")
    rwa_ratio: float = Field(0.01, gt=0, le=0.1, description="Strength bound used to compile")

    @validator("segments", each_item=True)
    def single_site(cls, segment, values):
        step = values.get("target_step")
        if step is not None and segment.site != step.site:
            raise ValueError("every segment must drive the site of the target step")
        return segment

    @property
    def total_duration(self) -> float:
        return float(sum(segment.duration for segment in self.segments))


class ScheduleValidation(BaseModel):
    error: float = Field(..., ge=0, description="Spectral error of the relative-mode action")
    leakage: float = Field(..., ge=0, description="Spectral norm of the action on other modes")
    defect: float = Field(0.0, ge=0, description="Symplectic defect of the integrated propagator")

    @property
    def total(self) -> float:
        return self.error + self.leakage
