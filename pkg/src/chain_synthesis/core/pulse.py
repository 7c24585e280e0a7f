"""
Spring-drive schedules realizing coupling steps, and their numerical validation.

A spring Omega_n(t) = mean * (1 + A cos(2 omega t + phi)) acts on the relative
coordinates of oscillators n, n+1. In the frame rotating at omega the
relative mode feels 2 Omega_n(t) (sin(2 omega t) s1 - cos(2 omega t) s2 - s3),
periodic in pi/omega. A segment spanning whole periods therefore acts as the
exponential of an effective generator; the rotating-wave approximation keeps
its first-order part mean * (-A sin(phi) s1 - A cos(phi) s2 - 2 s3), the model
below adds the second-order part. Static springs are modelled exactly.
Frequencies are in units of omega and durations in units of 1/omega.
"""
import math
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import least_squares

from ..utils.logger import get_logger
from .chain_basis import cradle_basis, relative_mode_vector
from .error import ConstructionError, IntegrationError, RwaRangeError, SiteRangeError, StepSizeError
from .schemas import CouplingStep, PulseSchedule, PulseSegment, ScheduleValidation
from .symplectic import (
    S1,
    S2,
    S3,
    euler_decompose,
    generator_coordinates,
    sp2_exp,
    sp2_log,
    symplectic_defect,
    wrap_angle,
)

logger = get_logger()

# modulation depth of squeeze segments, A > 2 gives exponential growth at rate mean * sqrt(A^2 - 4)
SQUEEZE_MODULATION_DEPTH = 3.0
# planned mean strengths in units of rwa_ratio * omega; the fit may move them slightly
SQUEEZE_STRENGTH_FRACTION = 0.35
ROTATION_STRENGTH_FRACTION = 0.8
MAX_RWA_RATIO = 0.1
DEFAULT_STEPS_PER_PERIOD = 500
MIN_STEPS_PER_PERIOD = 200
DRIFT_WARNING = 1e-6
DRIFT_ABORT = 1e-4
_IDENTITY_TOL = 1e-12
_MIN_ADVANCE = 0.05
_FIT_TOL = 1e-15
_FIT_ACCEPT = 1e-12
_MODEL_TOL = 1e-9

_PAIR_LAPLACIAN = np.array([[1.0, -1.0], [-1.0, 1.0]])
_X_PROJECTOR = np.diag([1.0, 0.0])
_FORM = np.array([[0.0, 1.0], [-1.0, 0.0]])


def default_step_size(omega: float = 1.0) -> float:
    return 2 * math.pi / omega / DEFAULT_STEPS_PER_PERIOD


def free_rotation(t: float, omega: float = 1.0) -> np.ndarray:
    """Free evolution of one oscillator, x -> cos x + sin p."""
    c, s = math.cos(omega * t), math.sin(omega * t)
    return np.array([[c, s], [-s, c]])


def normal_mode_frequencies(N: int, strengths, omega: float = 1.0) -> np.ndarray:
    """
    Normal-mode frequencies of a chain with static springs

    The potential is omega/2 x^2 + sum Omega_n (x_n - x_{n+1})^2, so each
    eigenvalue lambda of the spring-weighted Laplacian gives sqrt(omega (omega + 2 lambda)).

    >>> normal_mode_frequencies(2, [0.01])
    array([1.       , 1.0198039])
    """
    strengths = np.asarray(strengths, dtype=float)
    if strengths.shape != (N - 1,):
        raise SiteRangeError("One strength per spring is required", chain_length=N, strengths=strengths.shape)
    laplacian = np.zeros((N, N))
    for n, strength in enumerate(strengths):
        laplacian[n : n + 2, n : n + 2] += strength * _PAIR_LAPLACIAN
    eigenvalues = np.linalg.eigvalsh(laplacian)
    return np.sqrt(omega * (omega + 2.0 * eigenvalues))


def _relative_frequency(mean_strength: float, omega: float) -> float:
    return math.sqrt(omega * omega + 4.0 * mean_strength * omega)


def _commutator(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return X @ Y - Y @ X


def effective_generator(mean_strength: float, depth: float, phase: float, omega: float = 1.0) -> np.ndarray:
    """
    Period-averaged rotating-frame generator of a modulated spring, through second order in mean / omega

    Per unit mean strength the generator splits into H0 plus harmonics
    C_k cos(2k omega t) + S_k sin(2k omega t), k = 1, 2. Over one period
    starting at a multiple of pi/omega the second-order correction is
    sum_k ([H0, S_k] - [C_k, S_k] / 2) / (2k omega).
    """
    a_sin, a_cos = depth * math.sin(phase), depth * math.cos(phase)
    H0 = -a_sin * S1 - a_cos * S2 - 2.0 * S3
    harmonics = (
        (1, -2.0 * S2 - 2.0 * a_cos * S3, 2.0 * S1 + 2.0 * a_sin * S3),
        (2, a_sin * S1 - a_cos * S2, a_cos * S1 + a_sin * S2),
    )
    correction = np.zeros((2, 2))
    for k, C, S in harmonics:
        correction += (_commutator(H0, S) - 0.5 * _commutator(C, S)) / (2 * k * omega)
    return mean_strength * H0 + mean_strength * mean_strength * correction


def _static_action(mean_strength: float, duration: float, omega: float) -> np.ndarray:
    # lab-frame relative mode at frequency omega', seen from the frame rotating at omega
    shifted = _relative_frequency(mean_strength, omega)
    ratio = shifted / omega
    c, s = math.cos(shifted * duration), math.sin(shifted * duration)
    lab = np.array([[c, s / ratio], [-ratio * s, c]])
    return free_rotation(duration, omega).T @ lab


def _modulated_action(mean_strength: float, depth: float, phase: float, duration: float, omega: float) -> np.ndarray:
    exponent, _ = generator_coordinates(duration * effective_generator(mean_strength, depth, phase, omega))
    return sp2_exp(*exponent)


def ideal_segment_matrix(segment: PulseSegment, omega: float = 1.0, start: float = 0.0) -> np.ndarray:
    """
    Rotating-frame action of one segment on the relative coordinates

    Static segments are exact. Modulated ones use the second-order effective
    generator, which assumes the duration spans whole periods pi/omega.
    Starting at `start` conjugates the action by the free rotation and
    advances the modulation phase by 2 omega start.
    """
    if segment.modulation_depth == 0.0:
        local = _static_action(segment.mean_strength, segment.duration, omega)
    else:
        phase = segment.modulation_phase + 2.0 * omega * start
        local = _modulated_action(segment.mean_strength, segment.modulation_depth, phase, segment.duration, omega)
    frame = free_rotation(start, omega)
    return frame.T @ local @ frame


def ideal_schedule_matrix(schedule: PulseSchedule) -> np.ndarray:
    M = np.eye(2)
    start = 0.0
    for segment in schedule.segments:
        M = ideal_segment_matrix(segment, schedule.omega, start) @ M
        start += segment.duration
    return M


def _snap(duration: float, omega: float) -> float:
    # whole periods of the 2 omega modulation
    half_period = math.pi / omega
    return max(1, math.ceil(duration / half_period - 1e-12)) * half_period


def _planned_segments(
    step: CouplingStep, omega: float, rwa_ratio: float
) -> Tuple[float, float, np.ndarray]:
    """
    Durations of the squeeze and rotation segments and a first guess of (xi1, xi2, rho)

    The squeeze phase aligns the segment's input axis with theta2 of
    R(theta1) Q(r) R(theta2), and the static spring supplies the remaining
    rotation, always a forward advance of at least `_MIN_ADVANCE`.
    """
    depth = SQUEEZE_MODULATION_DEPTH
    root = math.sqrt(depth * depth - 4.0)
    theta1, r, theta2 = euler_decompose(step.inner)

    growth = math.asinh(math.sinh(r) * root / depth)
    squeeze_duration = _snap(growth / (SQUEEZE_STRENGTH_FRACTION * rwa_ratio * omega * root), omega)
    squeeze_mean = growth / (root * squeeze_duration)
    aligned = _modulated_action(squeeze_mean, depth, 0.0, squeeze_duration, omega)
    before, _, after = euler_decompose(aligned)
    phase = wrap_angle(2.0 * (theta2 - after))

    advance = -(theta1 - before + theta2 - after) % (2 * math.pi)
    if advance < _MIN_ADVANCE:
        advance += 2 * math.pi
    fastest = _relative_frequency(ROTATION_STRENGTH_FRACTION * rwa_ratio * omega, omega) - omega
    rotation_duration = _snap(advance / fastest, omega)
    shifted = omega + advance / rotation_duration
    rotation_mean = (shifted * shifted - omega * omega) / (4.0 * omega)

    guess = np.array([squeeze_mean * depth * math.sin(phase), squeeze_mean * depth * math.cos(phase), rotation_mean])
    return squeeze_duration, rotation_duration, guess


def _fit_segments(step: CouplingStep, omega: float, rwa_ratio: float) -> List[PulseSegment]:
    """
    Squeeze then rotation segment whose modelled product equals the step

    The unknowns are xi = mean * A * (sin(phi), cos(phi)) of the squeeze
    segment and the static strength rho, fitted by Levenberg-Marquardt from
    the aligned guess and from a guess read off the logarithm of what the
    rotation segment leaves to do.
    """
    depth = SQUEEZE_MODULATION_DEPTH
    squeeze_duration, rotation_duration, aligned = _planned_segments(step, omega, rwa_ratio)

    def product(x: np.ndarray) -> np.ndarray:
        mean = math.hypot(x[0], x[1]) / depth
        squeezing = _modulated_action(mean, depth, math.atan2(x[0], x[1]), squeeze_duration, omega)
        return _static_action(x[2], rotation_duration, omega) @ squeezing

    def residual(x: np.ndarray) -> np.ndarray:
        return (product(x) - step.inner).ravel()

    guesses = [aligned]
    remaining = np.linalg.solve(_static_action(aligned[2], rotation_duration, omega), step.inner)
    logarithm = sp2_log(remaining, tol=1e-6)
    if logarithm.is_single:
        alpha, beta, _ = logarithm.factors[0]
        guesses.append(np.array([-alpha / squeeze_duration, -beta / squeeze_duration, aligned[2]]))

    best, best_error = None, math.inf
    for guess in guesses:
        try:
            fit = least_squares(residual, guess, method="lm", xtol=_FIT_TOL, ftol=_FIT_TOL, gtol=_FIT_TOL)
        except (ValueError, OverflowError, np.linalg.LinAlgError):
            continue
        error = float(np.max(np.abs(residual(fit.x))))
        if error < best_error:
            best, best_error = fit.x, error
        if best_error <= _FIT_ACCEPT:
            break
    if best is None:
        raise ConstructionError("Segment fit failed", site=step.site)

    squeeze_mean = math.hypot(best[0], best[1]) / depth
    rotation_mean = float(best[2])
    limit = rwa_ratio * omega * (1.0 + 1e-12)
    if squeeze_mean > limit or not 0.0 <= rotation_mean <= limit:
        raise ConstructionError(
            "Fitted spring strength leaves the rotating-wave range",
            site=step.site,
            squeeze_mean=squeeze_mean,
            rotation_mean=rotation_mean,
            limit=rwa_ratio * omega,
        )
    return [
        PulseSegment(
            site=step.site,
            mean_strength=squeeze_mean,
            modulation_depth=depth,
            modulation_phase=wrap_angle(math.atan2(best[0], best[1])),
            duration=squeeze_duration,
        ),
        PulseSegment(
            site=step.site,
            mean_strength=rotation_mean,
            modulation_depth=0.0,
            modulation_phase=0.0,
            duration=rotation_duration,
        ),
    ]


def compile_step(
    step: CouplingStep, omega: float = 1.0, rwa_ratio: float = 0.01, step_index: Optional[int] = None
) -> PulseSchedule:
    """
    Lower a coupling step to a squeeze segment followed by a rotation segment

    Durations are whole multiples of pi/omega, planned so that the mean
    strengths stay below `rwa_ratio * omega`; the strengths and the
    modulation phase are then fitted against the second-order model so that
    the schedule's modelled action equals the step.

    Args:
        step (CouplingStep): step to realize
        omega (float, optional): bare frequency. Defaults to 1.0.
        rwa_ratio (float, optional): strength bound in units of omega. Defaults to 0.01.
        step_index (Optional[int], optional): index of the step in its plan.

    Raises:
        RwaRangeError: `rwa_ratio` outside (0, 0.1]
        ConstructionError: the fit fails or the compiled model does not reproduce the step

    Returns:
        PulseSchedule: segments in time order, empty for the identity
    """
    if not 0.0 < rwa_ratio <= MAX_RWA_RATIO:
        raise RwaRangeError(rwa_ratio=rwa_ratio, maximum=MAX_RWA_RATIO)

    if np.max(np.abs(step.inner - np.eye(2))) <= _IDENTITY_TOL:
        segments: List[PulseSegment] = []
    else:
        segments = _fit_segments(step, omega, rwa_ratio)

    schedule = PulseSchedule(
        omega=omega, segments=segments, target_step=step, step_index=step_index, rwa_ratio=rwa_ratio
    )
    mismatch = float(np.max(np.abs(ideal_schedule_matrix(schedule) - step.inner)))
    if mismatch > _MODEL_TOL * max(1.0, float(np.max(np.abs(step.inner)))):
        raise ConstructionError("Compiled schedule does not model its step", mismatch=mismatch, site=step.site)
    logger.debug(
        f"Step at site {step.site}: {len(segments)} segments, duration {schedule.total_duration:.3f}"
    )
    return schedule



# Integration


def _segment_propagators(segment: PulseSegment, start: float, dt: float, omega: float) -> np.ndarray:
    """RK4 one-step propagators of the pair block in the interaction picture."""
    n_steps = max(1, math.ceil(segment.duration / dt - 1e-12))
    h = segment.duration / n_steps
    t0 = start + h * np.arange(n_steps)

    def generator(t: np.ndarray) -> np.ndarray:
        c, s = np.cos(omega * t), np.sin(omega * t)
        frame = np.empty((t.size, 2, 2))
        frame[:, 0, 0], frame[:, 0, 1], frame[:, 1, 0], frame[:, 1, 1] = c, s, -s, c
        local = np.transpose(frame, (0, 2, 1)) @ (_FORM @ _X_PROJECTOR) @ frame
        strength = segment.mean_strength * (
            1.0 + segment.modulation_depth * np.cos(2.0 * omega * t + segment.modulation_phase)
        )
        block = np.einsum("ij,tkl->tikjl", _PAIR_LAPLACIAN, local).reshape(t.size, 4, 4)
        return 2.0 * strength[:, None, None] * block

    identity = np.eye(4)
    k1 = generator(t0)
    middle = generator(t0 + h / 2)
    k2 = middle @ (identity + h / 2 * k1)
    k3 = middle @ (identity + h / 2 * k2)
    k4 = generator(t0 + h) @ (identity + h * k3)
    return identity + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _ordered_product(propagators: np.ndarray) -> np.ndarray:
    # later propagators multiply on the left, pairwise to keep the reduction vectorized
    while propagators.shape[0] > 1:
        if propagators.shape[0] % 2:
            propagators = np.concatenate([propagators, np.eye(4)[None]], axis=0)
        propagators = propagators[1::2] @ propagators[0::2]
    return propagators[0]


def _embed_pair(block: np.ndarray, site: int, N: int) -> np.ndarray:
    M = np.eye(2 * N)
    active = slice(2 * site - 2, 2 * site + 2)
    M[active, active] = block
    return M


def integrate_rotating_frame(schedule: PulseSchedule, N: int, dt: Optional[float] = None) -> np.ndarray:
    """
    Interaction-picture propagator of a schedule on the N site modes

    Classic fourth-order Runge-Kutta on the two driven oscillators, every
    other oscillator only evolves freely and is the identity in this frame.

    Raises:
        StepSizeError: `dt` above a two-hundredth of a period
        SiteRangeError: the schedule drives a spring outside the chain
    """
    omega = schedule.omega
    dt = default_step_size(omega) if dt is None else dt
    if not 0.0 < dt <= 2 * math.pi / omega / MIN_STEPS_PER_PERIOD:
        raise StepSizeError(dt=dt, maximum=2 * math.pi / omega / MIN_STEPS_PER_PERIOD)
    site = schedule.target_step.site
    if not 1 <= site <= N - 1:
        raise SiteRangeError("Schedule drives a spring outside the chain", site=site, chain_length=N)

    block = np.eye(4)
    start = 0.0
    for segment in schedule.segments:
        if segment.duration > 0.0 and segment.mean_strength > 0.0:
            block = _ordered_product(_segment_propagators(segment, start, dt, omega)) @ block
        start += segment.duration
    return _embed_pair(block, site, N)


def integrate_chain(schedule: PulseSchedule, N: int, dt: Optional[float] = None) -> np.ndarray:
    """
    Lab-frame propagator of the chain under a schedule

    Args:
        schedule (PulseSchedule): drive of a single spring
        N (int): chain length
        dt (Optional[float], optional): step size. Defaults to a five-hundredth of a period.

    Raises:
        IntegrationError: symplectic defect above 1e-4

    Returns:
        np.ndarray: 2N x 2N symplectic matrix
    """
    interaction = integrate_rotating_frame(schedule, N, dt)
    free = np.kron(np.eye(N), free_rotation(schedule.total_duration, schedule.omega))
    propagator = free @ interaction
    _check_drift(propagator)
    return propagator


def _check_drift(propagator: np.ndarray) -> float:
    defect = symplectic_defect(propagator)
    if defect > DRIFT_ABORT:
        raise IntegrationError(defect=defect, bound=DRIFT_ABORT)
    if defect > DRIFT_WARNING:
        logger.warning(f"Propagator symplectic defect {defect:.2e} above {DRIFT_WARNING:.0e}")
    return defect


def relative_mode_basis(site: int, N: int) -> np.ndarray:
    """2N x 2 site-quadrature basis of the relative coordinates of `site` and `site + 1`."""
    C = cradle_basis(N).phase_space_matrix[:-2, :]
    return C.T @ np.kron(relative_mode_vector(site, N)[:, None], np.eye(2))


def validate_schedule(schedule: PulseSchedule, N: int, dt: Optional[float] = None) -> ScheduleValidation:
    """
    Compare the integrated rotating-frame propagator with the step it should realize

    `error` is the spectral distance of the relative-mode action from the step,
    `leakage` the spectral norm of everything the propagator does besides
    acting on the relative mode.
    """
    interaction = integrate_rotating_frame(schedule, N, dt)
    defect = _check_drift(interaction)
    V = relative_mode_basis(schedule.target_step.site, N)
    action = V.T @ interaction @ V
    error = float(np.linalg.norm(action - schedule.target_step.inner, 2))
    leakage = float(np.linalg.norm(interaction - np.eye(2 * N) - V @ (action - np.eye(2)) @ V.T, 2))
    logger.debug(f"Schedule at site {schedule.target_step.site}: error {error:.3e}, leakage {leakage:.3e}")
    return ScheduleValidation(error=error, leakage=leakage, defect=defect)
