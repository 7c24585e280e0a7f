"""
Factorization of symplectic targets into nearest-neighbour coupling steps.

A target T on m cradle modes is written T = (T' + 1) U where U is built from
couplings and shares the last two rows of T. The steps of U are applied first,
then T' on m - 1 modes is factored the same way.
"""
import math
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq, least_squares

from ..utils.logger import get_logger
from .chain_basis import active_slice, coupling_block, coupling_matrix
from .error import DimensionError, SiteRangeError, SolverError
from .gaussian_state import count_entangled, cradle_to_site, negativity_table, vacuum_state
from .schemas import CouplingStep, SynthesisPlan, Tolerances, TraceRecord
from .symplectic import (
    check_symplectic,
    generator_coordinates,
    rotation,
    scaled_tolerance,
    sp2_exp,
    squeeze,
    symplectic_inverse,
)

logger = get_logger()

Triple = Tuple[np.ndarray, np.ndarray, np.ndarray]

IDENTITY_TOL = 1e-12
# relative |det| of the leading block below which a preparatory cascade is inserted
PREPARATION_THRESHOLD = 1e-3
_SINGULAR_LEAD = 1e-12
_TRACE_TOL = 1e-14
_EXPONENT_BOX = 4.0
_DAMPED_ROUNDS = 12
_LSQ_TOL = 1e-15
_DRAWN_CANDIDATES = 4
_FIXED_CANDIDATES = (
    np.eye(2),
    rotation(0.5 * math.pi),
    rotation(math.pi),
    rotation(-0.5 * math.pi),
    rotation(0.25 * math.pi),
    rotation(0.75 * math.pi),
    squeeze(0.5),
    squeeze(-0.5),
)
_PREPARATION_CANDIDATES = (rotation(math.pi), rotation(0.5 * math.pi), rotation(-0.5 * math.pi), squeeze(1.0))

# Plans


def plan_matrix(steps: Sequence[CouplingStep], n_modes: int) -> np.ndarray:
    """
    Matrix of a step sequence, later steps multiplying on the left

    Args:
        steps (Sequence[CouplingStep]): steps in time order
        n_modes (int): number of cradle modes

    Returns:
        np.ndarray: D(s_K) ... D(s_1)
    """
    M = np.eye(2 * n_modes)
    for step in steps:
        if step.site > n_modes:
            raise SiteRangeError("Step outside the chain", site=step.site, modes=n_modes)
        active = active_slice(step.site)
        M[active, :] = coupling_block(step.site, step.inner) @ M[active, :]
    return M


def verify_plan(plan: SynthesisPlan) -> float:
    """
    Spectral norm of the plan matrix minus the target; also stored on the plan.
    """
    residual = float(np.linalg.norm(plan_matrix(plan.steps, plan.n_modes) - plan.target, 2))
    plan.residual = residual
    return residual


def random_symplectic(
    n_modes: int, rng: np.random.Generator, n_factors: Optional[int] = None
) -> np.ndarray:
    """
    Random target as a product of couplings with exponents drawn in [-1, 1]

    Args:
        n_modes (int): number of cradle modes
        rng (np.random.Generator): random generator
        n_factors (Optional[int], optional): number of couplings. Defaults to `2 * n_modes`.

    Returns:
        np.ndarray: 2 n_modes x 2 n_modes symplectic matrix
    """
    if n_modes < 1:
        raise DimensionError("At least one cradle mode is required", modes=n_modes)
    if n_factors is None:
        n_factors = 2 * n_modes
    steps = [
        CouplingStep(site=int(rng.integers(1, n_modes + 1)), inner=sp2_exp(*rng.uniform(-1.0, 1.0, 3)))
        for _ in range(n_factors)
    ]
    return plan_matrix(steps, n_modes)



# Triple solver


def _triple_window(n: int) -> Tuple[int, int]:
    # modes touched by D_n, D_{n-1}, D_n
    return max(1, n - 2), n


def _local_block(site: int, S: np.ndarray, low: int, high: int) -> np.ndarray:
    size = 2 * (high - low + 1)
    M = np.eye(size)
    active = active_slice(site)
    local = slice(active.start - 2 * (low - 1), active.stop - 2 * (low - 1))
    M[local, local] = coupling_block(site, S)
    return M


def triple_factors(params: np.ndarray) -> Triple:
    p = np.asarray(params, dtype=float)
    return sp2_exp(*p[0:3]), sp2_exp(*p[3:6]), sp2_exp(*p[6:9])


def _triple_product(n: int, params: np.ndarray, low: int, high: int) -> np.ndarray:
    S1, S2, S3 = triple_factors(params)
    product = _local_block(n, S1, low, high) @ _local_block(n - 1, S2, low, high)
    return product @ _local_block(n, S3, low, high)


def _weights(n: int) -> Tuple[float, float]:
    # D_n acts on the row combination y = -a w_{n-1} + b w_n and leaves b w_{n-1} + a w_n alone
    return math.sqrt((n - 1) / (2 * n)), math.sqrt((n + 1) / (2 * n))


def _block(rows: np.ndarray, k: int) -> np.ndarray:
    if k < 1:
        return np.zeros((2, 2))
    return rows[:, 2 * (k - 1) : 2 * k]


def _adjugate(M: np.ndarray) -> np.ndarray:
    return np.array([[M[1, 1], -M[0, 1]], [-M[1, 0], M[0, 0]]])


def _apply(rows: np.ndarray, factors: Sequence[Tuple[int, np.ndarray]]) -> np.ndarray:
    """Right-multiply rows by D(factor) for each (site, inner), left to right."""
    rows = np.array(rows, dtype=float)
    for site, inner in factors:
        active = active_slice(site)
        rows[:, active] = rows[:, active] @ coupling_block(site, inner)
    return rows


def _trace_solutions(K: np.ndarray, tau: float) -> List[np.ndarray]:
    """
    Unit-determinant 2x2 matrices S with tr(K S) = tau

    The first one, when found, lies on the steepest path out of the identity;
    the second one comes from the singular value decomposition of K.
    """
    solutions = []
    shift = tau - float(np.trace(K))
    X = K.T - 0.5 * np.trace(K) * np.eye(2)
    norm = float(np.linalg.norm(X))
    if abs(shift) <= _TRACE_TOL * max(1.0, float(np.max(np.abs(K)))):
        solutions.append(np.eye(2))
    elif norm > _TRACE_TOL:
        direction, _ = generator_coordinates(X / norm)

        def mismatch(t: float) -> float:
            return float(np.trace(K @ sp2_exp(*(t * np.asarray(direction))))) - tau

        t = shift / norm
        while abs(t) <= _EXPONENT_BOX:
            if mismatch(t) * shift > 0:
                root = brentq(mismatch, 0.0, t, xtol=1e-15, maxiter=200)
                solutions.append(sp2_exp(*(root * np.asarray(direction))))
                break
            t *= 2.0

    U, sigma, Vh = np.linalg.svd(K)
    if sigma[0] > _TRACE_TOL:
        sign = float(np.sign(np.linalg.det(U) * np.linalg.det(Vh)))
        x = tau / (sigma[0] + sigma[1])
        rest = x * x - sign
        off = math.sqrt(abs(rest))
        core = np.array([[x, off], [off if rest >= 0 else -off, x]])
        solutions.append(Vh.T @ core @ U.T)
    return solutions


def _closed_form_triples(n: int, rows: np.ndarray, block: np.ndarray, S1: np.ndarray) -> Iterator[Triple]:
    """
    Triples (S1, S2, S3) sending block n of `rows` to `block` for a given S1

    After D_n(S1) the middle step adds Delta = h (S2 - 1) to block n-1, and
    the last step can only finish the job when two 2x2 determinants agree.
    That condition is linear in S2, so S2 and then S3 follow in closed form.
    """
    a, b = _weights(n)
    a_mid, b_mid = _weights(n - 1)
    before, previous, last = _block(rows, n - 2), _block(rows, n - 1), _block(rows, n)
    y = -a * previous + b * last
    z = b * previous + a * last
    G = (block - a * z) / b
    y1 = y @ S1
    h = b_mid * (-a_mid * before + b_mid * (-a * y1 + b * z))
    K = a * _adjugate(y1 - G) @ h
    tau = float(np.linalg.det(y) - np.linalg.det(G) + np.trace(K))
    for S2 in _trace_solutions(K, tau):
        delta = h @ (S2 - np.eye(2))
        Y = y1 - a * delta
        if abs(np.linalg.det(Y)) <= _TRACE_TOL * max(1.0, float(np.max(np.abs(Y)))) ** 2:
            continue
        S3 = np.linalg.solve(Y, G - a * delta)
        determinant = float(np.linalg.det(S3))
        if determinant <= 0:
            continue
        yield S1, S2, S3 / math.sqrt(determinant)


def _damped_fit(
    residual: Callable[[np.ndarray], np.ndarray], x0: np.ndarray, damping: float, accept: float
) -> Tuple[np.ndarray, float]:
    """
    Proximal Levenberg-Marquardt rounds: each round fits the residual plus
    `sqrt(damping) * (x - anchor)`, then moves the anchor and lowers the damping.
    """
    x = x0
    error = float(np.max(np.abs(residual(x))))
    for _ in range(_DAMPED_ROUNDS):
        if error <= accept:
            break
        anchor, weight = x, math.sqrt(damping)
        fit = least_squares(
            lambda p: np.concatenate([residual(p), weight * (p - anchor)]),
            anchor,
            method="lm",
            xtol=_LSQ_TOL,
            ftol=_LSQ_TOL,
            gtol=_LSQ_TOL,
        )
        x = fit.x
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > _EXPONENT_BOX:
            return x, math.inf
        error = float(np.max(np.abs(residual(x))))
        damping *= 0.1
    return x, error


def solve_triple(
    n: int,
    start: np.ndarray,
    goal: np.ndarray,
    rng: Optional[np.random.Generator] = None,
    tolerances: Optional[Tolerances] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Find S1, S2, S3 with block n of `start @ D_n(S1) D_{n-1}(S2) D_n(S3)` equal to block n of `goal`

    Closed-form triples are tried first for a fixed list of S1 (quarter turns,
    squeezes) and a few drawn with `rng`; among those within tolerance the one
    with the smallest entries wins. When none qualifies, the nine exponent
    coordinates are fitted by damped least squares from seeded restarts.

    Args:
        n (int): site of the outer couplings, at least 2
        start (np.ndarray): 2 x 2m rows before the triple
        goal (np.ndarray): 2 x 2m rows to reach
        rng (Optional[np.random.Generator], optional): candidate and restart generator. Defaults to seed 0.
        tolerances (Optional[Tolerances], optional): solver settings.

    Raises:
        DimensionError: `n < 2` or rows narrower than n modes
        SolverError: nothing within `max_restarts` reaches `tol_block`

    Returns:
        Tuple[np.ndarray, np.ndarray, np.ndarray]: S1, S2, S3
    """
    tolerances = tolerances or Tolerances()
    rng = rng if rng is not None else np.random.default_rng(0)
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    if n < 2 or start.shape[1] < 2 * n or goal.shape != start.shape:
        raise DimensionError("Triple outside the rows", site=n, shape=start.shape)

    wanted = _block(goal, n)
    scale = max(1.0, float(np.max(np.abs(goal))))
    accept = tolerances.tol_block * scale
    drawn = [sp2_exp(*rng.uniform(-1.0, 1.0, 3)) for _ in range(_DRAWN_CANDIDATES)]

    best, best_size = None, math.inf
    for S1 in [*_FIXED_CANDIDATES, *drawn]:
        try:
            with np.errstate(over="raise", invalid="raise"):
                for triple in _closed_form_triples(n, start, wanted, S1):
                    reached = _apply(start, zip((n, n - 1, n), triple))
                    if np.max(np.abs(_block(reached, n) - wanted)) > accept:
                        continue
                    size = max(float(np.max(np.abs(reached))), *(float(np.max(np.abs(S))) for S in triple))
                    if size < best_size:
                        best, best_size = triple, size
        except (np.linalg.LinAlgError, FloatingPointError, OverflowError, ValueError):
            continue
    if best is not None:
        logger.debug(f"Closed-form triple at site {n}, largest entry {best_size:.3e}")
        return best

    low, high = _triple_window(n)
    window = start[:, 2 * (low - 1) : 2 * high]
    columns = slice(2 * (n - low), 2 * (n - low) + 2)

    def residual(params: np.ndarray) -> np.ndarray:
        rows = window @ _triple_product(n, params, low, high)
        return (rows[:, columns] - wanted).ravel()

    lowest = math.inf
    for restart in range(tolerances.max_restarts):
        spread = min(_EXPONENT_BOX, 1.0 + restart / 8.0)
        x0 = np.zeros(9) if restart == 0 else rng.uniform(-spread, spread, 9)
        try:
            with np.errstate(over="raise", invalid="raise"):
                x, error = _damped_fit(residual, x0, tolerances.initial_damping, 1e-3 * accept)
        except (np.linalg.LinAlgError, FloatingPointError, OverflowError, ValueError) as failure:
            logger.debug(f"Triple at site {n}, restart {restart} diverged: {failure}")
            continue
        lowest = min(lowest, error)
        logger.debug(f"Triple at site {n}, restart {restart}: residual {error:.3e}")
        if error <= accept:
            return triple_factors(x)
    raise SolverError(
        "Triple solver exhausted its restarts",
        site=n,
        restarts=tolerances.max_restarts,
        best_residual=lowest,
        tolerance=accept,
    )


# Decorrelation


def _matrix_factors_to_steps(factors: List[Tuple[int, np.ndarray]]) -> List[CouplingStep]:
    # factors multiply left to right, so the rightmost one acts first
    return [CouplingStep(site=site, inner=inner) for site, inner in reversed(factors)]


def _simplify(steps: List[CouplingStep]) -> List[CouplingStep]:
    """Drop identity steps and merge neighbours on the same site, D_n(B) D_n(A) = D_n(BA)."""
    simplified: List[CouplingStep] = []
    for step in steps:
        if np.max(np.abs(step.inner - np.eye(2))) <= IDENTITY_TOL:
            continue
        if simplified and simplified[-1].site == step.site:
            merged = step.inner @ simplified[-1].inner
            simplified.pop()
            if np.max(np.abs(merged - np.eye(2))) > IDENTITY_TOL:
                simplified.append(CouplingStep(site=step.site, inner=merged))
            continue
        simplified.append(step)
    return simplified


def _normalized(S: np.ndarray) -> np.ndarray:
    # a 2x2 matrix with unit determinant is symplectic
    return S / math.sqrt(np.linalg.det(S))


def _leading_strength(rows: np.ndarray) -> float:
    lead = rows[:, 0:2]
    return abs(float(np.linalg.det(lead))) / max(1.0, float(np.max(np.abs(lead)))) ** 2


def _preparation(goal: np.ndarray) -> List[Tuple[int, np.ndarray]]:
    """
    Couplings X = D_d(P) ... D_2(P), as (site, inner) in matrix order, making block 1 of `goal @ X` invertible

    Empty when block 1 already is. The shortest cascade reaching
    `PREPARATION_THRESHOLD` is kept, otherwise the strongest one.
    """
    best, strongest = [], _leading_strength(goal)
    if strongest >= PREPARATION_THRESHOLD:
        return best
    m = goal.shape[1] // 2
    for depth in range(2, m + 1):
        for P in _PREPARATION_CANDIDATES:
            cascade = [(site, P) for site in range(depth, 1, -1)]
            strength = _leading_strength(_apply(goal, cascade))
            if strength > strongest:
                best, strongest = cascade, strength
        if strongest >= PREPARATION_THRESHOLD:
            break
    return best


def decorrelate_last(
    T: np.ndarray,
    seed: int = 0,
    rng: Optional[np.random.Generator] = None,
    tolerances: Optional[Tolerances] = None,
) -> Tuple[List[CouplingStep], np.ndarray]:
    """
    Steps U sharing the last two rows of `T`, and the leading block of T U^-1

    When block 1 of the last rows is singular, a short cascade X is applied to
    the rows first and undone at the end. Blocks m, m-1, ..., 2 of the rows
    are then fixed one triple at a time, block 1 by a closing D_1 step.

    Args:
        T (np.ndarray): symplectic matrix on m modes
        seed (int, optional): seed used when `rng` is not given. Defaults to 0.
        rng (Optional[np.random.Generator], optional): generator shared across sweeps.
        tolerances (Optional[Tolerances], optional): solver settings.

    Raises:
        SolverError: a triple failed, or T U^-1 keeps couplings to the last mode

    Returns:
        Tuple[List[CouplingStep], np.ndarray]: steps in time order and T_reduced on m-1 modes
    """
    tolerances = tolerances or Tolerances()
    rng = rng if rng is not None else np.random.default_rng(seed)
    T = np.asarray(T, dtype=float)
    T = check_symplectic(T, scaled_tolerance(tolerances.tol_sym, T), name="T")
    m = T.shape[0] // 2
    goal = T[-2:, :]
    scale = max(1.0, float(np.max(np.abs(goal))))

    identity_rows = np.eye(2 * m)[-2:, :]
    if np.max(np.abs(goal - identity_rows)) <= tolerances.tol_block * scale:
        logger.debug(f"Mode {m} already decorrelated")
        return [], T[:-2, :-2]
    if m == 1:
        return [CouplingStep(site=1, inner=_normalized(T))], np.zeros((0, 0))

    preparation = _preparation(goal)
    prepared = _apply(goal, preparation)
    if preparation:
        logger.debug(f"Mode {m}: {len(preparation)} preparatory steps for a singular leading block")

    factors: List[Tuple[int, np.ndarray]] = []
    w = identity_rows.copy()
    for j in range(m, 1, -1):
        triple = list(zip((j, j - 1, j), solve_triple(j, w, prepared, rng, tolerances)))
        w = _apply(w, triple)
        factors.extend(triple)

    if _leading_strength(w) <= _SINGULAR_LEAD:
        determinant = float(np.linalg.det(w[:, 0:2]))
        raise SolverError("Leading block stays singular", mode=m, determinant=determinant)
    factors.append((1, _normalized(np.linalg.solve(w[:, 0:2], prepared[:, 0:2]))))
    factors.extend((site, symplectic_inverse(inner)) for site, inner in reversed(preparation))

    steps = _matrix_factors_to_steps(factors)
    U = plan_matrix(steps, m)
    reduced = T @ symplectic_inverse(U)
    row_bound = tolerances.tol_block * scale * max(1.0, float(np.max(np.abs(U))))
    rows_left = float(np.max(np.abs(reduced[-2:, :] - identity_rows)))
    columns_left = float(np.max(np.abs(reduced[:, -2:] - identity_rows.T)))
    logger.debug(
        f"Mode {m} decorrelated with {len(steps)} steps, "
        f"off-block residual {max(rows_left, columns_left):.3e}"
    )
    if rows_left > row_bound or columns_left > row_bound + scaled_tolerance(tolerances.tol_sym, T):
        raise SolverError(
            "Decorrelated target still couples the last mode",
            mode=m,
            rows=rows_left,
            columns=columns_left,
            tolerance=row_bound,
        )
    return steps, reduced[:-2, :-2]


def _transposed(steps: List[CouplingStep]) -> List[CouplingStep]:
    # (D(s_K) ... D(s_1))^T = D(s_1^T) ... D(s_K^T)
    return [CouplingStep(site=step.site, inner=step.inner.T) for step in reversed(steps)]


def synthesize(
    T: np.ndarray,
    seed: int = 0,
    tolerances: Optional[Tolerances] = None,
    use_column_variant: bool = False,
) -> SynthesisPlan:
    """
    Factor a symplectic matrix on the cradle modes into coupling steps

    The row variant decorrelates the last mode of T by steps applied first;
    the column variant decorrelates the last mode of T^T, which yields steps
    applied last.

    Args:
        T (np.ndarray): symplectic target on N-1 cradle modes
        seed (int, optional): seed of the triple solver restarts. Defaults to 0.
        tolerances (Optional[Tolerances], optional): solver settings.
        use_column_variant (bool, optional): transposed decorrelation. Defaults to False.

    Raises:
        NotSymplecticError: T is not symplectic
        SolverError: a triple failed, or the plan misses the bound or the tolerance

    Returns:
        SynthesisPlan: verified plan
    """
    tolerances = tolerances or Tolerances()
    T = np.asarray(T, dtype=float)
    T = check_symplectic(T, scaled_tolerance(tolerances.tol_sym, T), name="T")
    n_modes = T.shape[0] // 2
    rng = np.random.default_rng(seed)
    variant = "column" if use_column_variant else "row"
    logger.info(f"Synthesizing a target on {n_modes} cradle modes ({variant} variant)")

    stages: List[Tuple[int, List[CouplingStep]]] = []
    current = T
    for mode in range(n_modes, 0, -1):
        if use_column_variant:
            fragment, reduced = decorrelate_last(current.T, rng=rng, tolerances=tolerances)
            fragment, current = _transposed(fragment), reduced.T
        else:
            fragment, current = decorrelate_last(current, rng=rng, tolerances=tolerances)
        fragment = _simplify(fragment)
        logger.info(f"Stage for cradle mode {mode}: {len(fragment)} steps")
        stages.append((mode, fragment))

    if use_column_variant:
        stages.reverse()

    steps: List[CouplingStep] = []
    boundaries: List[int] = []
    for _, fragment in stages:
        steps.extend(fragment)
        boundaries.append(len(steps))

    plan = SynthesisPlan(
        chain_length=n_modes + 1,
        steps=steps,
        target=T,
        seed=seed,
        variant=variant,
        stage_boundaries=boundaries,
        stage_modes=[mode for mode, _ in stages],
    )
    residual = verify_plan(plan)
    logger.info(f"Plan with {len(steps)} steps, residual {residual:.3e}")
    if len(steps) > plan.step_bound:
        raise SolverError("Plan exceeds the step bound", steps=len(steps), bound=plan.step_bound)
    if residual > tolerances.tol_plan:
        raise SolverError(
            "Plan does not reproduce the target", residual=residual, tolerance=tolerances.tol_plan
        )
    return plan


# Entanglement dynamics


def _stage_of(plan: SynthesisPlan, step: int) -> Optional[int]:
    for boundary, mode in zip(plan.stage_boundaries, plan.stage_modes):
        if step <= boundary:
            return mode
    return None


def correlation_trace(plan: SynthesisPlan, threshold: Optional[float] = None) -> List[TraceRecord]:
    """
    Entanglement after each step of a plan applied to the vacuum

    Record 0 is the vacuum. Each record holds the number of entangled pairs,
    the number of pairs among oscillators touched so far and the full
    log-negativity table.

    Args:
        plan (SynthesisPlan): plan to replay
        threshold (Optional[float], optional): log-negativity counted as entangled.

    Returns:
    Raises:
        SolverError: the final pair count differs from the target state's

        List[TraceRecord]: one record per step, plus the initial one
    """
    threshold = Tolerances().entanglement_threshold if threshold is None else threshold
    n_modes = plan.n_modes
    sigma = vacuum_state(n_modes)
    table = negativity_table(cradle_to_site(sigma))
    records = [TraceRecord(step=0, pair_count=count_entangled(table, threshold), bound=0, table=table)]
    touched = set()
    for index, step in enumerate(plan.steps, start=1):
        M = coupling_matrix(step.site, step.inner, n_modes)
        sigma = M @ sigma @ M.T
        sigma = 0.5 * (sigma + sigma.T)
        touched.update((step.site, step.site + 1))
        table = negativity_table(cradle_to_site(sigma))
        records.append(
            TraceRecord(
                step=index,
                site=step.site,
                stage=_stage_of(plan, index),
                pair_count=count_entangled(table, threshold),
                bound=len(touched) * (len(touched) - 1) // 2,
                table=table,
            )
        )

    target_sigma = plan.target @ vacuum_state(n_modes) @ plan.target.T
    expected = count_entangled(negativity_table(cradle_to_site(target_sigma)), threshold)
    if records[-1].pair_count != expected:
        raise SolverError(
            "Replayed plan misses the entanglement of the target",
            final_pairs=records[-1].pair_count,
            target_pairs=expected,
        )
    return records
