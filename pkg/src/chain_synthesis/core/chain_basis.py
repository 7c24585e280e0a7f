"""
Cradle coordinates of a chain and the embedded nearest-neighbour couplings.

Cradle mode j (1 <= j <= N-1) moves the first j oscillators in phase and
oscillator j+1 against them; the last row is the total displacement, which no
spring can address. Couplings are therefore matrices on the N-1 cradle modes.
"""
import itertools
import math
from typing import Iterable, List, Sequence

import numpy as np

from ..utils.logger import get_logger
from .error import DimensionError, GeneratorSpanError, InputError, SiteRangeError
from .schemas import CradleBasis, EmbeddedCoupling, LieClosure
from .symplectic import SP2_GENERATORS, TOL_SYM, check_symplectic, generator_coordinates

logger = get_logger()

LIE_RANK_TOL = 1e-9
_SPAN_TOL = 1e-12


def cradle_basis(N: int) -> CradleBasis:
    """
    Cradle basis of a chain of `N` oscillators

    >>> cradle_basis(2).position_matrix
    array([[ 0.70710678, -0.70710678],
           [ 0.70710678,  0.70710678]])
    """
    if N < 2:
        raise DimensionError("A chain needs at least two oscillators", chain_length=N)
    C = np.zeros((N, N))
    for j in range(1, N):
        C[j - 1, :j] = 1.0 / math.sqrt(j * (j + 1))
        C[j - 1, j] = -math.sqrt(j / (j + 1))
    C[N - 1, :] = 1.0 / math.sqrt(N)
    return CradleBasis(
        n_oscillators=N, position_matrix=C, phase_space_matrix=np.kron(C, np.eye(2))
    )


def _check_site(n: int, N: int) -> None:
    if not 1 <= n <= N - 1:
        raise SiteRangeError(f"Site must lie in [1, {N - 1}]", site=n, chain_length=N)


def relative_mode_vector(n: int, N: int) -> np.ndarray:
    """
    Cradle components of the relative coordinate (x_n - x_{n+1})/sqrt(2)

    Only modes n-1 and n are involved, with weights -sqrt((n-1)/2n) and
    sqrt((n+1)/2n).

    Returns:
        np.ndarray: vector of length N-1
    """
    _check_site(n, N)
    u = np.zeros(N - 1)
    if n > 1:
        u[n - 2] = -math.sqrt((n - 1) / (2 * n))
    u[n - 1] = math.sqrt((n + 1) / (2 * n))
    return u


def _active_weights(n: int) -> np.ndarray:
    # u u^T restricted to modes (n-1, n)
    if n == 1:
        return np.ones((1, 1))
    off = -math.sqrt(n * n - 1) / (2 * n)
    return np.array([[(n - 1) / (2 * n), off], [off, (n + 1) / (2 * n)]])


def coupling_block(n: int, S: np.ndarray) -> np.ndarray:
    """
    Active block of D_n(S): S itself for n = 1, the 4x4 P_n(S) otherwise.
    """
    weights = _active_weights(n)
    size = 2 * weights.shape[0]
    return np.eye(size) + np.kron(weights, np.asarray(S, dtype=float) - np.eye(2))


def active_slice(n: int) -> slice:
    """Quadrature rows touched by a coupling at site `n`."""
    return slice(2 * max(n - 2, 0), 2 * n)


def coupling_matrix(n: int, S: np.ndarray, n_modes: int) -> np.ndarray:
    """D_n(S) on `n_modes` cradle modes, without validation."""
    M = np.eye(2 * n_modes)
    active = active_slice(n)
    M[active, active] = coupling_block(n, S)
    return M


def embed_coupling(n: int, S: np.ndarray, N: int) -> EmbeddedCoupling:
    """
    Embed the action `S` of spring `n` on the relative coordinates into the cradle modes

    Args:
        n (int): site, 1 <= n <= N-1
        S (np.ndarray): 2x2 symplectic matrix
        N (int): chain length

    Raises:
        SiteRangeError: site outside the chain
        NotSymplecticError: `S` is not symplectic

    Returns:
        EmbeddedCoupling: D_n(S) with its site and inner matrix
    """
    _check_site(n, N)
    S = check_symplectic(S, TOL_SYM, name="S")
    if S.shape != (2, 2):
        raise DimensionError("A coupling acts with a 2x2 matrix", shape=S.shape)
    return EmbeddedCoupling(site=n, inner=S, matrix=coupling_matrix(n, S, N - 1))


def generator(n: int, s: np.ndarray, N: int) -> np.ndarray:
    """
    Generator d_n(s) = log D_n(exp(s)) on the N-1 cradle modes

    Args:
        n (int): site
        s (np.ndarray): 2x2 matrix in the span of s1, s2, s3
        N (int): chain length

    Raises:
        GeneratorSpanError: `s` has a component outside the span (non-zero trace)

    Returns:
        np.ndarray: 2(N-1) x 2(N-1) matrix
    """
    _check_site(n, N)
    s = np.asarray(s, dtype=float)
    _, residual = generator_coordinates(s)
    if residual > _SPAN_TOL:
        raise GeneratorSpanError(residual=residual)
    d = np.zeros((2 * (N - 1), 2 * (N - 1)))
    active = active_slice(n)
    d[active, active] = np.kron(_active_weights(n), s)
    return d


def coupling_commutator(i: int, j: int, n: int) -> np.ndarray:
    """
    Active 4x4 block of the commutator of s_i acting on mode n-1 alone with d_n(s_j)

    Top-left ((n-1)/2n)[s_i, s_j], top-right -(sqrt(n^2-1)/2n) s_i s_j,
    bottom-left (sqrt(n^2-1)/2n) s_j s_i, bottom-right zero.
    """
    if i not in (1, 2, 3) or j not in (1, 2, 3):
        raise InputError("Generator indices must be 1, 2 or 3", i=i, j=j)
    if n < 2:
        raise SiteRangeError("The commutator couples two cradle modes, site must be >= 2", site=n)
    si, sj = SP2_GENERATORS[i - 1], SP2_GENERATORS[j - 1]
    c = math.sqrt(n * n - 1) / (2 * n)
    block = np.zeros((4, 4))
    block[:2, :2] = (n - 1) / (2 * n) * (si @ sj - sj @ si)
    block[:2, 2:] = -c * si @ sj
    block[2:, :2] = c * sj @ si
    return block


def _orthogonalize(vector: np.ndarray, basis: List[np.ndarray]) -> np.ndarray:
    # modified Gram-Schmidt, two passes
    for _ in range(2):
        for b in basis:
            vector = vector - (b @ vector) * b
    return vector


def lie_closure(generators: Sequence[np.ndarray], rank_tol: float = LIE_RANK_TOL) -> LieClosure:
    """
    Span of the Lie algebra generated by square matrices

    Commutators of the generators with the elements added in the previous
    round are orthonormalized against the current basis until a round adds
    nothing.

    Args:
        generators (Sequence[np.ndarray]): square matrices of equal size
        rank_tol (float, optional): relative singular-value threshold. Defaults to `LIE_RANK_TOL`.

    Returns:
        LieClosure: orthonormal basis, dimension and number of productive rounds
    """
    matrices = [np.asarray(g, dtype=float) for g in generators]
    if not matrices:
        raise InputError("Lie closure needs at least one generator")
    size = matrices[0].shape
    if any(g.shape != size or size[0] != size[1] for g in matrices):
        raise DimensionError("Generators must be square and of equal size", shape=size)

    basis: List[np.ndarray] = []

    def extend(candidates: Iterable[np.ndarray]) -> List[np.ndarray]:
        added = []
        for matrix in candidates:
            vector = matrix.ravel()
            norm = np.linalg.norm(vector)
            if norm == 0.0:
                continue
            residual = _orthogonalize(vector / norm, basis)
            residual_norm = np.linalg.norm(residual)
            if residual_norm > rank_tol:
                basis.append(residual / residual_norm)
                added.append(residual.reshape(size) / residual_norm)
        return added

    frontier = extend(matrices)
    rounds = 0
    while frontier:
        brackets = (g @ f - f @ g for g, f in itertools.product(matrices, frontier))
        frontier = extend(brackets)
        if frontier:
            rounds += 1
            logger.debug(f"Lie closure round {rounds}: dimension {len(basis)}")

    stacked = np.array(basis)
    dimension = int(np.linalg.matrix_rank(stacked, tol=rank_tol * np.linalg.norm(stacked, 2)))
    return LieClosure(basis=stacked, dimension=dimension, rounds=rounds)


def chain_generators(n_modes: int) -> List[np.ndarray]:
    """All d_n(s_i) for a chain with `n_modes` cradle modes."""
    N = n_modes + 1
    return [generator(n, s, N) for n in range(1, N) for s in SP2_GENERATORS]


def controllability_dimension(n_modes: int) -> int:
    """
    Dimension of the Lie algebra reachable by the springs of a chain with `n_modes` cradle modes

    Full controllability means `n_modes * (2 * n_modes + 1)`.

    >>> controllability_dimension(2)
    10
    """
    if n_modes < 1:
        raise DimensionError("At least one cradle mode is required", modes=n_modes)
    closure = lie_closure(chain_generators(n_modes))
    logger.info(
        f"Controllability of {n_modes} cradle modes: dimension {closure.dimension} "
        f"after {closure.rounds} rounds"
    )
    return closure.dimension
