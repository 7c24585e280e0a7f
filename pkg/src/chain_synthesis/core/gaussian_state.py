"""
Covariance-matrix representation of Gaussian states of the chain.

All covariances use the interleaved quadrature ordering with vacuum variance 1/2.
"""
import itertools
import math
from typing import List, Optional, Tuple

import numpy as np

from ..utils.logger import get_logger
from .chain_basis import cradle_basis
from .error import ConstructionError, DimensionError, PhysicalityError, SiteRangeError
from .schemas import EllipseReport, PhononTarget
from .symplectic import VACUUM_VARIANCE, check_symplectic, symplectic_form

logger = get_logger()

SYMMETRY_TOL = 1e-12
PHYSICALITY_TOL = 1e-9
ENTANGLEMENT_THRESHOLD = 1e-9
SUM_MODE_TOL = 1e-10
_CIRCLE_TOL = 1e-12


def _covariance(sigma: np.ndarray) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1] or sigma.shape[0] % 2:
        raise DimensionError("Covariance must be square with even dimension", shape=sigma.shape)
    scale = max(1.0, float(np.max(np.abs(sigma))))
    asymmetry = float(np.max(np.abs(sigma - sigma.T)))
    if asymmetry > SYMMETRY_TOL * scale:
        raise PhysicalityError("Covariance is not symmetric", asymmetry=asymmetry)
    return sigma


def vacuum_state(m: int) -> np.ndarray:
    if m < 1:
        raise DimensionError("Vacuum needs at least one mode", modes=m)
    return VACUUM_VARIANCE * np.eye(2 * m)


def symplectic_eigenvalues(sigma: np.ndarray) -> np.ndarray:
    """
    Symplectic spectrum, the moduli of the eigenvalues of i J sigma, one per mode, descending.
    """
    sigma = _covariance(sigma)
    J = symplectic_form(sigma.shape[0] // 2)
    moduli = np.sort(np.abs(np.linalg.eigvals(1j * J @ sigma)))[::-1]
    return moduli[::2]


def check_covariance(sigma: np.ndarray, tol: float = PHYSICALITY_TOL) -> np.ndarray:
    """
    Certify that `sigma` is a physical covariance matrix

    Raises:
        PhysicalityError: asymmetric, or a symplectic eigenvalue below 1/2 - tol
    """
    sigma = _covariance(sigma)
    smallest = float(symplectic_eigenvalues(sigma)[-1])
    if smallest < VACUUM_VARIANCE - tol:
        raise PhysicalityError(
            "Covariance violates the uncertainty principle", smallest_symplectic_eigenvalue=smallest
        )
    return sigma


def apply_symplectic(sigma: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Congruence `M sigma M^T`."""
    sigma = np.asarray(sigma, dtype=float)
    M = np.asarray(M, dtype=float)
    if M.shape != sigma.shape:
        raise DimensionError("Symplectic matrix and covariance differ in size", matrix=M.shape, covariance=sigma.shape)
    result = M @ sigma @ M.T
    return 0.5 * (result + result.T)


def _chain_length(sigma: np.ndarray) -> int:
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1] or sigma.shape[0] % 2:
        raise DimensionError("Covariance must be square with even dimension", shape=sigma.shape)
    N = sigma.shape[0] // 2
    if N < 2:
        raise DimensionError("A chain needs at least two oscillators", chain_length=N)
    return N


def site_to_cradle(sigma_site: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Express a chain covariance in cradle coordinates

    Returns:
        Tuple[np.ndarray, np.ndarray]: covariance of the N-1 cradle modes and
        the 2x2 block of the total displacement
    """
    sigma_site = np.asarray(sigma_site, dtype=float)
    N = _chain_length(sigma_site)
    C = cradle_basis(N).phase_space_matrix
    sigma = apply_symplectic(sigma_site, C)
    return sigma[:-2, :-2], sigma[-2:, -2:]


def cradle_to_site(sigma_cradle: np.ndarray, sum_mode_block: Optional[np.ndarray] = None) -> np.ndarray:
    """Inverse of `site_to_cradle`; the total displacement defaults to vacuum."""
    sigma_cradle = np.asarray(sigma_cradle, dtype=float)
    N = sigma_cradle.shape[0] // 2 + 1
    full = vacuum_state(N)
    full[:-2, :-2] = sigma_cradle
    if sum_mode_block is not None:
        full[-2:, -2:] = sum_mode_block
    C = cradle_basis(N).phase_space_matrix
    return apply_symplectic(full, C.T)


# Pseudo-phonons


def phonon_transform(N: int) -> np.ndarray:
    """
    Unitary F with F[k mod N, n-1] = exp(i 2 pi k n / N) / sqrt(N), mapping site to phonon modes
    """
    n = np.arange(1, N + 1)
    kappa = np.arange(N)
    return np.exp(2j * math.pi * np.outer(kappa, n) / N) / math.sqrt(N)


def _real_bogoliubov(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    # a -> A a + B a^dagger with a = (x + i p)/sqrt(2), interleaved real form
    N = A.shape[0]
    M = np.zeros((2 * N, 2 * N))
    M[0::2, 0::2] = np.real(A + B)
    M[0::2, 1::2] = -np.imag(A - B)
    M[1::2, 0::2] = np.imag(A + B)
    M[1::2, 1::2] = np.real(A - B)
    return M


def phonon_site_symplectic(target: PhononTarget) -> np.ndarray:
    """
    Site-basis symplectic matrix of the pair squeezing of pseudo-phonons k1 and k2

    a_k1 -> cosh(xi) a_k1 - i sinh(xi) a_k2^dagger and symmetrically for k2.
    """
    N = target.n_oscillators
    F = phonon_transform(N)
    kappa1, kappa2 = target.k1 % N, target.k2 % N
    bogoliubov_a = np.eye(N, dtype=complex)
    bogoliubov_a[kappa1, kappa1] = bogoliubov_a[kappa2, kappa2] = math.cosh(target.xi)
    bogoliubov_b = np.zeros((N, N), dtype=complex)
    bogoliubov_b[kappa1, kappa2] = bogoliubov_b[kappa2, kappa1] = -1j * math.sinh(target.xi)
    A = F.conj().T @ bogoliubov_a @ F
    B = F.conj().T @ bogoliubov_b @ F.conj()
    return check_symplectic(_real_bogoliubov(A, B), 1e-10, name="phonon transformation")


def phonon_target_symplectic(target: PhononTarget) -> np.ndarray:
    """
    Pseudo-phonon squeezing as a symplectic matrix on the N-1 cradle modes

    Args:
        target (PhononTarget): chain length, phonon indices and squeezing

    Raises:
        ConstructionError: the total displacement is not left alone

    Returns:
        np.ndarray: 2(N-1) x 2(N-1) symplectic matrix
    """
    N = target.n_oscillators
    M = phonon_site_symplectic(target)
    C = cradle_basis(N).phase_space_matrix
    cradle = C @ M @ C.T
    decoupling = max(
        float(np.max(np.abs(cradle[-2:, :] - np.eye(2 * N)[-2:, :]))),
        float(np.max(np.abs(cradle[:, -2:] - np.eye(2 * N)[:, -2:]))),
    )
    if decoupling > SUM_MODE_TOL:
        raise ConstructionError("Phonon target couples to the total displacement", defect=decoupling)
    logger.debug(f"Phonon target k1={target.k1} k2={target.k2} xi={target.xi} on N={N}")
    return cradle[:-2, :-2]


def phonon_state(target: PhononTarget) -> np.ndarray:
    """Site-basis covariance of the target applied to the vacuum."""
    T = phonon_target_symplectic(target)
    return cradle_to_site(apply_symplectic(vacuum_state(T.shape[0] // 2), T))


def phonon_quadrature_rows(N: int, k: int) -> np.ndarray:
    """
    Rows (X_k, P_k) expressing the quadratures of pseudo-phonon k in site quadratures
    """
    row = phonon_transform(N)[k % N]
    Q = np.zeros((2, 2 * N))
    Q[0, 0::2], Q[0, 1::2] = row.real, -row.imag
    Q[1, 0::2], Q[1, 1::2] = row.imag, row.real
    return Q


# Ellipses and entanglement


def _check_sites(sigma: np.ndarray, *sites: int) -> int:
    N = sigma.shape[0] // 2
    for site in sites:
        if not 1 <= site <= N:
            raise SiteRangeError(f"Site must lie in [1, {N}]", site=site)
    return N


def _ellipse(block: np.ndarray, pair: Tuple[int, int], kind: str) -> EllipseReport:
    variances, vectors = np.linalg.eigh(block)
    if variances[1] - variances[0] < _CIRCLE_TOL:
        angle = 0.0
    else:
        angle = math.atan2(vectors[1, 1], vectors[0, 1])
        if angle <= -math.pi / 2:
            angle += math.pi
        elif angle > math.pi / 2:
            angle -= math.pi
    return EllipseReport(
        pair=pair,
        kind=kind,
        semi_major=math.sqrt(variances[1]),
        semi_minor=math.sqrt(variances[0]),
        angle=angle,
    )


def pair_ellipses(sigma_site: np.ndarray, n: int, m: int) -> Tuple[EllipseReport, Optional[EllipseReport]]:
    """
    Uncertainty ellipses of (x_n +- x_m, p_n +- p_m)/sqrt(2)

    For `n == m` the single-site ellipse is returned as the sum ellipse and the
    difference ellipse is None.

    Args:
        sigma_site (np.ndarray): site-basis covariance
        n (int): first site, 1-indexed
        m (int): second site, 1-indexed

    Returns:
        Tuple[EllipseReport, Optional[EllipseReport]]: sum and difference ellipses
    """
    sigma_site = np.asarray(sigma_site, dtype=float)
    N = _check_sites(sigma_site, n, m)
    if n == m:
        block = sigma_site[2 * n - 2 : 2 * n, 2 * n - 2 : 2 * n]
        return _ellipse(block, (n, n), "sum"), None

    reports = []
    for sign, kind in ((1.0, "sum"), (-1.0, "difference")):
        rows = np.zeros((2, 2 * N))
        rows[0, 2 * n - 2], rows[0, 2 * m - 2] = 1.0, sign
        rows[1, 2 * n - 1], rows[1, 2 * m - 1] = 1.0, sign
        rows /= math.sqrt(2.0)
        reports.append(_ellipse(rows @ sigma_site @ rows.T, (n, m), kind))
    return reports[0], reports[1]


def log_negativity(sigma_site: np.ndarray, n: int, m: int) -> float:
    """
    Logarithmic negativity of sites `n` and `m`, max(0, -ln(2 nu)) with nu the
    smaller symplectic eigenvalue of the partially transposed two-site block
    """
    sigma_site = np.asarray(sigma_site, dtype=float)
    _check_sites(sigma_site, n, m)
    if n == m:
        raise SiteRangeError("Log-negativity needs two distinct sites", site=n)
    index = [2 * n - 2, 2 * n - 1, 2 * m - 2, 2 * m - 1]
    block = sigma_site[np.ix_(index, index)]
    transpose = np.diag([1.0, 1.0, 1.0, -1.0])
    nu = float(symplectic_eigenvalues(transpose @ block @ transpose)[-1])
    return max(0.0, -math.log(2.0 * nu))


def negativity_table(sigma_site: np.ndarray) -> np.ndarray:
    """Symmetric N x N table of pairwise log-negativities, zero diagonal."""
    sigma_site = np.asarray(sigma_site, dtype=float)
    N = sigma_site.shape[0] // 2
    table = np.zeros((N, N))
    for n, m in itertools.combinations(range(1, N + 1), 2):
        table[n - 1, m - 1] = table[m - 1, n - 1] = log_negativity(sigma_site, n, m)
    return table


def count_entangled(table: np.ndarray, threshold: float = ENTANGLEMENT_THRESHOLD) -> int:
    upper = np.triu(np.asarray(table), k=1)
    return int(np.count_nonzero(upper > threshold))


def entangled_pair_count(sigma_site: np.ndarray, threshold: float = ENTANGLEMENT_THRESHOLD) -> int:
    return count_entangled(negativity_table(sigma_site), threshold)


def site_pairs(N: int, include_diagonal: bool = True) -> List[Tuple[int, int]]:
    """Unordered site pairs (n, m), n <= m, in row-major order."""
    if include_diagonal:
        return list(itertools.combinations_with_replacement(range(1, N + 1), 2))
    return list(itertools.combinations(range(1, N + 1), 2))
