"""
Conventions and small-matrix tools for the real symplectic group.

Quadratures are always ordered (x1, p1, x2, p2, ...), the symplectic form is
block-diagonal in [[0, 1], [-1, 0]] and the vacuum variance is 1/2.
"""
import math
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, Field

from ..utils.logger import get_logger
from .error import DimensionError, NotSymplecticError

logger = get_logger()

TOL_SYM = 1e-9
TOL_RECON = 1e-9
VACUUM_VARIANCE = 0.5

# Sp(2, R) generators
S1 = np.array([[1.0, 0.0], [0.0, -1.0]])
S2 = np.array([[0.0, 1.0], [1.0, 0.0]])
S3 = np.array([[0.0, -1.0], [1.0, 0.0]])
SP2_GENERATORS = (S1, S2, S3)

# below this |discriminant| the closed form loses digits
_SERIES_THRESHOLD = 1e-12
# trace at or below -2 + this has no single real logarithm
_NEGATIVE_TRACE_MARGIN = 1e-12
_SMALL_ANGLE = 1e-8

Exponent = Tuple[float, float, float]


class Sp2Logarithm(BaseModel):
    """
    Exponent coordinates of a 2x2 symplectic matrix.

    `factors` holds one (alpha, beta, gamma) triple when a real logarithm
    exists, two otherwise; `sp2_exp(*factors[0]) @ sp2_exp(*factors[1])`
    reproduces the matrix.
    """

    factors: List[Exponent] = Field(
        ..., description="Exponent triples whose exponentials multiply, left to right, to the matrix"
    )

    @property
    def is_single(self) -> bool:
        return len(self.factors) == 1

    def matrix(self) -> np.ndarray:
        result = np.eye(2)
        for factor in self.factors:
            result = result @ sp2_exp(*factor)
        return result


def symplectic_form(m: int) -> np.ndarray:
    """
    Symplectic form J on `m` modes

    Args:
        m (int): number of modes

    Raises:
        DimensionError: `m < 1`

    Returns:
        np.ndarray: 2m x 2m matrix
    """
    if m < 1:
        raise DimensionError("Symplectic form needs at least one mode", modes=m)
    return np.kron(np.eye(m), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _square_even(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] % 2 != 0:
        raise DimensionError("Expected a square matrix of even dimension", shape=M.shape)
    return M


def symplectic_defect(M: np.ndarray) -> float:
    """Max-norm of `M^T J M - J`."""
    M = _square_even(M)
    J = symplectic_form(M.shape[0] // 2)
    return float(np.max(np.abs(M.T @ J @ M - J)))


def is_symplectic(M: np.ndarray, tol: float = TOL_SYM) -> bool:
    """
    Check the symplectic condition `M^T J M = J` in max-norm

    Args:
        M (np.ndarray): square matrix of even dimension
        tol (float, optional): tolerance. Defaults to `TOL_SYM`.

    Raises:
        DimensionError: odd or non-square input

    Returns:
        bool: True when the defect is at most `tol`
    """
    return symplectic_defect(M) <= tol


def check_symplectic(M: np.ndarray, tol: float = TOL_SYM, name: str = "matrix") -> np.ndarray:
    """Return `M` as a float array or raise `NotSymplecticError`."""
    M = _square_even(M)
    defect = symplectic_defect(M)
    if defect > tol:
        raise NotSymplecticError(f"`{name}` is not symplectic", defect=defect, tolerance=tol)
    return M


def scaled_tolerance(tol: float, M: np.ndarray) -> float:
    """Symplectic tolerance for a matrix with large entries; the defect is quadratic in M."""
    return tol * max(1.0, float(np.max(np.abs(M)))) ** 2


def symplectic_inverse(M: np.ndarray) -> np.ndarray:
    """Inverse of a symplectic matrix, `-J M^T J`."""
    J = symplectic_form(M.shape[0] // 2)
    return -J @ M.T @ J


def rotation(theta: float) -> np.ndarray:
    """`exp(theta * s3)`"""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def squeeze(r: float) -> np.ndarray:
    """`exp(r * s1)`"""
    return np.diag([math.exp(r), math.exp(-r)])


def generator_coordinates(s: np.ndarray) -> Tuple[Exponent, float]:
    """
    Coordinates of a 2x2 matrix on (s1, s2, s3) and the residual left outside their span.
    """
    s = np.asarray(s, dtype=float)
    alpha = 0.5 * (s[0, 0] - s[1, 1])
    beta = 0.5 * (s[0, 1] + s[1, 0])
    gamma = 0.5 * (s[1, 0] - s[0, 1])
    residual = float(np.max(np.abs(s - (alpha * S1 + beta * S2 + gamma * S3))))
    return (float(alpha), float(beta), float(gamma)), residual


def sp2_exp(alpha: float, beta: float, gamma: float) -> np.ndarray:
    """
    Exponential of `alpha*s1 + beta*s2 + gamma*s3`

    The exponent X satisfies X^2 = delta * 1 with delta = alpha^2 + beta^2 - gamma^2,
    so exp(X) = c(delta) * 1 + s(delta) * X with hyperbolic, trigonometric or
    series coefficients.

    >>> sp2_exp(0.0, 0.0, 0.7)
    array([[ 0.76484219, -0.64421769],
           [ 0.64421769,  0.76484219]])
    """
    X = alpha * S1 + beta * S2 + gamma * S3
    delta = alpha * alpha + beta * beta - gamma * gamma
    if abs(delta) < _SERIES_THRESHOLD:
        c = 1.0 + delta / 2.0 + delta * delta / 24.0
        s = 1.0 + delta / 6.0 + delta * delta / 120.0
    elif delta > 0:
        root = math.sqrt(delta)
        c = math.cosh(root)
        s = math.sinh(root) / root
    else:
        root = math.sqrt(-delta)
        c = math.cos(root)
        s = math.sin(root) / root
    return c * np.eye(2) + s * X


def _principal_log(S: np.ndarray) -> Exponent:
    half_trace = 0.5 * float(np.trace(S))
    if half_trace >= 1.0:
        u = math.acosh(half_trace)
        factor = u / math.sinh(u) if u > _SMALL_ANGLE else 1.0 - u * u / 6.0
    else:
        u = math.acos(max(-1.0, half_trace))
        factor = u / math.sin(u) if u > _SMALL_ANGLE else 1.0 + u * u / 6.0
    X = (S - half_trace * np.eye(2)) * factor
    exponent, _ = generator_coordinates(X)
    return exponent


def sp2_log(S: np.ndarray, tol: float = TOL_SYM) -> Sp2Logarithm:
    """
    Logarithm of a 2x2 symplectic matrix

    Matrices with trace <= -2 have no real logarithm. They are split as a
    quarter-turn rotation times a matrix with non-negative trace.

    Args:
        S (np.ndarray): 2x2 symplectic matrix
        tol (float, optional): symplectic tolerance. Defaults to `TOL_SYM`.

    Raises:
        DimensionError: `S` is not 2x2
        NotSymplecticError: `S` is not symplectic

    Returns:
        Sp2Logarithm: one or two exponent triples
    """
    S = check_symplectic(S, tol, name="S")
    if S.shape != (2, 2):
        raise DimensionError("sp2_log expects a 2x2 matrix", shape=S.shape)

    if np.trace(S) > -2.0 + _NEGATIVE_TRACE_MARGIN:
        return Sp2Logarithm(factors=[_principal_log(S)])

    # trace(R(-pi/2) S) = c - b, trace(R(pi/2) S) = b - c
    if S[1, 0] - S[0, 1] >= 0.0:
        quarter = math.pi / 2
    else:
        quarter = -math.pi / 2
    remainder = rotation(-quarter) @ S
    logger.debug(f"Negative trace branch, splitting off rotation {quarter:+.3f}")
    return Sp2Logarithm(factors=[(0.0, 0.0, quarter), _principal_log(remainder)])


def wrap_angle(theta: float) -> float:
    """Map an angle to (-pi, pi]."""
    wrapped = math.remainder(theta, 2 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2 * math.pi
    return wrapped


def euler_decompose(S: np.ndarray, tol: float = TOL_SYM) -> Tuple[float, float, float]:
    """
    Rotation-squeeze-rotation form `S = R(theta1) diag(e^r, e^-r) R(theta2)`

    The representative is canonical: r >= 0, theta1 in (-pi/2, pi/2] when
    r > 0 (both angles may be shifted by pi otherwise), theta2 = 0 when r = 0.

    Args:
        S (np.ndarray): 2x2 symplectic matrix
        tol (float, optional): symplectic tolerance. Defaults to `TOL_SYM`.

    Returns:
        Tuple[float, float, float]: (theta1, r, theta2)
    """
    S = check_symplectic(S, tol, name="S")
    if S.shape != (2, 2):
        raise DimensionError("euler_decompose expects a 2x2 matrix", shape=S.shape)

    U, sigma, Vt = np.linalg.svd(S)
    r = math.log(sigma[0])
    if r < 1e-12:
        return wrap_angle(math.atan2(S[1, 0], S[0, 0])), 0.0, 0.0

    if np.linalg.det(U) < 0:
        flip = np.diag([1.0, -1.0])
        U = U @ flip
        Vt = flip @ Vt
    theta1 = math.atan2(U[1, 0], U[0, 0])
    theta2 = math.atan2(Vt[1, 0], Vt[0, 0])
    if not -math.pi / 2 < theta1 <= math.pi / 2:
        theta1 += math.pi
        theta2 += math.pi
    return wrap_angle(theta1), r, wrap_angle(theta2)
