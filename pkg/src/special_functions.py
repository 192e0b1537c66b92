"""
Special Functions Module

Orthogonal-polynomial and quadrature primitives used by every other module:
dimensions of spherical harmonic spaces, normalised Gegenbauer (Legendre)
polynomials, Gauss-Legendre rules and a real spherical harmonic basis on S².
"""

import math
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Tuple, Union

import numpy as np

from src.errors import DomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

INT64_MAX = 2**63 - 1

# Newton iteration controls for Gauss-Legendre nodes
GL_NEWTON_TOL = 1e-15
GL_MAX_ITERATIONS = 100


def dim_harmonic(d: int, ell: int) -> int:
    """
    Dimension Z(d, ell) of the space of degree-ell spherical harmonics on S^d.

    Computed as (2ell+d-1) * C(ell+d-2, ell) / (d-1) in exact integer arithmetic.

    Args:
        d: Sphere dimension (>= 2)
        ell: Polynomial degree (>= 0)

    Returns:
        Z(d, ell) as a Python int

    Raises:
        DomainError: If d < 2 or ell < 0
        OverflowError: If the value leaves the signed 64-bit range
    """
    if d < 2 or ell < 0:
        raise DomainError(f"dim_harmonic needs d >= 2 and ell >= 0, got d={d}, ell={ell}")

    value = (2 * ell + d - 1) * math.comb(ell + d - 2, ell) // (d - 1)
    if value > INT64_MAX:
        raise OverflowError(f"Z({d}, {ell}) exceeds the 64-bit range; degree too large")
    return value


def _gegenbauer_lambda(d: int) -> float:
    if d < 2:
        raise DomainError(f"Sphere dimension must be >= 2, got {d}")
    return (d - 1) / 2.0


def _next_gegenbauer(ell: int, lam: float, t: np.ndarray,
                     p_cur: np.ndarray, p_prev: np.ndarray) -> np.ndarray:
    # Normalised recurrence: P_{l+1} = (2(l+lam) t P_l - l P_{l-1}) / (l + 2 lam)
    return (2.0 * (ell + lam) * t * p_cur - ell * p_prev) / (ell + 2.0 * lam)


def gegenbauer_norm(d: int, ell: int, t: ArrayLike) -> ArrayLike:
    """
    Normalised Gegenbauer polynomial P_ell^(d)(t) with P_ell^(d)(1) = 1.

    For d = 2 this is the Legendre polynomial. The three-term recurrence is
    run on the normalised polynomials so every intermediate value stays in
    [-1, 1] scale.

    Args:
        d: Sphere dimension (>= 2)
        ell: Degree (>= 0)
        t: Scalar or array of arguments in [-1, 1]

    Returns:
        Values with the shape of t
    """
    if ell < 0:
        raise DomainError(f"Degree must be >= 0, got {ell}")

    lam = _gegenbauer_lambda(d)
    t_arr = np.asarray(t, dtype=float)
    p_prev = np.ones_like(t_arr)
    if ell == 0:
        return p_prev if t_arr.ndim else float(p_prev)

    p_cur = t_arr.copy()
    for n in range(1, ell):
        p_prev, p_cur = p_cur, _next_gegenbauer(n, lam, t_arr, p_cur, p_prev)

    return p_cur if t_arr.ndim else float(p_cur)


def gegenbauer_table(d: int, max_degree: int, t: ArrayLike) -> np.ndarray:
    """
    Stack of P_ell^(d)(t) for ell = 0..max_degree.

    Args:
        d: Sphere dimension
        max_degree: Highest degree (>= 0)
        t: Arguments in [-1, 1]

    Returns:
        Array of shape (max_degree + 1, *t.shape)
    """
    lam = _gegenbauer_lambda(d)
    t_arr = np.asarray(t, dtype=float)
    table = np.empty((max_degree + 1,) + t_arr.shape)
    table[0] = 1.0
    if max_degree >= 1:
        table[1] = t_arr
    for n in range(1, max_degree):
        table[n + 1] = _next_gegenbauer(n, lam, t_arr, table[n], table[n - 1])
    return table


def gegenbauer_series(d: int, weights: np.ndarray, t: ArrayLike) -> np.ndarray:
    """
    Evaluate sum_ell weights[ell] * P_ell^(d)(t).

    Terms are accumulated in order of increasing degree, holding only three
    polynomial arrays at a time.

    Args:
        d: Sphere dimension
        weights: Coefficients for ell = 0..len(weights)-1
        t: Arguments in [-1, 1]

    Returns:
        Series values with the shape of t
    """
    lam = _gegenbauer_lambda(d)
    weights = np.asarray(weights, dtype=float)
    t_arr = np.asarray(t, dtype=float)

    total = np.full(t_arr.shape, weights[0] if weights.size else 0.0)
    if weights.size <= 1:
        return total

    p_prev = np.ones_like(t_arr)
    p_cur = t_arr.copy()
    for n in range(1, weights.size):
        if weights[n] != 0.0:
            total += weights[n] * p_cur
        if n + 1 < weights.size:
            p_prev, p_cur = p_cur, _next_gegenbauer(n, lam, t_arr, p_cur, p_prev)
    return total


@dataclass(frozen=True, eq=False)
class GaussLegendreRule:
    """Gauss-Legendre rule on [-1, 1] with unit weight function."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    def integrate(self, values: np.ndarray) -> float:
        """Apply the rule to function values sampled at the nodes."""
        return float(np.dot(self.weights, values))

    def mapped(self, a: float, b: float) -> Tuple[np.ndarray, np.ndarray]:
        """Nodes and weights affinely mapped to [a, b]."""
        half = 0.5 * (b - a)
        return half * self.nodes + 0.5 * (a + b), half * self.weights


def _legendre_pair(n: int, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Return (P_n(x), P_{n-1}(x))."""
    p_prev = np.ones_like(x)
    p_cur = x.copy()
    for k in range(1, n):
        p_prev, p_cur = p_cur, ((2 * k + 1) * x * p_cur - k * p_prev) / (k + 1)
    return p_cur, p_prev


@lru_cache(maxsize=256)
def gauss_legendre(n: int) -> GaussLegendreRule:
    """
    n-point Gauss-Legendre rule, exact for polynomials of degree <= 2n-1.

    Nodes are the roots of P_n found by Newton iteration from the standard
    cosine initial guesses; weights use 2 / ((1-x^2) P_n'(x)^2).

    Args:
        n: Number of nodes (>= 1)

    Returns:
        GaussLegendreRule with strictly increasing, symmetric nodes

    Raises:
        DomainError: If n < 1
        RuntimeError: If Newton iteration does not converge
    """
    if n < 1:
        raise DomainError(f"Gauss-Legendre rule needs n >= 1, got {n}")

    i = np.arange(n)
    x = np.cos(np.pi * (i + 0.75) / (n + 0.5))

    converged = False
    for _ in range(GL_MAX_ITERATIONS):
        p_n, p_nm1 = _legendre_pair(n, x)
        dp = n * (x * p_n - p_nm1) / (x * x - 1.0)
        delta = p_n / dp
        x = x - delta
        if np.max(np.abs(delta)) <= GL_NEWTON_TOL:
            converged = True
            break

    if not converged:
        raise RuntimeError(f"Gauss-Legendre Newton iteration did not converge for n={n}")

    p_n, p_nm1 = _legendre_pair(n, x)
    dp = n * (x * p_n - p_nm1) / (x * x - 1.0)
    weights = 2.0 / ((1.0 - x * x) * dp * dp)

    order = np.argsort(x)
    x, weights = x[order], weights[order]

    # enforce exact symmetry about 0
    x = 0.5 * (x - x[::-1])
    weights = 0.5 * (weights + weights[::-1])

    x.setflags(write=False)
    weights.setflags(write=False)
    logger.debug(f"Gauss-Legendre rule with {n} nodes built")
    return GaussLegendreRule(nodes=x, weights=weights)


def harmonic_index(ell: int, m: int) -> int:
    """Column of Y_{ell,m} in real_spherical_harmonics output (m = -ell..ell)."""
    if abs(m) > ell:
        raise DomainError(f"|m| must not exceed ell, got ell={ell}, m={m}")
    return ell * ell + ell + m


def iter_real_harmonics(degree: int, points: np.ndarray) -> Iterator[Tuple[int, int, np.ndarray]]:
    """
    Yield (ell, m, Y_{ell,m}(points)) for all ell <= degree.

    The basis is real and orthonormal for the normalised surface measure
    (Y_00 = 1). It uses fully normalised associated Legendre functions with
    the sin^m(theta) factor carried by Re/Im((x + iy)^m), so no angles are
    formed and the poles need no special case. Negative m is the sine part.

    Args:
        degree: Highest degree
        points: Unit vectors, shape (N, 3)
    """
    pts = np.asarray(points, dtype=float)
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    xy = x + 1j * y

    q_mm = 1.0
    xy_power = np.ones_like(xy)
    for m in range(0, degree + 1):
        if m == 1:
            q_mm = math.sqrt(3.0)
        elif m >= 2:
            q_mm *= math.sqrt((2 * m + 1) / (2 * m))
        if m >= 1:
            xy_power = xy_power * xy

        cos_part = xy_power.real
        sin_part = xy_power.imag

        q_prev = np.zeros_like(z)
        q_cur = np.full_like(z, q_mm)
        for ell in range(m, degree + 1):
            if ell > m:
                a = math.sqrt((4 * ell * ell - 1) / (ell * ell - m * m))
                b = math.sqrt(((ell - 1) ** 2 - m * m) / (4 * (ell - 1) ** 2 - 1))
                q_prev, q_cur = q_cur, a * (z * q_cur - b * q_prev)
            if m == 0:
                yield ell, 0, q_cur
            else:
                yield ell, m, q_cur * cos_part
                yield ell, -m, q_cur * sin_part


def real_spherical_harmonics(degree: int, points: np.ndarray) -> np.ndarray:
    """
    Real orthonormal spherical harmonics of degree <= `degree` at points.

    Args:
        degree: Highest degree (>= 0)
        points: Unit vectors, shape (N, 3)

    Returns:
        Array of shape (N, (degree+1)^2); column harmonic_index(ell, m)
    """
    if degree < 0:
        raise DomainError(f"Degree must be >= 0, got {degree}")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.empty((pts.shape[0], (degree + 1) ** 2))
    for ell, m, values in iter_real_harmonics(degree, pts):
        out[:, harmonic_index(ell, m)] = values
    return out
