"""
Test Functions Module

Wendland radial basis functions, the six-centre test function f_k built from
them, its Fourier-Laplace coefficients and the two L2-error measures used by
the convergence study.
"""

import math
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np
import pandas as pd

from src.errors import DomainError
from src.filters import FrameFilter
from src.quadrature import QuadratureRule
from src.special_functions import gauss_legendre, gegenbauer_series, gegenbauer_table

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

MAX_WENDLAND_INDEX = 4
DEFAULT_TRUNCATION = 500
# extra Gauss-Legendre nodes over the degree bound n >= ell + 8
DEFAULT_GL_MARGIN = 16
# smallest accepted rule is ell/2 + MIN_GL_NODES nodes
MIN_GL_NODES = 25

# (power of (1-r)_+, polynomial factor in ascending powers of r, divisor)
_WENDLAND_TABLE = {
    0: (2, (1,), 1),
    1: (4, (1, 4), 1),
    2: (6, (3, 18, 35), 3),
    3: (8, (1, 8, 25, 32), 1),
    4: (10, (5, 50, 210, 450, 429), 5),
}

WENDLAND_CENTERS = np.array([
    [1.0, 0.0, 0.0],
    [-1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, -1.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.0, 0.0, -1.0],
])
WENDLAND_CENTERS.setflags(write=False)


def _check_index(k: int) -> None:
    if not 0 <= k <= MAX_WENDLAND_INDEX:
        raise DomainError(f"Wendland index must be in 0..{MAX_WENDLAND_INDEX}, got {k}")


def wendland_delta(k: int, exact: bool = True) -> float:
    """
    Scale delta_k = (3k+3) Gamma(k+1/2) / (2 Gamma(k+1)).

    With exact=True the half-integer gamma is expanded as
    (2k)! sqrt(pi) / (4^k k!); otherwise log-gamma is used.
    """
    if k < 0:
        raise DomainError(f"Wendland index must be >= 0, got {k}")
    if exact:
        ratio = math.factorial(2 * k) / (4 ** k * math.factorial(k) ** 2)
        return (3 * k + 3) * ratio * math.sqrt(math.pi) / 2.0
    return (3 * k + 3) * math.exp(math.lgamma(k + 0.5) - math.lgamma(k + 1)) / 2.0


def wendland_eval(k: int, r: ArrayLike, normalized: bool = False) -> ArrayLike:
    """
    Wendland function phi_k(r), or phi_k(r / delta_k) when normalized.

    Args:
        k: Smoothness index 0..4
        r: Non-negative radius (scalar or array)
        normalized: Use the equal-area scaling

    Returns:
        Values with the shape of r
    """
    _check_index(k)
    scalar = np.ndim(r) == 0
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise DomainError("Wendland functions need r >= 0")
    if normalized:
        r_arr = r_arr / wendland_delta(k)

    power, factor, divisor = _WENDLAND_TABLE[k]
    poly = np.polynomial.polynomial.polyval(r_arr, factor)
    values = np.maximum(1.0 - r_arr, 0.0) ** power * poly / divisor
    return float(values) if scalar else values


@dataclass(frozen=True)
class WendlandTestFunction:
    """
    f_k(x) = sum_i phi~_k(|z_i - x|) over the six centres +-e_1, +-e_2, +-e_3.

    Instances are vectorised callables: (M, 3) -> (M,).
    """

    k: int
    delta: float = field(init=False)

    def __post_init__(self):
        _check_index(self.k)
        object.__setattr__(self, 'delta', wendland_delta(self.k))

    @property
    def centers(self) -> np.ndarray:
        return WENDLAND_CENTERS

    def __call__(self, x: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(x, dtype=float))
        # |z - x|^2 = 2 - 2 z.x on the unit sphere
        chord_sq = np.maximum(2.0 - 2.0 * points @ WENDLAND_CENTERS.T, 0.0)
        values = wendland_eval(self.k, np.sqrt(chord_sq), normalized=True)
        return values.sum(axis=1)


def test_function_eval(k: int, x: np.ndarray) -> Union[float, np.ndarray]:
    """f_k at one unit vector (returns float) or at an (M, 3) array."""
    x = np.asarray(x, dtype=float)
    values = WendlandTestFunction(k)(x)
    return float(values[0]) if x.ndim == 1 else values


# Stop pytest from collecting the evaluator above as a test
test_function_eval.__test__ = False


def _chord_rule(n_gl: int):
    # phi~ is supported on [0, delta_k] and delta_k > 2 for every k, so the
    # chord integral runs over [0, 2] with a polynomial integrand
    return gauss_legendre(n_gl).mapped(0.0, 2.0)


def fourier_coeff(k: int, ell: int, n_gl: Optional[int] = None) -> float:
    """
    Fourier-Laplace coefficient (1/2) int_{-1}^{1} phi~_k(sqrt(2-2t)) P_ell(t) dt.

    The integral is taken in the chord variable r = sqrt(2-2t), where it reads
    (1/2) int_0^2 phi~_k(r) P_ell(1 - r^2/2) r dr.

    Args:
        k: Wendland index
        ell: Degree (>= 0)
        n_gl: Gauss-Legendre node count (default max(ell + 16, ceil(ell/2) + 25))

    Raises:
        DomainError: If n_gl < ell/2 + 25
    """
    _check_index(k)
    if ell < 0:
        raise DomainError(f"Degree must be >= 0, got {ell}")
    minimum = math.ceil(ell / 2) + MIN_GL_NODES
    n_gl = max(ell + DEFAULT_GL_MARGIN, minimum) if n_gl is None else n_gl
    if n_gl < minimum:
        raise DomainError(f"n_gl={n_gl} too small for degree {ell}; need >= {minimum}")

    r, w = _chord_rule(n_gl)
    legendre = gegenbauer_table(2, ell, 1.0 - 0.5 * r * r)[ell]
    return 0.5 * float(np.dot(w, wendland_eval(k, r, normalized=True) * legendre * r))


@dataclass(frozen=True, eq=False)
class FourierCoeffTable:
    """Coefficients phi^_ell for ell = 0..L_trunc."""

    k: int
    coeffs: np.ndarray
    L_trunc: int

    @property
    def degrees(self) -> np.ndarray:
        return np.arange(self.L_trunc + 1)

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame({'ell': self.degrees, 'coeff': self.coeffs})


def _compute_coeff_table(k: int, L_trunc: int) -> np.ndarray:
    r, w = _chord_rule(L_trunc + DEFAULT_GL_MARGIN)
    weighted = 0.5 * w * wendland_eval(k, r, normalized=True) * r
    return gegenbauer_table(2, L_trunc, 1.0 - 0.5 * r * r) @ weighted


def fourier_coeff_table(k: int, L_trunc: int = DEFAULT_TRUNCATION,
                        cache_dir: Optional[Union[str, Path]] = None) -> FourierCoeffTable:
    """
    All coefficients up to L_trunc from one Gauss-Legendre rule.

    With cache_dir set, the table is read from (or written to) the CSV file
    fourier_k<k>_L<L_trunc>.csv with columns ell, coeff.
    """
    _check_index(k)
    if L_trunc < 0:
        raise DomainError(f"Truncation degree must be >= 0, got {L_trunc}")

    cache_path = None
    if cache_dir is not None:
        cache_path = Path(cache_dir) / f"fourier_k{k}_L{L_trunc}.csv"
        if cache_path.exists():
            try:
                cached = pd.read_csv(cache_path, float_precision='round_trip')
                if list(cached['ell']) == list(range(L_trunc + 1)):
                    logger.debug(f"Fourier coefficients for k={k} read from {cache_path}")
                    return FourierCoeffTable(k=k, coeffs=cached['coeff'].to_numpy(float),
                                             L_trunc=L_trunc)
                logger.warning(f"⚠️  Stale Fourier cache {cache_path}; recomputing")
            except Exception as e:
                logger.warning(f"⚠️  Could not read Fourier cache {cache_path}: {e}")

    table = FourierCoeffTable(k=k, coeffs=_compute_coeff_table(k, L_trunc), L_trunc=L_trunc)
    logger.info(f"Fourier coefficients for k={k} computed up to degree {L_trunc}")

    if cache_path is not None:
        cache_path.parent.mkdir(parents=True, exist_ok=True)
        table.to_dataframe().to_csv(cache_path, index=False, float_format='%.17g')
    return table


def fourier_synthesis(table: FourierCoeffTable, points: np.ndarray) -> np.ndarray:
    """Truncated series sum_i sum_ell phi^_ell (2ell+1) P_ell(z_i . x)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    weights = table.coeffs * (2 * table.degrees + 1)
    return gegenbauer_series(2, weights, points @ WENDLAND_CENTERS.T).sum(axis=1)


def center_pair_sums(L_trunc: int) -> np.ndarray:
    """
    sum_{i,j} (2ell+1) P_ell(z_i . z_j) for ell = 0..L_trunc.

    Among the 36 centre pairs, 6 have z_i.z_j = 1, 6 have -1 and 24 have 0.
    """
    ells = np.arange(L_trunc + 1)
    p_zero = gegenbauer_table(2, L_trunc, 0.0)
    return (2 * ells + 1) * (6.0 + 6.0 * (-1.0) ** ells + 24.0 * p_zero)


def squared_norm(table: FourierCoeffTable) -> float:
    """||f_k||^2 in the normalised measure, from the truncated series."""
    return float(np.sum(table.coeffs ** 2 * center_pair_sums(table.L_trunc)))


def semidiscrete_l2_error(k: int, J: int, frame_filter: FrameFilter,
                          L_trunc: int = DEFAULT_TRUNCATION, strict: bool = True,
                          table: Optional[FourierCoeffTable] = None) -> float:
    """
    L2 error of the semidiscrete order-J needlet approximation of f_k.

    sqrt( sum_ell (1 - H(ell / 2^(J-1)))^2 |phi^_ell|^2 sum_{i,j} (2ell+1) P_ell(z_i . z_j) )

    The sum starts above 2^(J-1), where H = 1, and stops at L_trunc.

    Args:
        k: Wendland index
        J: Order (>= 0)
        frame_filter: H
        L_trunc: Truncation degree
        strict: Raise instead of returning 0 when the sum would be empty
        table: Precomputed coefficients (at least L_trunc degrees)

    Raises:
        DomainError: If strict and L_trunc < 2^(J-1) + 1
    """
    _check_index(k)
    if J < 0:
        raise DomainError(f"Order must be >= 0, got {J}")
    scale = 2.0 ** (J - 1)
    start = math.floor(scale) + 1
    if L_trunc < start:
        if strict:
            raise DomainError(f"L_trunc={L_trunc} below the first contributing degree {start} for J={J}")
        logger.warning(f"⚠️  Order {J} is below the truncation floor L={L_trunc}; reporting 0")
        return 0.0

    if table is None or table.L_trunc < L_trunc or table.k != k:
        table = fourier_coeff_table(k, L_trunc)

    ells = np.arange(start, L_trunc + 1)
    damping = (1.0 - frame_filter(ells / scale)) ** 2
    pair_sums = center_pair_sums(L_trunc)[start:]
    total = np.sum(damping * table.coeffs[start:L_trunc + 1] ** 2 * pair_sums)
    return math.sqrt(max(float(total), 0.0))


def discrete_l2_error(approx_values_fn: Union[Callable[[np.ndarray], np.ndarray], np.ndarray],
                      f: Callable[[np.ndarray], np.ndarray], eval_rule: QuadratureRule) -> float:
    """
    sqrt( sum_i w_i (approx(x_i) - f(x_i))^2 ) over an evaluation rule.

    approx_values_fn may also be the approximation already sampled at the
    rule's nodes.
    """
    if callable(approx_values_fn):
        approx = np.asarray(approx_values_fn(eval_rule.nodes), dtype=float)
    else:
        approx = np.asarray(approx_values_fn, dtype=float)
    diff = approx - np.asarray(f(eval_rule.nodes), dtype=float)
    return math.sqrt(float(np.dot(eval_rule.weights, diff * diff)))


def convergence_slope(J_values: Sequence[int], errors: Sequence[float]) -> float:
    """
    Least-squares slope of log2(error) against J.

    Non-positive errors are left out of the fit; NaN when fewer than two
    points remain.
    """
    J_arr = np.asarray(J_values, dtype=float)
    err = np.asarray(errors, dtype=float)
    keep = err > 0
    if keep.sum() < 2:
        return float('nan')
    slope, _ = np.polyfit(J_arr[keep], np.log2(err[keep]), 1)
    return float(slope)
