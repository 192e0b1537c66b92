"""
Filters Module

Builds the C^kappa needlet filter h from the polynomial
p(t) = sum_{k=kappa+1}^{2kappa+2} a_k (1-t)^k and the frame filter H derived
from it.

    h(t) = p(t-1)                   on [1, 2]
    h(t) = sqrt(1 - p(2t-1)^2)      on [1/2, 1]
    h(t) = 0                        elsewhere

    H(t) = 1 on [0, 1), h(t)^2 on [1, 2], 0 beyond
"""

import math
import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Tuple, Union

import numpy as np
import pandas as pd
import sympy

from src.errors import DomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

DEFAULT_KAPPA = 5
MAX_KAPPA = 12


def _as_output(values: np.ndarray, scalar: bool) -> ArrayLike:
    return float(values) if scalar else values


@dataclass(frozen=True)
class NeedletFilter:
    """
    Needlet filter h of smoothness kappa.

    Attributes:
        kappa: Smoothness order
        coefficients: Exact a_{kappa+1}, ..., a_{2kappa+2}
    """

    kappa: int
    coefficients: Tuple[Fraction, ...]

    @property
    def exponents(self) -> range:
        return range(self.kappa + 1, 2 * self.kappa + 3)

    @cached_property
    def _binomials(self) -> np.ndarray:
        degree = 2 * self.kappa + 2
        return np.array([math.comb(degree, i) for i in range(degree + 1)], dtype=float)

    def _bernstein_split(self, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        p(t) and 1 - p(t) as sums of non-negative Bernstein terms.

        With u = 1 - t and N = 2kappa+2, p = sum_{i > kappa} C(N,i) u^i t^(N-i)
        and 1 - p is the sum over i <= kappa. On [0, 1] no term cancels.
        """
        v = np.asarray(t, dtype=float)
        u = 1.0 - v
        degree = 2 * self.kappa + 2
        i = np.arange(degree + 1).reshape((-1,) + (1,) * v.ndim)
        binomials = self._binomials.reshape(i.shape)
        terms = binomials * u ** i * v ** (degree - i)
        return terms[self.kappa + 1:].sum(axis=0), terms[:self.kappa + 1].sum(axis=0)

    def p(self, t: ArrayLike) -> ArrayLike:
        """Evaluate p(t), intended for t in [0, 1]."""
        scalar = np.ndim(t) == 0
        return _as_output(self._bernstein_split(t)[0], scalar)

    def h(self, t: ArrayLike) -> ArrayLike:
        """Evaluate the needlet filter h(t) for t >= 0."""
        scalar = np.ndim(t) == 0
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros_like(t_arr)

        upper = (t_arr >= 1.0) & (t_arr <= 2.0)
        lower = (t_arr >= 0.5) & (t_arr < 1.0)
        out[upper] = np.minimum(self.p(t_arr[upper] - 1.0), 1.0)
        p_low, q_low = self._bernstein_split(2.0 * t_arr[lower] - 1.0)
        # 1 - p^2 = (1 - p)(1 + p); clamp absorbs roundoff near t = 1/2
        out[lower] = np.sqrt(np.clip(q_low * (1.0 + p_low), 0.0, 1.0))

        return _as_output(out[0] if scalar else out.reshape(np.shape(t)), scalar)

    def h_squared(self, t: ArrayLike) -> ArrayLike:
        values = self.h(t)
        return values * values

    __call__ = h


@dataclass(frozen=True)
class FrameFilter:
    """Frame filter H built on a needlet filter."""

    base: NeedletFilter

    def __call__(self, t: ArrayLike) -> ArrayLike:
        scalar = np.ndim(t) == 0
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.where(t_arr < 1.0, 1.0, self.base.h_squared(t_arr))
        out = np.where(t_arr > 2.0, 0.0, out)
        return _as_output(out[0] if scalar else out.reshape(np.shape(t)), scalar)

    @property
    def kappa(self) -> int:
        return self.base.kappa


@lru_cache(maxsize=None)
def build_needlet_filter(kappa: int = DEFAULT_KAPPA) -> NeedletFilter:
    """
    Solve for the polynomial coefficients of the needlet filter.

    The (kappa+2) x (kappa+2) system imposes p(0) = 1 and p^(i)(0) = 0 for
    1 <= i <= kappa+1; it is solved in exact rational arithmetic.

    Args:
        kappa: Smoothness order, 1 <= kappa <= 12

    Returns:
        NeedletFilter with exact coefficients

    Raises:
        DomainError: If kappa is outside [1, 12]
        ArithmeticError: If the linear system is singular
    """
    if not 1 <= kappa <= MAX_KAPPA:
        raise DomainError(f"kappa must be in [1, {MAX_KAPPA}], got {kappa}")

    exponents = list(range(kappa + 1, 2 * kappa + 3))
    # d^i/dt^i (1-t)^k at t=0 is (-1)^i k(k-1)...(k-i+1); the sign drops out
    rows = [[1] * len(exponents)]
    rows += [[sympy.ff(k, i) for k in exponents] for i in range(1, kappa + 2)]
    system = sympy.Matrix(rows)
    rhs = sympy.Matrix([1] + [0] * (kappa + 1))

    if system.det() == 0:
        raise ArithmeticError(f"Needlet filter system for kappa={kappa} is singular")

    solution = system.LUsolve(rhs)
    coefficients = tuple(Fraction(int(a.p), int(a.q)) for a in solution)

    if sum(coefficients) != 1:
        raise ArithmeticError(f"Needlet filter for kappa={kappa} violates p(0) = 1")

    logger.debug(f"Needlet filter kappa={kappa}: a = {[str(a) for a in coefficients]}")
    return NeedletFilter(kappa=kappa, coefficients=coefficients)


def build_frame_filter(kappa: int = DEFAULT_KAPPA) -> FrameFilter:
    return FrameFilter(base=build_needlet_filter(kappa))


def eval_h(needlet_filter: NeedletFilter, t: ArrayLike) -> ArrayLike:
    """Needlet filter value h(t)."""
    return needlet_filter.h(t)


def eval_H(frame_filter: FrameFilter, t: ArrayLike) -> ArrayLike:
    """Frame filter value H(t)."""
    return frame_filter(t)


def sample_filters(needlet_filter: NeedletFilter, t: np.ndarray) -> pd.DataFrame:
    """
    Tabulate h and H on the given abscissae.

    Args:
        needlet_filter: Filter to sample
        t: Non-negative sample points

    Returns:
        DataFrame with columns t, h, H
    """
    t = np.asarray(t, dtype=float)
    frame_filter = FrameFilter(base=needlet_filter)
    return pd.DataFrame({
        't': t,
        'h': needlet_filter.h(t),
        'H': frame_filter(t),
    })
