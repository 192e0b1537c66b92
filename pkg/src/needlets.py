"""
Needlets Module

Needlet frames on S² and the fully discrete needlet approximation.

A level-j needlet centred at node x_jk of the needlet quadrature Q_j is

    psi_jk(x) = sqrt(w_jk) * v_{2^(j-1), h}(x . x_jk)

where v_{T,g}(c) = sum_ell g(ell/T) Z(2,ell) P_ell(c) is the filtered kernel
(identically 1 for T < 1). Coefficients use a discretization rule in place of
the inner-product integral, and the resulting approximation coincides with
filtered hyperinterpolation using the frame filter H at T = 2^(J-1).
"""

import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.errors import ConfigurationError, DomainError
from src.filters import FrameFilter, NeedletFilter
from src.quadrature import QuadratureRule, discretization_degree
from src.special_functions import dim_harmonic, gegenbauer_series

logger = logging.getLogger(__name__)

PointFunction = Callable[[np.ndarray], np.ndarray]

DEFAULT_CHUNK_SIZE = 512


@dataclass(frozen=True, eq=False)
class FilteredKernel:
    """
    Filtered kernel v_{T,g} on S^d.

    Attributes:
        filter_fn: Vectorised filter g on [0, inf), supported in [0, 2]
        T: Scale (>= 0)
        d: Sphere dimension
    """

    filter_fn: Callable[[np.ndarray], np.ndarray]
    T: float
    d: int = 2

    @cached_property
    def max_degree(self) -> int:
        # filter support in [0, 2] truncates the sum at ceil(2T) - 1
        return 0 if self.T < 1 else math.ceil(2 * self.T) - 1

    @cached_property
    def legendre_weights(self) -> np.ndarray:
        """Coefficients g(ell/T) Z(d, ell) of the Legendre expansion."""
        if self.T < 1:
            return np.ones(1)
        ells = np.arange(self.max_degree + 1)
        dims = np.array([dim_harmonic(self.d, int(ell)) for ell in ells], dtype=float)
        return np.asarray(self.filter_fn(ells / self.T), dtype=float) * dims

    def __call__(self, c: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        scalar = np.ndim(c) == 0
        values = gegenbauer_series(self.d, self.legendre_weights, np.clip(c, -1.0, 1.0))
        return float(values) if scalar else values


def filtered_kernel(kernel: FilteredKernel, c: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Evaluate the filtered kernel at c = x . y."""
    return kernel(c)


def needlet_kernel(needlet_filter: NeedletFilter, j: int) -> FilteredKernel:
    """Kernel v_{2^(j-1), h} shared by all level-j needlets."""
    return FilteredKernel(needlet_filter.h, 2.0 ** (j - 1))


def level_kernel(needlet_filter: NeedletFilter, j: int) -> FilteredKernel:
    """Kernel v_{2^(j-1), h^2} reproduced by the level-j needlets."""
    return FilteredKernel(needlet_filter.h_squared, 2.0 ** (j - 1))


def frame_kernel(frame_filter: FrameFilter, J: int) -> FilteredKernel:
    """Kernel v_{2^(J-1), H} of the order-J approximation."""
    return FilteredKernel(frame_filter, 2.0 ** (J - 1))


def kernel_apply(kernel: FilteredKernel, rows: np.ndarray, cols: np.ndarray,
                 vector: np.ndarray, chunk_size: int = DEFAULT_CHUNK_SIZE,
                 workers: int = 1) -> np.ndarray:
    """
    out[i] = sum_c kernel(rows[i] . cols[c]) * vector[c]

    Rows are processed in blocks; with workers > 1 the blocks run on a thread
    pool. Each block writes its own slice of the output, so results do not
    depend on the number of workers.

    Args:
        kernel: Filtered kernel
        rows: Unit vectors, shape (R, 3)
        cols: Unit vectors, shape (C, 3)
        vector: Length-C weights
        chunk_size: Rows per block
        workers: Thread count

    Returns:
        Length-R array
    """
    rows = np.atleast_2d(rows)
    out = np.empty(rows.shape[0])
    blocks = [(start, min(start + chunk_size, rows.shape[0]))
              for start in range(0, rows.shape[0], chunk_size)]

    def work(block: Tuple[int, int]) -> None:
        start, stop = block
        gram = rows[start:stop] @ cols.T
        out[start:stop] = kernel(gram) @ vector

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, blocks))
    else:
        for block in blocks:
            work(block)
    return out


def kernel_matrix(kernel: FilteredKernel, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Dense matrix kernel(rows[i] . cols[c])."""
    return kernel(np.atleast_2d(rows) @ np.atleast_2d(cols).T)


@dataclass(frozen=True, eq=False)
class NeedletFrame:
    """
    Needlets of levels 0..J over certified needlet quadratures.

    Attributes:
        J: Order
        needlet_filter: Filter h
        quadratures: Q_0..Q_J, Q_j exact to degree 2^(j+1) - 1
    """

    J: int
    needlet_filter: NeedletFilter
    quadratures: Tuple[QuadratureRule, ...]

    @cached_property
    def kernels(self) -> Tuple[FilteredKernel, ...]:
        return tuple(needlet_kernel(self.needlet_filter, j) for j in range(self.J + 1))

    @property
    def frame_filter(self) -> FrameFilter:
        return FrameFilter(base=self.needlet_filter)

    @property
    def node_counts(self) -> List[int]:
        return [rule.size for rule in self.quadratures]

    def centers(self, j: int) -> np.ndarray:
        return self.quadratures[self.check_level(j)].nodes

    def scaled_weights(self, j: int) -> np.ndarray:
        """sqrt(w_jk) for all k."""
        return np.sqrt(self.quadratures[self.check_level(j)].weights)

    def check_level(self, j: int) -> int:
        if not 0 <= j <= self.J:
            raise DomainError(f"Level {j} outside 0..{self.J}")
        return j


def build_frame(J: int, needlet_filter: NeedletFilter,
                quadratures: Sequence[QuadratureRule]) -> NeedletFrame:
    """
    Assemble a needlet frame of order J.

    Args:
        J: Order (>= 0)
        needlet_filter: Filter h
        quadratures: Rules from needlet_quadrature_sequence

    Returns:
        NeedletFrame

    Raises:
        ConfigurationError: If a rule is missing or under-certified
    """
    if J < 0:
        raise DomainError(f"Needlet order must be >= 0, got {J}")
    if len(quadratures) != J + 1:
        raise ConfigurationError(f"Order {J} needs {J + 1} needlet quadratures, got {len(quadratures)}")

    for j, rule in enumerate(quadratures):
        required = 2 ** (j + 1) - 1
        if rule.exactness_degree < required:
            raise ConfigurationError(
                f"Needlet quadrature for level {j} is certified to degree "
                f"{rule.exactness_degree}, needs {required}"
            )

    frame = NeedletFrame(J=J, needlet_filter=needlet_filter, quadratures=tuple(quadratures))
    logger.info(f"Needlet frame of order {J} built: {sum(frame.node_counts)} needlets")
    return frame


def eval_needlet(frame: NeedletFrame, j: int, k: int, x: np.ndarray) -> Union[float, np.ndarray]:
    """
    Value of psi_jk at x (one unit vector or an (M, 3) array).

    Indices are 0-based: 0 <= k < N_j.
    """
    rule = frame.quadratures[frame.check_level(j)]
    if not 0 <= k < rule.size:
        raise DomainError(f"Needlet index {k} outside 0..{rule.size - 1} at level {j}")

    x = np.asarray(x, dtype=float)
    scale = math.sqrt(rule.weights[k])
    if j == 0:
        return scale if x.ndim == 1 else np.full(x.shape[0], scale)
    return scale * frame.kernels[j](x @ rule.nodes[k])


def needlet_profile(frame: NeedletFrame, j: int, theta: np.ndarray) -> pd.DataFrame:
    """
    Shape of a level-j needlet against geodesic distance from its centre.

    Returns:
        DataFrame with columns theta, kernel (v at cos theta) and relative
        (kernel divided by its peak value at theta = 0)
    """
    kernel = frame.kernels[frame.check_level(j)]
    theta = np.asarray(theta, dtype=float)
    values = kernel(np.cos(theta))
    peak = kernel(1.0)
    return pd.DataFrame({'theta': theta, 'kernel': values, 'relative': values / peak})


def frame_summary(frame: NeedletFrame) -> pd.DataFrame:
    """Per-level node counts and certified degrees."""
    rows = []
    for j, rule in enumerate(frame.quadratures):
        rows.append({
            'j': j,
            'nodes': rule.size,
            'exactness_degree': rule.exactness_degree,
            'required_degree': 2 ** (j + 1) - 1,
            'source': rule.path or rule.source,
        })
    return pd.DataFrame(rows)


@dataclass(eq=False)
class NeedletCoefficients:
    """
    Discrete needlet coefficients <f, psi_jk>_N.

    Attributes:
        levels: One array of length N_j per level
        frame: Frame the coefficients belong to
        rule: Discretization rule used for the inner products
    """

    levels: List[np.ndarray]
    frame: NeedletFrame
    rule: QuadratureRule

    @property
    def J(self) -> int:
        return len(self.levels) - 1

    def to_dataframe(self) -> pd.DataFrame:
        """Columns j, k, x, y, z, weight, coefficient."""
        parts = []
        for j, values in enumerate(self.levels):
            rule = self.frame.quadratures[j]
            parts.append(pd.DataFrame({
                'j': j,
                'k': np.arange(rule.size),
                'x': rule.nodes[:, 0],
                'y': rule.nodes[:, 1],
                'z': rule.nodes[:, 2],
                'weight': rule.weights,
                'coefficient': values,
            }))
        return pd.concat(parts, ignore_index=True)


def export_coefficients(coeffs: NeedletCoefficients, path: Union[str, Path]) -> str:
    """Write coefficients as CSV with 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    coeffs.to_dataframe().to_csv(path, index=False, float_format='%.17g')
    logger.info(f"Exported {sum(len(c) for c in coeffs.levels)} coefficients to {path}")
    return str(path)


def check_discretization(rule: QuadratureRule, J: int, allow_uncertified: bool) -> None:
    required = discretization_degree(J)
    if rule.exactness_degree >= required:
        return
    message = (f"Discretization rule is certified to degree {rule.exactness_degree}, "
               f"order {J} needs {required}")
    if not allow_uncertified:
        logger.error(message)
        raise ConfigurationError(message)
    logger.warning(f"⚠️  {message}; continuing uncertified")


def weighted_samples(f: PointFunction, rule: QuadratureRule) -> np.ndarray:
    """w_i f(x_i) over the rule; f is evaluated once per node."""
    values = np.asarray(f(rule.nodes), dtype=float)
    if values.shape != (rule.size,):
        raise DomainError(f"f must return one value per node, got shape {values.shape}")
    return rule.weights * values


def level_coefficients(frame: NeedletFrame, j: int, samples: np.ndarray, rule: QuadratureRule,
                       centers: Optional[np.ndarray] = None, chunk_size: int = DEFAULT_CHUNK_SIZE,
                       workers: int = 1) -> np.ndarray:
    """
    Coefficients of level j from pre-weighted samples w_i f(x_i).

    Args:
        centers: Optional indices restricting the needlets computed
    """
    nodes = frame.centers(j)
    scale = frame.scaled_weights(j)
    if centers is not None:
        nodes, scale = nodes[centers], scale[centers]
    return scale * kernel_apply(frame.kernels[j], nodes, rule.nodes, samples,
                                chunk_size=chunk_size, workers=workers)


def analyze(f: PointFunction, frame: NeedletFrame, Q_disc: QuadratureRule,
            allow_uncertified: bool = False, chunk_size: int = DEFAULT_CHUNK_SIZE,
            workers: int = 1) -> NeedletCoefficients:
    """
    Discrete needlet coefficients sum_i w_i f(x_i) psi_jk(x_i).

    Args:
        f: Vectorised function (M, 3) -> (M,)
        frame: Needlet frame of order J
        Q_disc: Discretization rule, exact to degree 3*2^(J-1) - 1
        allow_uncertified: Accept a rule of lower degree

    Returns:
        NeedletCoefficients

    Raises:
        ConfigurationError: If Q_disc is under-certified
    """
    check_discretization(Q_disc, frame.J, allow_uncertified)
    samples = weighted_samples(f, Q_disc)

    levels = []
    for j in range(frame.J + 1):
        levels.append(level_coefficients(frame, j, samples, Q_disc,
                                         chunk_size=chunk_size, workers=workers))
        logger.debug(f"Level {j}: {levels[-1].size} coefficients")

    logger.info(f"Analysis done: order {frame.J}, {Q_disc.size} discretization nodes")
    return NeedletCoefficients(levels=levels, frame=frame, rule=Q_disc)


def level_synthesis(frame: NeedletFrame, j: int, coefficients: np.ndarray, points: np.ndarray,
                    centers: Optional[np.ndarray] = None, chunk_size: int = DEFAULT_CHUNK_SIZE,
                    workers: int = 1) -> np.ndarray:
    """sum_k c_jk psi_jk(points), optionally over a subset of centres."""
    nodes = frame.centers(j)
    scale = frame.scaled_weights(j)
    if centers is not None:
        nodes, scale = nodes[centers], scale[centers]
    return kernel_apply(frame.kernels[j], points, nodes, scale * coefficients,
                        chunk_size=chunk_size, workers=workers)


def synthesize(coeffs: NeedletCoefficients, frame: NeedletFrame, points: np.ndarray,
               levels: Optional[Iterable[int]] = None, chunk_size: int = DEFAULT_CHUNK_SIZE,
               workers: int = 1) -> np.ndarray:
    """
    Discrete needlet approximation sum_j sum_k c_jk psi_jk(x).

    Args:
        coeffs: Coefficients built from this frame
        frame: Needlet frame
        points: Evaluation points, shape (M, 3)
        levels: Levels to include (default: all, ascending)

    Raises:
        ConfigurationError: If the coefficients belong to another frame
    """
    if coeffs.frame is not frame:
        raise ConfigurationError("Coefficients were computed for a different needlet frame")

    points = np.atleast_2d(np.asarray(points, dtype=float))
    selected = range(frame.J + 1) if levels is None else sorted(levels)

    values = np.zeros(points.shape[0])
    for j in selected:
        values += level_synthesis(frame, j, coeffs.levels[j], points,
                                  chunk_size=chunk_size, workers=workers)
    return values


def filtered_hyperinterpolation(f: PointFunction, J: int, frame_filter: FrameFilter,
                                Q_disc: QuadratureRule, points: np.ndarray,
                                allow_uncertified: bool = False,
                                chunk_size: int = DEFAULT_CHUNK_SIZE, workers: int = 1) -> np.ndarray:
    """
    sum_i w_i f(x_i) v_{2^(J-1), H}(x_i . x) at every point x.

    Equal to synthesize(analyze(f)) for the same filter and rule.
    """
    check_discretization(Q_disc, J, allow_uncertified)
    samples = weighted_samples(f, Q_disc)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    return kernel_apply(frame_kernel(frame_filter, J), points, Q_disc.nodes, samples,
                        chunk_size=chunk_size, workers=workers)


def level_contribution(f: PointFunction, frame: NeedletFrame, j: int, Q_disc: QuadratureRule,
                       points: np.ndarray, method: str = 'kernel', allow_uncertified: bool = False,
                       chunk_size: int = DEFAULT_CHUNK_SIZE, workers: int = 1) -> np.ndarray:
    """
    Level-j contribution U_{j,N}(f; x).

    Args:
        method: 'kernel' uses the discrete filtered operator with h^2 at
                T = 2^(j-1); 'needlet' sums coefficient times needlet
    """
    frame.check_level(j)
    check_discretization(Q_disc, frame.J, allow_uncertified)
    samples = weighted_samples(f, Q_disc)
    points = np.atleast_2d(np.asarray(points, dtype=float))

    if method == 'kernel':
        return kernel_apply(level_kernel(frame.needlet_filter, j), points, Q_disc.nodes, samples,
                            chunk_size=chunk_size, workers=workers)
    if method == 'needlet':
        coefficients = level_coefficients(frame, j, samples, Q_disc,
                                          chunk_size=chunk_size, workers=workers)
        return level_synthesis(frame, j, coefficients, points,
                               chunk_size=chunk_size, workers=workers)
    raise DomainError(f"Unknown level contribution method: {method!r}")


def level_decay(f: PointFunction, frame: NeedletFrame, Q_disc: QuadratureRule,
                points: np.ndarray, chunk_size: int = DEFAULT_CHUNK_SIZE,
                workers: int = 1) -> pd.DataFrame:
    """Sampled sup-norm of U_{j,N}(f) for j = 0..J."""
    rows = []
    for j in range(frame.J + 1):
        values = level_contribution(f, frame, j, Q_disc, points,
                                    chunk_size=chunk_size, workers=workers)
        rows.append({'j': j, 'sup_norm': float(np.max(np.abs(values)))})
    return pd.DataFrame(rows)
