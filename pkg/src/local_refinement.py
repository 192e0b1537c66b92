"""
Local Refinement Module

Localized needlet approximation: every needlet up to a low order J_low, and
inside a spherical cap the high-level needlets (J_low < j <= J_high) whose
centres lie in that cap. There is no blending at the cap boundary.
"""

import math
import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
import pandas as pd

from src.errors import ConfigurationError, DomainError
from src.needlets import (
    DEFAULT_CHUNK_SIZE,
    NeedletFrame,
    check_discretization,
    level_coefficients,
    level_synthesis,
    weighted_samples,
)
from src.quadrature import QuadratureRule

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SphericalCap:
    """
    Closed spherical cap {x : arccos(center . x) <= radius}.

    Attributes:
        center: Unit vector
        radius: Geodesic radius in radians, in [0, pi]; radius 0 is empty
    """

    center: tuple
    radius: float

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float)
        norm = float(np.linalg.norm(center))
        if center.shape != (3,) or norm == 0.0:
            raise DomainError(f"Cap centre must be a non-zero 3-vector, got {self.center}")
        if not 0.0 <= self.radius <= math.pi:
            raise DomainError(f"Cap radius must be in [0, pi], got {self.radius}")
        object.__setattr__(self, 'center', tuple(center / norm))

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean membership mask for an (M, 3) array."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.radius <= 0.0:
            return np.zeros(points.shape[0], dtype=bool)
        cosines = np.clip(points @ np.asarray(self.center), -1.0, 1.0)
        return np.arccos(cosines) <= self.radius

    def area_fraction(self) -> float:
        return (1.0 - math.cos(self.radius)) / 2.0


def parse_cap(text: str) -> SphericalCap:
    """Parse 'cx,cy,cz:radius_radians'."""
    try:
        center_text, radius_text = text.split(':')
        center = tuple(float(c) for c in center_text.split(','))
        radius = float(radius_text)
    except ValueError:
        raise DomainError(f"Cap must look like 'cx,cy,cz:radius', got {text!r}")
    if len(center) != 3:
        raise DomainError(f"Cap centre needs three components, got {text!r}")
    return SphericalCap(center=center, radius=radius)


def cap_center_counts(frame: NeedletFrame, cap: SphericalCap) -> pd.DataFrame:
    """Per-level needlet centre counts, plus the quadrature weight captured by the cap."""
    rows = []
    for j in range(frame.J + 1):
        mask = cap.contains(frame.centers(j))
        rule = frame.quadratures[j]
        rows.append({
            'j': j,
            'total': rule.size,
            'in_cap': int(mask.sum()),
            'fraction': float(mask.mean()),
            'weight_fraction': float(rule.weights[mask].sum()),
        })
    return pd.DataFrame(rows)


def localized_approximate(f: Callable[[np.ndarray], np.ndarray], cap: SphericalCap, J_low: int,
                          J_high: int, frame: NeedletFrame, Q_disc: QuadratureRule,
                          points: np.ndarray, allow_uncertified: bool = False,
                          chunk_size: int = DEFAULT_CHUNK_SIZE, workers: int = 1) -> np.ndarray:
    """
    Localized discrete needlet approximation at points.

    Outside the cap the result is the order-J_low approximation, produced by
    the same level-by-level summation as synthesize(); inside, contributions
    of levels J_low+1..J_high from centres in the cap are added.

    Args:
        f: Vectorised function
        cap: Refinement region
        J_low: Order used everywhere
        J_high: Highest level inside the cap; equals the frame order
        frame: Needlet frame of order J_high
        Q_disc: Discretization rule certified for order J_high

    Raises:
        DomainError: If J_low > J_high
        ConfigurationError: If the frame order is not J_high
    """
    if J_low > J_high:
        raise DomainError(f"J_low={J_low} exceeds J_high={J_high}")
    if J_low < 0:
        raise DomainError(f"J_low must be >= 0, got {J_low}")
    if frame.J != J_high:
        raise ConfigurationError(f"Frame has order {frame.J}, localized run needs {J_high}")

    check_discretization(Q_disc, J_high, allow_uncertified)
    samples = weighted_samples(f, Q_disc)
    points = np.atleast_2d(np.asarray(points, dtype=float))

    values = np.zeros(points.shape[0])
    for j in range(J_low + 1):
        coefficients = level_coefficients(frame, j, samples, Q_disc,
                                          chunk_size=chunk_size, workers=workers)
        values += level_synthesis(frame, j, coefficients, points,
                                  chunk_size=chunk_size, workers=workers)

    inside = cap.contains(points)
    if not inside.any():
        logger.info("No evaluation points inside the cap; returning the low-order approximation")
        return values

    refinement = np.zeros(int(inside.sum()))
    for j in range(J_low + 1, J_high + 1):
        centers = np.flatnonzero(cap.contains(frame.centers(j)))
        logger.debug(f"Level {j}: {centers.size} of {frame.quadratures[j].size} centres in cap")
        if centers.size == 0:
            continue
        coefficients = level_coefficients(frame, j, samples, Q_disc, centers=centers,
                                          chunk_size=chunk_size, workers=workers)
        refinement += level_synthesis(frame, j, coefficients, points[inside], centers=centers,
                                      chunk_size=chunk_size, workers=workers)

    values[inside] += refinement
    logger.info(f"Localized approximation: {int(inside.sum())} of {points.shape[0]} points refined")
    return values
