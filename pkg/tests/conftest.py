"""Shared fixtures for the needlet test suite."""

import numpy as np
import pytest

from src.filters import build_needlet_filter
from src.needlets import build_frame
from src.quadrature import QuadratureSource, discretization_rule, needlet_quadrature_sequence


def random_unit_vectors(count: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    points = rng.standard_normal((count, 3))
    return points / np.linalg.norm(points, axis=1, keepdims=True)


@pytest.fixture(scope='session')
def needlet_filter():
    return build_needlet_filter(5)


@pytest.fixture(scope='session')
def tensor_source():
    return QuadratureSource()


@pytest.fixture(scope='session')
def make_frame(needlet_filter, tensor_source):
    """Factory for tensor-rule frames of a given order, cached per order."""
    frames = {}

    def factory(J: int):
        if J not in frames:
            frames[J] = build_frame(J, needlet_filter, needlet_quadrature_sequence(J, tensor_source))
        return frames[J]

    return factory


@pytest.fixture(scope='session')
def make_disc_rule(tensor_source):
    def factory(J: int, extra_degree: int = 0):
        return discretization_rule(J, tensor_source, extra_degree=extra_degree)

    return factory


@pytest.fixture
def unit_vectors():
    return random_unit_vectors(100, seed=7)
