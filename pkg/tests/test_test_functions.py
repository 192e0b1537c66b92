"""Tests for Wendland functions, Fourier-Laplace coefficients and L2 errors."""

import math

import numpy as np
import pytest

from conftest import random_unit_vectors
from src.errors import DomainError
from src.filters import build_frame_filter
from src.quadrature import QuadratureRule, tensor_rule
from src.special_functions import gegenbauer_norm, gegenbauer_series
from src.test_functions import (
    WendlandTestFunction,
    center_pair_sums,
    convergence_slope,
    discrete_l2_error,
    fourier_coeff,
    fourier_coeff_table,
    fourier_synthesis,
    semidiscrete_l2_error,
    squared_norm,
    test_function_eval,
    wendland_delta,
    wendland_eval,
)


class TestWendland:
    def test_known_values(self):
        assert wendland_eval(0, 0.0) == 1.0
        assert wendland_eval(1, 0.5) == pytest.approx(0.1875, abs=1e-15)
        assert wendland_eval(2, 0.0) == pytest.approx(1.0)
        assert wendland_eval(3, 0.0) == pytest.approx(1.0)
        assert wendland_eval(4, 0.0) == pytest.approx(1.0)

    @pytest.mark.parametrize('k', range(5))
    def test_support(self, k):
        np.testing.assert_array_equal(wendland_eval(k, np.array([1.0, 1.5, 3.0])), 0.0)
        delta = wendland_delta(k)
        assert wendland_eval(k, delta, normalized=True) == 0.0
        assert wendland_eval(k, 0.99 * delta, normalized=True) > 0.0

    def test_index_out_of_range(self):
        with pytest.raises(DomainError):
            wendland_eval(5, 0.1)
        with pytest.raises(DomainError):
            WendlandTestFunction(-1)

    def test_negative_radius(self):
        with pytest.raises(DomainError):
            wendland_eval(1, -0.1)

    def test_delta_values(self):
        assert wendland_delta(0) == pytest.approx(3 * math.sqrt(math.pi) / 2, abs=1e-12)
        assert wendland_delta(1) == pytest.approx(3 * math.sqrt(math.pi) / 2, abs=1e-12)
        assert wendland_delta(2) == pytest.approx(27 * math.sqrt(math.pi) / 16, abs=1e-12)
        assert wendland_delta(0) == pytest.approx(2.658681, abs=1e-6)
        assert wendland_delta(2) == pytest.approx(2.991016, abs=1e-6)

    @pytest.mark.parametrize('k', range(8))
    def test_delta_two_ways(self, k):
        assert wendland_delta(k, exact=True) == pytest.approx(wendland_delta(k, exact=False), abs=1e-12)


class TestSixCenterFunction:
    @pytest.mark.parametrize('k', range(5))
    def test_value_at_center(self, k):
        phi = lambda r: wendland_eval(k, r, normalized=True)
        expected = phi(0.0) + phi(2.0) + 4 * phi(math.sqrt(2.0))
        assert test_function_eval(k, np.array([1.0, 0.0, 0.0])) == pytest.approx(expected, rel=1e-14)

    def test_antipodal_symmetry(self, unit_vectors):
        f = WendlandTestFunction(2)
        np.testing.assert_allclose(f(unit_vectors), f(-unit_vectors), rtol=1e-13)

    def test_permutation_and_sign_symmetry(self, unit_vectors):
        f = WendlandTestFunction(3)
        permuted = unit_vectors[:, [2, 0, 1]] * np.array([1.0, -1.0, 1.0])
        np.testing.assert_allclose(f(unit_vectors), f(permuted), rtol=1e-13)

    def test_peaks_at_centers(self):
        f = WendlandTestFunction(2)
        assert f(np.array([[0.0, 0.0, 1.0]]))[0] > f(random_unit_vectors(500)).max() - 1e-12

    def test_vector_evaluation(self, unit_vectors):
        assert test_function_eval(1, unit_vectors).shape == (100,)


class TestFourierCoefficients:
    def test_stable_under_doubling(self):
        first = fourier_coeff(0, 0, n_gl=30)
        assert first > 0
        assert fourier_coeff(0, 0, n_gl=60) == pytest.approx(first, abs=1e-12)

    @pytest.mark.parametrize('ell', [0, 5, 17, 18])
    def test_default_node_count_is_accepted(self, ell):
        value = fourier_coeff(0, ell)
        assert value == pytest.approx(fourier_coeff(0, ell, n_gl=ell + 60), abs=1e-14)
        assert fourier_coeff(0, 0) > 0

    def test_rejects_too_few_nodes(self):
        with pytest.raises(DomainError):
            fourier_coeff(2, 40, n_gl=20)

    def test_table_matches_single_coefficients(self):
        table = fourier_coeff_table(2, 60)
        for ell in (0, 1, 7, 33, 60):
            assert table.coeffs[ell] == pytest.approx(fourier_coeff(2, ell), abs=1e-14)

    def test_zero_degree_is_mean_of_zonal_function(self):
        # (1/2) int phi~(sqrt(2-2t)) dt by a fine Gauss-Legendre rule in t
        from src.special_functions import gauss_legendre
        rule = gauss_legendre(400)
        values = wendland_eval(1, np.sqrt(2.0 - 2.0 * rule.nodes), normalized=True)
        assert fourier_coeff(1, 0) == pytest.approx(0.5 * rule.integrate(values), rel=1e-8)

    def test_series_reconstruction(self):
        table = fourier_coeff_table(2, 500)
        t0 = 0.3
        weights = table.coeffs * (2 * table.degrees + 1)
        series = float(gegenbauer_series(2, weights, np.array([t0]))[0])
        assert series == pytest.approx(wendland_eval(2, math.sqrt(2 - 2 * t0), normalized=True), abs=1e-6)

    def test_decay(self):
        table = fourier_coeff_table(2, 400)
        low = np.max(np.abs(table.coeffs[8:13]))
        assert abs(table.coeffs[400]) <= 1e-4 * low

    def test_cache_round_trip(self, tmp_path):
        first = fourier_coeff_table(1, 40, cache_dir=tmp_path)
        assert (tmp_path / 'fourier_k1_L40.csv').exists()
        second = fourier_coeff_table(1, 40, cache_dir=tmp_path)
        np.testing.assert_array_equal(first.coeffs, second.coeffs)

    def test_synthesis_matches_function(self, unit_vectors):
        table = fourier_coeff_table(3, 300)
        np.testing.assert_allclose(fourier_synthesis(table, unit_vectors),
                                   WendlandTestFunction(3)(unit_vectors), atol=1e-6)

    def test_center_pair_sums(self):
        sums = center_pair_sums(4)
        p0 = [gegenbauer_norm(2, ell, 0.0) for ell in range(5)]
        expected = [(2 * ell + 1) * (6 + 6 * (-1) ** ell + 24 * p0[ell]) for ell in range(5)]
        np.testing.assert_allclose(sums, expected, atol=1e-12)
        assert sums[0] == 36.0


class TestErrors:
    def test_semidiscrete_decreases_in_order(self):
        frame_filter = build_frame_filter(5)
        table = fourier_coeff_table(2, 500)
        errors = [semidiscrete_l2_error(2, J, frame_filter, table=table) for J in range(1, 8)]
        assert errors[3] > errors[4]
        assert all(a >= b for a, b in zip(errors, errors[1:]))

    def test_truncation_floor(self):
        frame_filter = build_frame_filter(5)
        with pytest.raises(DomainError):
            semidiscrete_l2_error(1, 10, frame_filter, L_trunc=100)
        assert semidiscrete_l2_error(1, 10, frame_filter, L_trunc=100, strict=False) == 0.0

    def test_semidiscrete_order_zero_is_deviation_from_mean(self):
        frame_filter = build_frame_filter(5)
        table = fourier_coeff_table(1, 300)
        mean_sq = table.coeffs[0] ** 2 * center_pair_sums(0)[0]
        expected = math.sqrt(squared_norm(table) - mean_sq)
        assert semidiscrete_l2_error(1, 0, frame_filter, L_trunc=300, table=table) == pytest.approx(expected, rel=1e-10)

    def test_discrete_error_of_exact_approximation(self):
        rule = tensor_rule(20)
        f = WendlandTestFunction(2)
        assert discrete_l2_error(f, f, rule) == 0.0

    def test_discrete_error_of_constant_shift(self):
        rule = tensor_rule(20)
        f = WendlandTestFunction(2)
        assert discrete_l2_error(lambda x: f(x) + 0.25, f, rule) == pytest.approx(0.25, abs=1e-12)
        assert discrete_l2_error(f(rule.nodes) - 0.5, f, rule) == pytest.approx(0.5, abs=1e-12)

    def test_discrete_error_invariant_under_relabeling(self):
        rule = tensor_rule(15)
        order = np.random.default_rng(0).permutation(rule.size)
        shuffled = QuadratureRule(nodes=rule.nodes[order], weights=rule.weights[order],
                                  exactness_degree=rule.exactness_degree)
        f = WendlandTestFunction(1)
        approx = lambda x: f(x) + x[:, 2] ** 2
        assert discrete_l2_error(approx, f, shuffled) == pytest.approx(discrete_l2_error(approx, f, rule), rel=1e-13)

    def test_convergence_slope(self):
        J = np.arange(3, 7)
        assert convergence_slope(J, 2.0 ** (-3.0 * J) * 5) == pytest.approx(-3.0)
        assert math.isnan(convergence_slope([1, 2], [0.0, 1.0]))


@pytest.mark.slow
class TestOracles:
    def test_parseval(self):
        rule = tensor_rule(600)
        for k in (1, 2, 3, 4):
            table = fourier_coeff_table(k, 500)
            f = WendlandTestFunction(k)
            by_quadrature = rule.integrate(f(rule.nodes) ** 2)
            assert squared_norm(table) == pytest.approx(by_quadrature, rel=1e-6)

    def test_semidiscrete_error_against_quadrature(self):
        frame_filter = build_frame_filter(5)
        table = fourier_coeff_table(0, 500)
        J = 3
        scale = 2.0 ** (J - 1)
        ells = table.degrees
        weights = frame_filter(ells / scale) * table.coeffs * (2 * ells + 1)

        rule = tensor_rule(600)
        f = WendlandTestFunction(0)
        cosines = rule.nodes @ f.centers.T
        approx = gegenbauer_series(2, weights, cosines).sum(axis=1)
        oracle = discrete_l2_error(approx, f, rule)

        assert semidiscrete_l2_error(0, J, frame_filter, table=table) == pytest.approx(oracle, rel=0.01)
