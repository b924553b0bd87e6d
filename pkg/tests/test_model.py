import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from semibvm.dgp import simulate
from semibvm.funcspace import GridFunction, QuadratureError, quadrature
from semibvm.model import (
    Dataset,
    DiscreteDistribution,
    Observation,
    ParamTriple,
    aipw_estimate,
    chi_functional,
    efficient_influence,
    efficient_variance,
    log_likelihood,
    psi,
    psi_inv,
)

CONST = ParamTriple(lambda z: 2.0, lambda z: 0.5)


def one(z, r, ry):
    return Dataset([[z]], [r], [ry])


class TestLink:
    def test_center(self):
        assert psi(0.0) == 0.5
        assert psi_inv(0.5) == 0.0

    def test_round_trip(self):
        assert psi(psi_inv(0.9)) == pytest.approx(0.9, abs=1e-12)

    def test_extremes_do_not_overflow(self):
        with np.errstate(over="raise"):
            vals = psi(np.array([-1000.0, 1000.0]))
        np.testing.assert_array_equal(vals, [0.0, 1.0])

    @given(st.floats(1e-8, 1 - 1e-8))
    def test_inverse_identity(self, p):
        assert psi(psi_inv(p)) == pytest.approx(p, abs=1e-10)

    def test_strictly_increasing(self):
        x = np.linspace(-30, 30, 10001)
        assert np.all(np.diff(psi(x)) > 0)


class TestDataset:
    def test_ry_requires_r(self):
        with pytest.raises(ValueError):
            Dataset([0.5], [0], [1])

    def test_covariates_in_unit_cube(self):
        with pytest.raises(ValueError):
            Dataset([1.2], [1], [1])

    def test_immutable(self):
        data = Dataset([0.1, 0.2], [1, 0], [1, 0])
        with pytest.raises(ValueError):
            data.r[0] = 0

    def test_indexing_and_views(self):
        data = Dataset([0.1, 0.2, 0.3], [1, 0, 1], [1, 0, 0])
        assert data[1] == Observation(data.z[1], 0, 0)
        assert len(data.observed) == 2
        assert len(data.concat(data)) == 6
        assert Dataset.from_observations([data[0], data[2]]).r.tolist() == [1, 1]


class TestLogLikelihood:
    def test_observed_success(self):
        ll = log_likelihood(one(0.3, 1, 1), CONST)
        assert ll.total == pytest.approx(2 * math.log(0.5))
        assert ll.total == pytest.approx(-1.3863, abs=1e-4)

    def test_missing_outcome(self):
        ll = log_likelihood(one(0.3, 0, 0), CONST)
        assert ll.total == pytest.approx(math.log(0.5))
        assert ll.b == 0.0

    def test_factorises(self):
        rng = np.random.default_rng(0)
        z = rng.random(10)
        r = rng.random(10) < 0.6
        data = Dataset(z, r, r & (rng.random(10) < 0.5))
        f = GridFunction.from_callable(lambda t: 0.5 + t, 8)
        params = ParamTriple(lambda t: 1.5 + t, lambda t: 0.2 + 0.5 * t, f)
        ll = log_likelihood(data, params, include_density=True)
        assert ll.total == math.fsum([ll.a, ll.b, ll.f])
        assert ll.f == pytest.approx(np.sum(np.log(f(z))))

    def test_domain_error(self):
        with pytest.raises(ValueError):
            log_likelihood(one(0.3, 1, 1), ParamTriple(lambda z: 2.0, lambda z: 1.0))


class TestChiFunctional:
    @pytest.mark.parametrize("F", [None, DiscreteDistribution([0.1, 0.9], [0.3, 0.7]),
                                   GridFunction.from_callable(lambda t: 2 * t, 10)])
    def test_constant(self, F):
        assert chi_functional(lambda z: 0.3, F) == pytest.approx(0.3, abs=1e-12)

    def test_identity_uniform(self):
        assert chi_functional(lambda z: z) == pytest.approx(0.5, abs=1e-8)

    def test_logistic_sine(self):
        # the 2^16-point grid value, frozen; equal to 1/2 by the symmetry psi(-x) = 1 - psi(x)
        assert chi_functional(lambda z: psi(np.sin(2 * np.pi * z)), level=14) == pytest.approx(0.5, abs=1e-12)

    def test_resolution_error(self):
        with pytest.raises(QuadratureError):
            chi_functional(lambda z: z**2, level=2, tol=1e-6)

    def test_discrete_weights(self):
        F = DiscreteDistribution([0.2, 0.4], [0.25, 0.75])
        assert chi_functional(lambda z: z, F) == pytest.approx(0.35)

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            DiscreteDistribution([0.2, 0.4], [0.25, 0.7])


class TestInfluence:
    def test_observed_success(self):
        assert efficient_influence(Observation(np.array([0.4]), 1, 1), CONST, 0.5) == 1.0

    def test_missing(self):
        assert efficient_influence(Observation(np.array([0.4]), 0, 0), CONST, 0.5) == 0.0

    @pytest.mark.parametrize("m", [10**4, 10**5])
    def test_mean_zero(self, smooth_truth, m):
        data = simulate(smooth_truth, m, np.random.default_rng(m))
        vals = smooth_truth.influence(data)
        assert abs(vals.mean()) <= 4 * math.sqrt(smooth_truth.summary.var_eff / m)


class TestEfficientVariance:
    def test_constants(self):
        s = efficient_variance(CONST)
        assert s.var_eff == pytest.approx(0.5, abs=1e-12)
        assert s.var_f_part == 0.0

    def test_parts_add_up(self, smooth_truth):
        s = smooth_truth.summary
        assert s.var_eff == s.var_b_part + s.var_f_part
        assert s.var_f_part >= 0

    def test_frozen_smooth_value(self, smooth_truth):
        assert smooth_truth.summary.var_eff == pytest.approx(0.4046716129769659, rel=1e-12)
        assert smooth_truth.chi == pytest.approx(0.5628462575617718, rel=1e-12)

    def test_matches_monte_carlo(self, smooth_truth):
        data = simulate(smooth_truth, 10**6, np.random.default_rng(1))
        mc = float(np.var(smooth_truth.influence(data)))
        assert mc == pytest.approx(smooth_truth.summary.var_eff, rel=0.02)

    def test_discrete_F(self):
        F = DiscreteDistribution([0.25, 0.75], [0.5, 0.5])
        s = efficient_variance(ParamTriple(lambda z: 2.0, lambda z: np.where(z < 0.5, 0.2, 0.6), F))
        assert s.chi == pytest.approx(0.4)
        assert s.var_f_part == pytest.approx(0.04)
        assert s.var_b_part == pytest.approx(2 * 0.5 * (0.16 + 0.24))


class TestAIPW:
    def test_complete_data_gives_sample_mean(self):
        y = np.array([1, 0, 1, 1])
        data = Dataset([0.1, 0.2, 0.3, 0.4], np.ones(4, dtype=int), y)
        assert aipw_estimate(data, lambda z: 1.0, lambda z: 0.37) == pytest.approx(y.mean())

    def test_single_missing(self):
        assert aipw_estimate(one(0.5, 0, 0), lambda z: 3.0, lambda z: 0.4) == pytest.approx(0.4)

    def test_population_double_robust_zero(self, smooth_truth):
        a_hat = lambda z: 1.0 + 3.0 * z  # noqa: E731 - any bounded a_hat
        b0 = smooth_truth.b
        integrand = lambda z: (1 / smooth_truth.a(z)) * a_hat(z) * (b0(z) - b0(z)) + b0(z)  # noqa: E731
        assert quadrature(integrand, level=12) == pytest.approx(smooth_truth.chi, abs=1e-6)

    def test_consistent_with_correct_regression(self, smooth_truth):
        data = simulate(smooth_truth, 10**4, np.random.default_rng(11))
        est = aipw_estimate(data, lambda z: 2.0, smooth_truth.b)
        terms = data.r * 2.0 * (data.ry - data.r * smooth_truth.b(data.z)) + smooth_truth.b(data.z)
        assert abs(est - smooth_truth.chi) <= 3 * terms.std() / math.sqrt(len(data))


class TestValidate:
    def test_margin(self):
        with pytest.raises(ValueError):
            ParamTriple(lambda z: 1.0005, lambda z: 0.5).validate([0.5])
        ParamTriple(lambda z: 2.0, lambda z: 0.5).validate([0.5])
