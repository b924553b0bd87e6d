import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semibvm.funcspace import (
    GridFunction,
    HolderSynthesisSpec,
    QuadratureError,
    WaveletBasis,
    cell_centers,
    cell_index,
    evaluate_basis,
    quadrature,
    synthesize_holder,
)

SQRT2 = math.sqrt(2.0)


class TestGridFunction:
    def test_length_must_match_level(self):
        with pytest.raises(ValueError):
            GridFunction(3, np.zeros(7))

    def test_values_must_be_finite(self):
        with pytest.raises(ValueError):
            GridFunction(1, np.array([0.0, np.nan]))

    def test_lookup_is_nearest_cell(self):
        f = GridFunction(2, np.array([1.0, 2.0, 3.0, 4.0]))
        np.testing.assert_array_equal(f([0.0, 0.2, 0.25, 0.74, 1.0]), [1, 1, 2, 3, 4])

    def test_two_dimensional_lookup(self):
        f = GridFunction.from_callable(lambda p: p[:, 0] + 10 * p[:, 1], 1, dim=2)
        assert f.as_array().shape == (2, 2)
        assert f([[0.1, 0.9]])[0] == pytest.approx(0.25 + 7.5)

    def test_csv_round_trip(self, tmp_path):
        f = GridFunction.from_callable(np.sin, 5)
        path = tmp_path / "f.csv"
        f.to_csv(path)
        g = GridFunction.from_csv(path)
        assert (g.level, g.dim) == (5, 1)
        np.testing.assert_array_equal(g.values, f.values)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 6), st.integers(1, 2), st.integers(0, 2**32 - 1))
    def test_bytes_round_trip(self, level, dim, seed):
        vals = np.random.default_rng(seed).normal(size=2 ** (level * dim))
        f = GridFunction(level, vals, dim)
        g = GridFunction.from_bytes(f.to_bytes())
        assert (g.level, g.dim) == (level, dim)
        assert g.values.tobytes() == f.values.tobytes()

    def test_cell_index_clamps_right_edge(self):
        assert cell_index([1.0], 3)[0] == 7
        np.testing.assert_allclose(cell_centers(2), [[0.125], [0.375], [0.625], [0.875]])


class TestEvaluateBasis:
    def test_haar_level_one(self):
        basis = WaveletBasis("haar", 1, 4)
        vals = evaluate_basis(basis, 1, 0, [0.1, 0.3, 0.6])
        # psi_{1,0} lives on [0, 1/2): +sqrt2 on the left quarter, -sqrt2 on the right
        np.testing.assert_allclose(vals, [SQRT2, -SQRT2, 0.0], atol=1e-12)
        np.testing.assert_allclose(evaluate_basis(basis, 1, 1, [0.6, 0.8]), [SQRT2, -SQRT2], atol=1e-12)

    def test_scaling_function_is_one(self):
        basis = WaveletBasis("haar", 1, 2)
        np.testing.assert_allclose(evaluate_basis(basis, -1, 0, [0.0, 0.5, 0.99]), 1.0)

    @pytest.mark.parametrize("j,k", [(5, 0), (1, 2), (-1, 1)])
    def test_index_out_of_range(self, j, k):
        with pytest.raises(IndexError):
            evaluate_basis(WaveletBasis("haar", 1, 4), j, k, [0.5])

    def test_two_dimensional_index(self):
        basis = WaveletBasis("haar", 2, 2)
        assert basis.index(0, (1, 0, 0)) == 1
        assert basis.index(1, (3, 1, 1)) == 4 + 8 + 3
        with pytest.raises(IndexError):
            basis.index(1, (4, 0, 0))

    @pytest.mark.parametrize("family", ["haar", "daub4"])
    def test_unit_norm_and_orthogonality_fine_grid(self, family):
        basis = WaveletBasis(family, 1, 4, grid_level=16)
        h = 2.0**-16
        a = basis.grid_matrix(4)[:, basis.index(1, 0)]
        b = basis.grid_matrix(4)[:, basis.index(2, 1)]
        assert np.sum(a * a) * h == pytest.approx(1.0, abs=1e-6)
        assert abs(np.sum(a * b) * h) <= 1e-6

    @pytest.mark.parametrize("family,dim,level,grid", [("haar", 1, 4, 16), ("daub4", 1, 4, 16),
                                                        ("haar", 2, 3, 7), ("daub4", 2, 3, 7)])
    def test_gram_matrix_is_identity(self, family, dim, level, grid):
        basis = WaveletBasis(family, dim, level, grid_level=grid)
        M = basis.grid_matrix(level)
        gram = M.T @ M * 2.0 ** (-grid * dim)
        np.testing.assert_allclose(gram, np.eye(M.shape[1]), atol=1e-6)


class TestSynthesizeHolder:
    def test_zero_amplitude(self):
        f = synthesize_holder(HolderSynthesisSpec(1.5, 3, 0.0, WaveletBasis("haar", 1, 6)))
        assert np.all(f.values == 0)

    def test_same_seed_is_bitwise_identical(self):
        spec = HolderSynthesisSpec(1.0, 42, 1.0, WaveletBasis("daub4", 1, 9))
        assert synthesize_holder(spec).to_bytes() == synthesize_holder(spec).to_bytes()

    def test_smoother_function_has_smaller_second_differences(self):
        basis = WaveletBasis("daub4", 1, 11, 12)
        rough = synthesize_holder(HolderSynthesisSpec(0.5, 9, 1.0, basis)).values
        smooth = synthesize_holder(HolderSynthesisSpec(2.0, 9, 1.0, basis)).values
        assert np.max(np.abs(np.diff(smooth, 2))) < np.max(np.abs(np.diff(rough, 2)))

    @pytest.mark.parametrize("family", ["haar", "daub4"])
    def test_coefficients_respect_envelope(self, family):
        basis = WaveletBasis(family, 1, 7)
        spec = HolderSynthesisSpec(0.8, 5, 2.0, basis)
        coeffs = basis.analyze(synthesize_holder(spec))
        assert np.all(np.abs(coeffs) <= spec.bounds() + 1e-9)

    def test_haar_round_trip_two_dimensions(self):
        basis = WaveletBasis("haar", 2, 4)
        spec = HolderSynthesisSpec(1.0, 1, 1.0, basis)
        u = np.random.default_rng(1).uniform(-1, 1, basis.n_coeffs(4) - 1)
        expected = np.concatenate([[0.0], u]) * spec.bounds()
        np.testing.assert_allclose(basis.analyze(synthesize_holder(spec)), expected, atol=1e-9)


class TestQuadrature:
    def test_constant_is_exact(self):
        assert quadrature(lambda z: np.ones_like(z)) == 1.0

    def test_linear(self):
        assert quadrature(lambda z: z, level=14) == pytest.approx(0.5, abs=1e-8)

    def test_quadratic(self):
        assert quadrature(lambda z: z**2, level=14) == pytest.approx(1 / 3, abs=1e-7)

    def test_weight_must_be_normalised(self):
        w = GridFunction(4, np.full(16, 1.1))
        with pytest.raises(QuadratureError):
            quadrature(lambda z: z, weight=w)

    def test_weighted(self):
        w = GridFunction.from_callable(lambda z: 2 * z, 12)
        assert quadrature(lambda z: np.ones_like(z), weight=w) == pytest.approx(1.0, abs=1e-12)
        assert quadrature(lambda z: z, weight=w) == pytest.approx(2 / 3, abs=1e-7)

    @pytest.mark.parametrize("fn,exact", [(lambda z: np.sin(2 * np.pi * z), 0.0), (np.exp, math.e - 1)])
    def test_convergence_rate(self, fn, exact):
        errs = [abs(quadrature(fn, level=L) - exact) for L in range(3, 10)]
        for coarse, fine in zip(errs, errs[1:]):
            assert fine <= 1e-13 or coarse / fine >= 3.9
