import numpy as np
import pytest

from semibvm.dgp import TruthConfig, build_truth, simulate
from semibvm.model import Dataset
from semibvm.pilot import PilotSpec, fit_pilot, l2_error, pilot_rate_probe, split


def _data(n, seed=0):
    rng = np.random.default_rng(seed)
    r = rng.random(n) < 0.6
    return Dataset(rng.random(n), r, r & (rng.random(n) < 0.5))


class TestSplit:
    @pytest.mark.parametrize("n,frac,sizes", [(10, 0.5, (5, 5)), (1000, 0.3, (300, 700))])
    def test_sizes(self, n, frac, sizes):
        pilot, inference = split(_data(n), frac, seed=1)
        assert (len(pilot), len(inference)) == sizes

    def test_disjoint_cover(self):
        data = _data(40)
        pilot, inference = split(data, 0.5, seed=2)
        merged = np.sort(np.concatenate([pilot.z[:, 0], inference.z[:, 0]]))
        np.testing.assert_array_equal(merged, np.sort(data.z[:, 0]))

    def test_deterministic(self):
        data = _data(100)
        a, _ = split(data, 0.5, seed=9)
        b, _ = split(data, 0.5, seed=9)
        assert a.z.tobytes() == b.z.tobytes()

    def test_empty_part(self):
        with pytest.raises(ValueError):
            split(_data(3), 0.1, seed=0)


class TestFitPilot:
    def test_all_observed_hits_clip(self):
        n = 2000
        data = Dataset(np.random.default_rng(0).random(n), np.ones(n, dtype=int), np.zeros(n, dtype=int))
        est = fit_pilot(data, PilotSpec(bins=4))
        np.testing.assert_allclose(est.values, 1 / 0.95)

    def test_half_observed_single_cell(self):
        data = Dataset([0.1, 0.3, 0.6, 0.9], [1, 1, 0, 0], [0, 1, 0, 0])
        est = fit_pilot(data, PilotSpec(bins=1))
        assert est(0.5)[0] == pytest.approx(2.0)

    @pytest.mark.parametrize("kind", ["regressogram", "series-logistic"])
    def test_beats_constant_estimate(self, kind):
        truth = build_truth(TruthConfig(amp_a=3.0, alpha=1.0))
        data = simulate(truth, 4000, np.random.default_rng(5))
        est = fit_pilot(data, PilotSpec(kind=kind))
        const = 1 / data.r.mean()
        assert l2_error(est, truth.a) < l2_error(lambda z: np.full(len(z), const), truth.a)

    @pytest.mark.parametrize("kind", ["regressogram", "series-logistic"])
    def test_bounded(self, kind):
        data = Dataset([0.1, 0.2, 0.8], [0, 0, 1], [0, 0, 1])
        est = fit_pilot(data, PilotSpec(kind=kind, bins=2, level=1))
        vals = est.to_grid(6).values
        assert np.all(vals >= 1.0) and np.all(vals <= 1 / 0.05 + 1e-9)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            fit_pilot(Dataset(np.zeros((0, 1)), [], []), PilotSpec())

    def test_bad_spec(self):
        with pytest.raises(ValueError):
            PilotSpec(kind="kernel")

    def test_rate_probe_decreases(self):
        truth = build_truth(TruthConfig(amp_a=2.0))
        table = pilot_rate_probe(truth, PilotSpec(), [200, 2000, 20000], reps=5, seed=3)
        errs = [row["median_l2_error"] for row in table]
        assert errs[0] > errs[1] > errs[2]


def _truth_with_propensity(prop):
    from semibvm.dgp import ModelTruth
    from semibvm.funcspace import GridFunction

    a = GridFunction.from_callable(lambda z: 1 / prop(z), 12)
    b = GridFunction.from_callable(lambda z: np.full(len(z), 0.5), 12)
    return ModelTruth(a, b, None, 1.0, 1.0)


class TestSpecifiedTruths:
    def test_sine_propensity(self):
        from semibvm.model import psi

        truth = _truth_with_propensity(lambda z: 0.6 * psi(np.sin(2 * np.pi * z)) + 0.2)
        data = simulate(truth, 4000, np.random.default_rng(21))
        est = fit_pilot(data, PilotSpec(bins=16))
        const = 1 / data.r.mean()
        assert l2_error(est, truth.a) < l2_error(lambda z: np.full(len(z), const), truth.a)

    def test_constant_truth_hits_clip_floor(self):
        truth = _truth_with_propensity(lambda z: np.ones(len(z)))
        table = pilot_rate_probe(truth, PilotSpec(), [100, 400, 1600], reps=2)
        for row in table:
            assert row["median_l2_error"] == pytest.approx(1 / 0.95 - 1, abs=1e-9)

    def test_probe_reproducible(self):
        truth = build_truth(TruthConfig())
        assert pilot_rate_probe(truth, PilotSpec(), [100], reps=1, seed=4) == \
            pilot_rate_probe(truth, PilotSpec(), [100], reps=1, seed=4)
