"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that pytest prints in its terminal summary.
The simulation-based checks are marked ``slow``; together they take a few
minutes on a single core.
"""
import math
import time

import numpy as np
import pytest

from semibvm.config import from_flat
from semibvm.diagnostics import dp_laplace_check
from semibvm.dgp import simulate
from semibvm.experiments import run_scenario, run_suite, suite_cells
from semibvm.funcspace import GridFunction
from semibvm.model import Dataset, ParamTriple, efficient_variance, psi
from semibvm.pipeline import run_density_pair, run_replication, summarize_density_pairs
from semibvm.priors import (
    ConstantSeedMap,
    PropensityDependentPrior,
    RiemannLiouvillePrior,
    RLPriorSpec,
    SeriesPrior,
    SeriesPriorSpec,
)
from semibvm.sampler import SamplerConfig, batch_means_se, sample_b_posterior


class TestEfficientVariance:
    def test_criterion_1(self, smooth_truth, record_criterion):
        t0 = time.perf_counter()
        const = efficient_variance(ParamTriple(lambda z: 2.0, lambda z: 0.5))
        const_err = abs(const.var_eff - 0.5)

        rng = np.random.default_rng(20240601)
        data = simulate(smooth_truth, 10**6, rng)
        mc_var = float(np.var(smooth_truth.influence(data)))
        rel = abs(mc_var / smooth_truth.summary.var_eff - 1)
        elapsed = time.perf_counter() - t0

        ok = const_err <= 1e-12 and rel <= 0.02 and elapsed < 30
        record_criterion(1, "efficient variance identity",
                         ok, f"|const-0.5|={const_err:.1e}, MC rel err={rel:.4f}, {elapsed:.1f}s")
        assert ok


class TestSamplerOracle:
    def test_criterion_2(self, record_criterion):
        t0 = time.perf_counter()
        data = Dataset(np.full(10, 0.5), np.ones(10, dtype=int), [1] * 7 + [0] * 3)
        chain = sample_b_posterior(data, ConstantSeedMap(), SamplerConfig(burnin=500, draws=5000, thin=2, chains=2, seed=3))
        b = psi(chain.thetas[..., 0])
        elapsed = time.perf_counter() - t0

        grid = np.linspace(-8, 8, 2000)
        logw = -grid**2 / 2 + 7 * np.log(psi(grid)) + 3 * np.log(psi(-grid))
        w = np.exp(logw - logw.max())
        w /= w.sum()
        oracle_mean = float(np.sum(w * psi(grid)))
        oracle_sd = math.sqrt(float(np.sum(w * (psi(grid) - oracle_mean) ** 2)))

        mean = float(b.mean())
        sd = float(b.std())
        se_mean = math.sqrt(sum(batch_means_se(c) ** 2 for c in b)) / b.shape[0]
        sq = (b - mean) ** 2
        se_var = math.sqrt(sum(batch_means_se(c) ** 2 for c in sq)) / b.shape[0]
        se_sd = se_var / (2 * sd)
        ok = (abs(mean - oracle_mean) <= 3 * se_mean and abs(sd - oracle_sd) <= 3 * se_sd
              and b.size == 10**4 and elapsed < 10)
        record_criterion(2, "sampler vs quadrature oracle", ok,
                         f"mean {mean:.4f} vs {oracle_mean:.4f} (se {se_mean:.4f}), "
                         f"sd {sd:.4f} vs {oracle_sd:.4f} (se {se_sd:.4f}), {elapsed:.1f}s")
        assert ok


class TestLaplaceTransform:
    def test_criterion_3(self, record_criterion):
        t0 = time.perf_counter()
        table = dp_laplace_check(lambda n, rng: rng.random(n), lambda z: z, n=2000,
                                 t_list=(-1.0, -0.5, 0.5, 1.0), mc_reps=100_000, seed=5)
        elapsed = time.perf_counter() - t0
        # the closed form uses Var(U) = 1/12 rather than the simulated variance
        ratios = [row["laplace_mc"] / math.exp(row["t"] ** 2 / 24) for row in table]
        ok = all(abs(r - 1) <= 0.05 for r in ratios) and elapsed < 60
        record_criterion(3, "Dirichlet posterior Laplace transform", ok,
                         "ratios " + ", ".join(f"{r:.4f}" for r in ratios) + f", {elapsed:.1f}s")
        assert ok


@pytest.mark.slow
class TestSmoothCoverage:
    def test_criterion_4(self, tmp_path, record_criterion):
        cfg = from_flat({"reps": 200, "n": 1000, "prior.betabar": 2.0})
        assert (cfg.truth.alpha, cfg.truth.beta, cfg.d, cfg.center_kind) == (2.0, 2.0, 1, "oracle")
        _, summary = run_scenario(cfg, tmp_path / "smooth")
        agg = summary["aggregate"]
        ok = 0.90 <= agg["coverage"] <= 0.99 and 0.85 <= agg["sd_ratio"] <= 1.15
        record_criterion(4, "coverage in the smooth regime", ok,
                         f"coverage {agg['coverage']:.3f}, sd ratio {agg['sd_ratio']:.3f}")
        assert ok


@pytest.mark.slow
class TestDistanceDecay:
    def test_criterion_5(self, record_criterion):
        medians = {}
        for n in (250, 2000):
            cfg = from_flat({"n": n, "reps": 50, "master_seed": 17})
            medians[n] = float(np.median([run_replication(cfg, rep)["ks_dist"] for rep in range(50)]))
        ok = medians[2000] <= medians[250]
        record_criterion(5, "KS distance decays with n", ok,
                         f"median KS n=250: {medians[250]:.4f}, n=2000: {medians[2000]:.4f}")
        assert ok


@pytest.mark.slow
class TestSingleRobustness:
    def test_criterion_6(self, tmp_path, record_criterion):
        result = run_suite("single-robustness", {"reps": 200}, tmp_path / "robust")
        cells = {(c["x"], c["y"]): c for c in result["cells"]}
        assert all(c["status"] == "ok" for c in cells.values())
        cov = {key: c["coverage"] for key, c in cells.items()}
        gains = {a: cov[(a, "propensity")] - cov[(a, "series")] for a in (0.1, 0.3, 0.5)}
        ok = gains[0.3] >= -0.02 and any(g > 0 for g in gains.values())
        detail = ", ".join(f"alpha={a}: {cov[(a, 'propensity')]:.3f} vs {cov[(a, 'series')]:.3f}" for a in gains)
        record_criterion(6, "propensity-dependent prior vs product prior", ok, detail)
        assert ok


@pytest.mark.slow
class TestDensityBias:
    def test_criterion_7(self, record_criterion):
        (_, _, cfg), = [c for c in suite_cells("dp-vs-density") if c[0] == "f0=rough"]
        assert cfg.truth.gamma == 0.3 and cfg.reps == 100
        pairs = [run_density_pair(cfg, rep) for rep in range(cfg.reps)]
        summary = summarize_density_pairs(cfg, pairs)
        frac = summary["dp_not_worse_fraction"]
        ok = frac >= 0.70
        record_criterion(7, "DP vs density prior bias", ok,
                         f"DP |bias| <= density |bias| in {frac:.0%} of pairs "
                         f"(mean bias {summary['dp_bias']:+.4f} vs {summary['density_bias']:+.4f})")
        assert ok


class TestPriorLaws:
    @staticmethod
    def _rl_variances(betabar, z, reps=100_000, chunk=5_000):
        prior = RiemannLiouvillePrior(RLPriorSpec(betabar, grid_level=12))
        design = prior.integral_design(z)
        rng = np.random.default_rng(int(betabar * 100))
        acc = np.zeros(len(z))
        acc2 = np.zeros(len(z))
        for _ in range(reps // chunk):
            vals = rng.standard_normal((chunk, design.shape[1])) @ design.T
            acc += vals.sum(axis=0)
            acc2 += (vals**2).sum(axis=0)
        mean = acc / reps
        return acc2 / reps - mean**2

    def test_criterion_8(self, record_criterion):
        z = np.array([0.25, 0.5, 1.0])
        worst = 0.0
        for betabar in (0.5, 1.0, 1.5):
            var = self._rl_variances(betabar, z)
            target = z ** (2 * betabar) / (2 * betabar)
            worst = max(worst, float(np.max(np.abs(var / target - 1))))

        inner = SeriesPrior(SeriesPriorSpec(2.0, 1000))
        a_hat = GridFunction.from_callable(lambda t: 1.5 + np.sin(2 * np.pi * t), 10)
        prior = PropensityDependentPrior(inner, a_hat, sigma_lambda=0.7)
        pts = np.array([0.05, 0.3, 0.45, 0.7, 0.95])
        N = 200_000
        draws = np.random.default_rng(8).standard_normal((N, prior.seed_dim)) @ prior.design(pts).T
        emp = np.cov(draws, rowvar=False, bias=True)
        Kw = inner.covariance(pts)
        ah = a_hat(pts)
        K = Kw + 0.7**2 * np.outer(ah, ah)
        mc_sd = np.sqrt((np.outer(np.diag(K), np.diag(K)) + K**2) / N)
        zscore = float(np.max(np.abs(emp - K) / mc_sd))

        ok = worst <= 0.02 and zscore <= 3
        record_criterion(8, "prior laws", ok,
                         f"max RL variance rel err {worst:.4f}, max covariance |z| {zscore:.2f}")
        assert ok


class TestHarnessSanity:
    def test_criterion_9(self, record_criterion):
        cfg = from_flat({"reps": 1000, "posterior_mode": "exact-normal", "master_seed": 99})
        covered = [run_replication(cfg, rep)["covered"] for rep in range(cfg.reps)]
        cov = float(np.mean(covered))
        tol = 3 * math.sqrt(0.95 * 0.05 / cfg.reps)
        ok = abs(cov - 0.95) <= tol
        record_criterion(9, "harness sanity with exact normal posterior", ok,
                         f"coverage {cov:.3f} (tolerance {tol:.4f})")
        assert ok


class TestDeterminism:
    def test_criterion_10(self, tmp_path, record_criterion):
        cfg = from_flat({"reps": 3, "master_seed": 2024, "n": 400})
        run_scenario(cfg, tmp_path / "first", jobs=1)
        run_scenario(cfg, tmp_path / "second", jobs=2)
        first = (tmp_path / "first" / "results.csv").read_bytes()
        second = (tmp_path / "second" / "results.csv").read_bytes()
        ok = first == second and len(first.splitlines()) == 4
        record_criterion(10, "bitwise reproducible results", ok,
                         f"{len(first)} bytes, identical={first == second}")
        assert ok
