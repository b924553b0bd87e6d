"""One simulated replication: data, pilot, prior, posterior, diagnostics."""
from __future__ import annotations

import math
import time
from functools import lru_cache

import numpy as np

from .config import ScenarioConfig
from .dgp import ModelTruth, build_truth, simulate
from .diagnostics import bvm_report, center, credible_interval
from .funcspace import cell_centers
from .model import psi
from .pilot import fit_pilot, split
from .priors import (
    ExpDensityMap,
    PropensityDependentPrior,
    RiemannLiouvillePrior,
    RLPriorSpec,
    SeriesPrior,
    SeriesPriorSpec,
)
from .sampler import draw_chi, sample_b_posterior, sample_f_density_posterior

__all__ = [
    "RESULT_FIELDS",
    "truth_for",
    "replication_streams",
    "build_prior",
    "run_replication",
    "aggregate",
    "run_density_pair",
    "summarize_density_pairs",
]

RESULT_FIELDS = ("rep_id", "seed", "chi_true", "chi_hat", "post_mean", "post_sd",
                 "ci_lo", "ci_hi", "covered", "ks_dist", "w1_dist")


@lru_cache(maxsize=16)
def _truth_cached(truth_cfg) -> ModelTruth:
    return build_truth(truth_cfg)


def truth_for(cfg: ScenarioConfig) -> ModelTruth:
    return _truth_cached(cfg.truth_config)


def replication_streams(cfg: ScenarioConfig, rep_id: int):
    """``(seed, data, split, chain, F)`` streams keyed on ``(master_seed, rep_id)`` only.

    Two scenarios with the same master seed therefore see the same data
    and the same split, whatever their priors.
    """
    ss = np.random.SeedSequence([cfg.master_seed, rep_id])
    seed = int(ss.generate_state(1, np.uint64)[0])
    return (seed, *ss.spawn(4))


def build_prior(cfg: ScenarioConfig, n: int, a_hat=None):
    p = cfg.prior
    inner_kind = p.inner if p.kind == "propensity" else p.kind
    if inner_kind == "series":
        inner = SeriesPrior(SeriesPriorSpec(p.betabar, n, p.r, cfg.d))
    else:
        if cfg.d != 1:
            raise ValueError("the Riemann-Liouville prior is one-dimensional")
        inner = RiemannLiouvillePrior(RLPriorSpec(p.betabar, p.grid_level))
    if p.kind != "propensity":
        return inner
    if a_hat is None:
        raise ValueError("the propensity-dependent prior needs a pilot estimate")
    return PropensityDependentPrior(inner, a_hat, p.sigma_lambda)


def _prepare(cfg: ScenarioConfig, rep_id: int):
    truth = truth_for(cfg)
    seed, data_ss, split_ss, chain_ss, f_ss = replication_streams(cfg, rep_id)
    data = simulate(truth, cfg.n, np.random.default_rng(data_ss))
    inference, a_hat = data, None
    if cfg.needs_pilot or cfg.pilot.always_split:
        if cfg.pilot.reuse:
            pilot_set = data
        else:
            pilot_set, inference = split(data, cfg.pilot.spec.split_fraction, split_ss)
        a_hat = fit_pilot(pilot_set, cfg.pilot.spec)
    return truth, seed, inference, a_hat, chain_ss, f_ss


def _posterior_mean_b(thetas, seedmap):
    def b_hat(z):
        return psi(seedmap.eval(thetas, z)).mean(axis=0)

    return b_hat


def run_replication(cfg: ScenarioConfig, rep_id: int) -> dict:
    """Simulate and analyse one data set; returns a result row plus ``runtime_ms``."""
    t0 = time.perf_counter()
    truth, seed, data, a_hat, chain_ss, f_ss = _prepare(cfg, rep_id)
    n = len(data)
    var_eff = truth.summary.var_eff
    extra = {}
    if cfg.posterior_mode == "exact-normal":
        chi_hat = center(data, truth, kind="oracle")
        size = cfg.sampler.chains * cfg.sampler.draws
        chi_draws = np.random.default_rng(chain_ss).normal(chi_hat, math.sqrt(var_eff / n), size)
    else:
        seedmap = build_prior(cfg, n, a_hat)
        chain = sample_b_posterior(data, seedmap, cfg.sampler, seed=chain_ss)
        post = draw_chi(chain, seedmap, data.z, cfg.dp, np.random.default_rng(f_ss),
                        plugin=cfg.posterior_mode == "plugin")
        chi_draws = post.chi_draws
        if post.lambda_draws is not None:
            extra["lambda_mean"] = float(post.lambda_draws.mean())
        b_hat = _posterior_mean_b(chain.pooled, seedmap) if cfg.center_kind == "aipw" else None
        chi_hat = center(data, truth, b_hat, a_hat, kind=cfg.center_kind)
    rep = bvm_report(chi_draws, chi_hat, var_eff, n, truth.chi, cfg.ci_level, cfg.center_kind)
    row = {
        "rep_id": rep_id,
        "seed": seed,
        "chi_true": truth.chi,
        "chi_hat": chi_hat,
        "post_mean": rep.post_mean,
        "post_sd": rep.post_sd,
        "ci_lo": rep.ci[0],
        "ci_hi": rep.ci[1],
        "covered": rep.covered,
        "ks_dist": rep.ks_dist,
        "w1_dist": rep.w1_dist,
        "n_inference": n,
        **extra,
    }
    row["runtime_ms"] = 1000.0 * (time.perf_counter() - t0)
    return row


def _binomial(flags) -> tuple[float, float]:
    x = np.asarray(flags, dtype=float)
    p = float(x.mean())
    return p, math.sqrt(p * (1 - p) / x.size)


def aggregate(cfg: ScenarioConfig, rows) -> dict:
    """Coverage, posterior-sd calibration and distance summaries over replications."""
    rows = list(rows)
    if not rows:
        raise ValueError("no replications to aggregate")
    truth = truth_for(cfg)
    var_eff = truth.summary.var_eff
    cov, cov_se = _binomial([r["covered"] for r in rows])
    n_inf = np.array([r["n_inference"] for r in rows], dtype=float)
    post_sd = np.array([r["post_sd"] for r in rows])
    return {
        "reps": len(rows),
        "chi_true": truth.chi,
        "var_eff": var_eff,
        "coverage": cov,
        "coverage_se": cov_se,
        "sd_ratio": float(np.mean(post_sd * np.sqrt(n_inf)) / math.sqrt(var_eff)),
        "median_ks": float(np.median([r["ks_dist"] for r in rows])),
        "median_w1": float(np.median([r["w1_dist"] for r in rows])),
        "bias": float(np.mean([r["post_mean"] - r["chi_true"] for r in rows])),
        "center_bias": float(np.mean([r["chi_hat"] - r["chi_true"] for r in rows])),
        "runtime_ms_total": float(sum(r.get("runtime_ms", 0.0) for r in rows)),
    }


def run_density_pair(cfg: ScenarioConfig, rep_id: int) -> dict:
    """Same data and the same ``b`` draws under a DP prior on F and a density prior on f."""
    t0 = time.perf_counter()
    truth, seed, data, a_hat, chain_ss, f_ss = _prepare(cfg, rep_id)
    n = len(data)
    seedmap = build_prior(cfg, n, a_hat)
    chain = sample_b_posterior(data, seedmap, cfg.sampler, seed=chain_ss)
    dp_ss, dens_ss = f_ss.spawn(2)
    dp = draw_chi(chain, seedmap, data.z, cfg.dp, np.random.default_rng(dp_ss)).chi_draws

    dens = cfg.density
    densmap = ExpDensityMap(SeriesPrior(SeriesPriorSpec(dens.gammabar, n, 0.0, cfg.d)), dens.level)
    fchain = sample_f_density_posterior(data.z, densmap, cfg.sampler, seed=dens_ss)
    grid = cell_centers(dens.level, cfg.d)
    b_grid = psi(seedmap.eval(chain.pooled, grid))
    f_grid = np.exp(densmap.log_density(fchain.pooled))
    density = np.sum(b_grid * f_grid, axis=1) * 2.0 ** (-dens.level * cfg.d)

    out = {"rep_id": rep_id, "seed": seed, "chi_true": truth.chi}
    for name, draws in (("dp", dp), ("density", density)):
        lo, hi = credible_interval(draws, cfg.ci_level)
        out[f"{name}_post_mean"] = float(draws.mean())
        out[f"{name}_post_sd"] = float(draws.std(ddof=1))
        out[f"{name}_covered"] = bool(lo <= truth.chi <= hi)
    out["runtime_ms"] = 1000.0 * (time.perf_counter() - t0)
    return out


def summarize_density_pairs(cfg: ScenarioConfig, pairs) -> dict:
    pairs = list(pairs)
    chi0 = truth_for(cfg).chi
    n = cfg.n if not (cfg.needs_pilot or cfg.pilot.always_split) or cfg.pilot.reuse else None
    out = {"reps": len(pairs), "chi_true": chi0}
    for name in ("dp", "density"):
        bias = np.array([p[f"{name}_post_mean"] - chi0 for p in pairs])
        cov, se = _binomial([p[f"{name}_covered"] for p in pairs])
        out[f"{name}_coverage"] = cov
        out[f"{name}_coverage_se"] = se
        out[f"{name}_bias"] = float(bias.mean())
        if n is not None:
            out[f"{name}_root_n_abs_bias"] = float(abs(bias.mean()) * math.sqrt(n))
    dp_abs = np.array([abs(p["dp_post_mean"] - chi0) for p in pairs])
    dens_abs = np.array([abs(p["density_post_mean"] - chi0) for p in pairs])
    out["dp_not_worse_fraction"] = float(np.mean(dp_abs <= dens_abs))
    return out
