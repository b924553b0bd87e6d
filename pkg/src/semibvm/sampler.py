"""Posterior draws of ``(b, F)`` and of the mean response.

The regression ``b = psi(D theta)`` is sampled by elliptical slice sampling
over the Gaussian seed ``theta``; ``F`` is drawn exactly from its Dirichlet
process posterior (the Bayesian bootstrap when the base mass is zero).  The
two are independent given the data, so each retained ``theta`` is paired with
one fresh ``F``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .funcspace import cell_index, cell_centers
from .model import Dataset, DiscreteDistribution, psi
from .priors import ExpDensityMap, PropensityDependentPrior, SeedMap

__all__ = [
    "SamplerConfig",
    "DPConfig",
    "Chain",
    "PosteriorDraws",
    "NonFiniteLikelihood",
    "compress_rows",
    "run_ess",
    "sample_b_posterior",
    "draw_F",
    "draw_dirichlet_weights",
    "draw_chi",
    "sample_f_density_posterior",
    "batch_means_se",
]

TWO_PI = 2.0 * math.pi


class NonFiniteLikelihood(FloatingPointError):
    """The log-likelihood was not finite at a chain state."""


@dataclass(frozen=True)
class SamplerConfig:
    burnin: int = 500
    draws: int = 2000
    thin: int = 2
    chains: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.burnin < 0 or self.draws < 1 or self.thin < 1 or self.chains < 1:
            raise ValueError("need burnin >= 0, draws >= 1, thin >= 1, chains >= 1")

    @property
    def steps(self) -> int:
        return self.burnin + self.draws * self.thin


@dataclass(frozen=True)
class DPConfig:
    """Dirichlet process on F; ``base_mass = 0`` gives the Bayesian bootstrap.

    The base measure is uniform on [0, 1]^d.
    """

    base_mass: float = 0.0
    stick_truncation: int = 1000

    def __post_init__(self):
        if self.base_mass < 0 or self.stick_truncation < 1:
            raise ValueError("need base_mass >= 0 and stick_truncation >= 1")


@dataclass
class Chain:
    """Retained seeds ``thetas[chain, draw]`` with their log-likelihoods."""

    thetas: np.ndarray
    loglik: np.ndarray
    evals: np.ndarray

    @property
    def pooled(self) -> np.ndarray:
        return self.thetas.reshape(-1, self.thetas.shape[-1])

    @property
    def chain_ids(self) -> np.ndarray:
        c, s = self.thetas.shape[:2]
        return np.repeat(np.arange(c), s)

    def stats(self) -> dict:
        return {
            "chains": int(self.thetas.shape[0]),
            "draws_per_chain": int(self.thetas.shape[1]),
            "mean_evals_per_step": [float(e.mean()) for e in self.evals],
            "max_evals_per_step": [int(e.max()) for e in self.evals],
        }


@dataclass
class PosteriorDraws:
    chi_draws: np.ndarray
    chain_id: np.ndarray
    lambda_draws: np.ndarray | None = None
    b_at_obs: np.ndarray | None = None
    acceptance_stats: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.chain_id.shape != self.chi_draws.shape:
            raise ValueError("one chain id per draw")
        if self.lambda_draws is not None and self.lambda_draws.shape != self.chi_draws.shape:
            raise ValueError("one lambda per draw")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            header = ["chi"] + (["lambda"] if self.lambda_draws is not None else []) + ["chain"]
            w.writerow(header)
            for i in range(self.chi_draws.size):
                row = [repr(float(self.chi_draws[i]))]
                if self.lambda_draws is not None:
                    row.append(repr(float(self.lambda_draws[i])))
                row.append(int(self.chain_id[i]))
                w.writerow(row)

    @classmethod
    def from_csv(cls, path) -> "PosteriorDraws":
        with open(path, encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        chi = np.array([float(r["chi"]) for r in rows])
        lam = np.array([float(r["lambda"]) for r in rows]) if rows and "lambda" in rows[0] else None
        return cls(chi, np.array([int(r["chain"]) for r in rows]), lam)


def batch_means_se(x, n_batches: int = 50) -> float:
    """Monte Carlo standard error of ``mean(x)`` for a correlated series."""
    x = np.asarray(x, dtype=float)
    n_batches = min(n_batches, x.size)
    size = x.size // n_batches
    means = x[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(n_batches))


def compress_rows(rows: np.ndarray, *weights: np.ndarray):
    """Merge identical design rows, summing each weight vector over the merged rows."""
    uniq, inverse = np.unique(rows, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    sums = [np.bincount(inverse, weights=w, minlength=uniq.shape[0]).astype(float) for w in weights]
    return (np.ascontiguousarray(uniq), inverse, *sums)


def run_ess(rows, kind, c1, c2, total, theta0, n_steps, rng, block: int = 256, backend=None):
    """Elliptical slice chain for ``theta ~ N(0, I)`` times ``exp(loglik(rows @ theta))``.

    Returns ``(thetas, logliks, evals)`` for every step.
    """
    impl = kernels if backend is None else kernels.get_backend(backend)
    rows = np.ascontiguousarray(rows, dtype=float)
    c1 = np.ascontiguousarray(c1, dtype=float)
    c2 = np.ascontiguousarray(c2, dtype=float)
    p = rows.shape[1]
    theta = np.array(theta0, dtype=float)
    thetas = np.empty((n_steps, p))
    lls = np.empty(n_steps)
    evals = np.zeros(n_steps, dtype=np.int64)
    start = 0
    while start < n_steps:
        B = min(block, n_steps - start)
        eta = rows @ theta
        ll = impl.loglik(eta, kind, c1, c2, total)
        if not math.isfinite(ll):
            raise NonFiniteLikelihood(f"log-likelihood {ll} at step {start}")
        nus = rng.standard_normal((B, p))
        eta_nus = np.ascontiguousarray(nus @ rows.T)
        logu = np.log(rng.random(B))
        phi0 = rng.uniform(0.0, TWO_PI, B)
        done = 0
        while done < B:
            pool = rng.random(8 * (B - done))
            step_done, _, ll = impl.ess_block(
                theta, eta, ll, nus[done:], eta_nus[done:], logu[done:], phi0[done:], pool, 0,
                kind, c1, c2, float(total),
                thetas[start + done : start + B], lls[start + done : start + B], evals[start + done : start + B],
            )
            done += step_done
        if not np.all(np.isfinite(lls[start : start + B])):
            raise NonFiniteLikelihood("non-finite log-likelihood inside the chain")
        start += B
    return thetas, lls, evals


def _seed_sequence(seed) -> np.random.SeedSequence:
    return seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)


def _run_chains(rows, kind, c1, c2, total, p, config, seed, init, backend) -> Chain:
    streams = _seed_sequence(config.seed if seed is None else seed).spawn(config.chains)
    keep = slice(config.burnin + config.thin - 1, None, config.thin)
    thetas, lls, evals = [], [], []
    for c, ss in enumerate(streams):
        rng = np.random.default_rng(ss)
        if init is None:
            theta0 = rng.standard_normal(p)
        else:
            init = np.asarray(init, dtype=float)
            theta0 = init[c] if init.ndim == 2 else init
        th, ll, ev = run_ess(rows, kind, c1, c2, total, theta0, config.steps, rng, backend=backend)
        thetas.append(th[keep])
        lls.append(ll[keep])
        evals.append(ev)
    return Chain(np.stack(thetas), np.stack(lls), np.stack(evals))


def sample_b_posterior(data: Dataset, seedmap: SeedMap, config: SamplerConfig, seed=None,
                       init=None, backend=None) -> Chain:
    """Posterior of the seed under the binomial likelihood of the ``r = 1`` records."""
    obs = data.observed
    p = seedmap.seed_dim
    if len(obs):
        y = obs.ry.astype(float)
        rows, _, succ, fail = compress_rows(seedmap.design(obs.z), y, 1.0 - y)
    else:
        rows, succ, fail = np.zeros((0, p)), np.zeros(0), np.zeros(0)
    return _run_chains(rows, kernels.BINOMIAL, succ, fail, 0.0, p, config, seed, init, backend)


def draw_dirichlet_weights(n: int, size: int, rng: np.random.Generator, base_mass: float = 0.0):
    """``size`` draws of Dirichlet(base_mass, 1, ..., 1); returns ``(W_obs, W_base)``."""
    e = rng.standard_exponential((size, n))
    g0 = rng.standard_gamma(base_mass, size) if base_mass > 0 else np.zeros(size)
    total = e.sum(axis=1) + g0
    return e / total[:, None], g0 / total


def _stick_breaking(base_mass: float, T: int, size: int, dim: int, rng):
    v = rng.beta(1.0, base_mass, (size, T))
    v[:, -1] = 1.0
    left = np.cumprod(np.hstack([np.ones((size, 1)), 1.0 - v[:, :-1]]), axis=1)
    atoms = rng.random((size, T, dim))
    return v * left, atoms


def draw_F(z_obs, dp: DPConfig, rng: np.random.Generator) -> DiscreteDistribution:
    """One draw from the DP(nu + n F_n) posterior of the covariate law."""
    z = np.asarray(z_obs, dtype=float)
    z = z.reshape(-1, 1) if z.ndim == 1 else z
    n = z.shape[0]
    if n < 1:
        raise ValueError("need at least one observation")
    w, w0 = draw_dirichlet_weights(n, 1, rng, dp.base_mass)
    if dp.base_mass == 0:
        return DiscreteDistribution(z, w[0])
    pis, atoms = _stick_breaking(dp.base_mass, dp.stick_truncation, 1, z.shape[1], rng)
    weights = np.concatenate([w[0], w0[0] * pis[0]])
    return DiscreteDistribution(np.vstack([z, atoms[0]]), weights / weights.sum())


def draw_chi(chain: Chain | np.ndarray, seedmap: SeedMap, z_obs, dp: DPConfig, rng: np.random.Generator,
             plugin: bool = False, keep_b: bool = False, chunk: int = 512) -> PosteriorDraws:
    """``chi = int b dF`` for each retained seed, with one independent ``F`` draw each.

    With ``plugin=True`` the empirical distribution replaces the DP draw.
    """
    if isinstance(chain, Chain):
        thetas, chain_id = chain.pooled, chain.chain_ids
        stats = chain.stats()
    else:
        thetas = np.atleast_2d(np.asarray(chain, dtype=float))
        chain_id, stats = np.zeros(thetas.shape[0], dtype=np.int64), {}
    z = np.asarray(z_obs, dtype=float)
    z = z.reshape(-1, 1) if z.ndim == 1 else z
    n = z.shape[0]
    rows, inverse = compress_rows(seedmap.design(z))[:2]
    S = thetas.shape[0]
    chi = np.empty(S)
    b_obs = np.empty((S, n)) if keep_b else None
    for lo in range(0, S, chunk):
        th = thetas[lo : lo + chunk]
        b = psi(th @ rows.T)[:, inverse]
        if keep_b:
            b_obs[lo : lo + chunk] = b
        if plugin:
            chi[lo : lo + chunk] = b.mean(axis=1)
            continue
        w, w0 = draw_dirichlet_weights(n, th.shape[0], rng, dp.base_mass)
        val = np.sum(w * b, axis=1)
        if dp.base_mass > 0:
            pis, atoms = _stick_breaking(dp.base_mass, dp.stick_truncation, th.shape[0], z.shape[1], rng)
            for s in range(th.shape[0]):
                val[s] += w0[s] * np.dot(pis[s], psi(seedmap.eval(th[s], atoms[s])))
        chi[lo : lo + chunk] = val
    lam = seedmap.lam(thetas) if isinstance(seedmap, PropensityDependentPrior) else None
    if chain_id.max(initial=0) > 0:
        per_chain = [chi[chain_id == c] for c in np.unique(chain_id)]
        means = np.array([x.mean() for x in per_chain])
        pooled_se = math.sqrt(sum(batch_means_se(x) ** 2 for x in per_chain))
        stats = dict(stats, chain_mean_spread=float(means.max() - means.min()), pooled_mcse=pooled_se)
    return PosteriorDraws(chi, chain_id, lam, b_obs, stats)


def sample_f_density_posterior(z_obs, densmap: ExpDensityMap, config: SamplerConfig, seed=None,
                               init=None, backend=None) -> Chain:
    """Posterior of the seed of an exponentiated Gaussian density given covariates."""
    z = np.asarray(z_obs, dtype=float)
    z = z.reshape(-1, densmap.dim) if z.size else np.zeros((0, densmap.dim))
    ncell = 2 ** (densmap.level * densmap.dim)
    counts = np.bincount(cell_index(z, densmap.level, densmap.dim), minlength=ncell).astype(float)
    vol = np.full(ncell, 2.0 ** (-densmap.level * densmap.dim))
    rows, _, cnt, volume = compress_rows(densmap.grid_design, counts, vol)
    return _run_chains(rows, kernels.DENSITY, cnt, np.log(volume), float(z.shape[0]),
                       densmap.seed_dim, config, seed, init, backend)
