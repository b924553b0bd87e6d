"""Pilot estimate of the inverse propensity score from an independent split."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .funcspace import GridFunction, WaveletBasis, cell_centers
from .model import Dataset, evaluate, psi

__all__ = ["PilotSpec", "PilotEstimate", "split", "fit_pilot", "l2_error", "pilot_rate_probe"]


@dataclass(frozen=True)
class PilotSpec:
    """How to estimate ``a_hat``.

    ``bins = 0`` selects ``ceil(n_pilot ** (1 / (2 alpha_hint + d)))`` cells per axis.
    """

    kind: str = "regressogram"
    bins: int = 0
    level: int = 3
    split_fraction: float = 0.5
    clip: float = 0.05
    alpha_hint: float = 1.0

    def __post_init__(self):
        if self.kind not in ("regressogram", "series-logistic"):
            raise ValueError(f"unknown pilot kind {self.kind!r}")
        if not 0 < self.split_fraction < 1:
            raise ValueError("split_fraction must lie in (0, 1)")
        if not 0 < self.clip < 0.5:
            raise ValueError("clip must lie in (0, 0.5)")
        if self.bins < 0 or self.level < 0 or not self.alpha_hint > 0:
            raise ValueError("bins and level must be nonnegative, alpha_hint positive")

    def n_bins(self, n_pilot: int, dim: int = 1) -> int:
        if self.bins:
            return self.bins
        return max(1, math.ceil(n_pilot ** (1.0 / (2 * self.alpha_hint + dim)) - 1e-9))


@dataclass(frozen=True, eq=False)
class PilotEstimate:
    """Piecewise-constant ``a_hat`` on a ``bins**d`` partition of the cube."""

    bins: int
    values: np.ndarray
    dim: int = 1

    def __call__(self, z) -> np.ndarray:
        pts = np.asarray(z, dtype=float).reshape(-1, self.dim)
        idx = np.clip(np.floor(pts * self.bins).astype(np.int64), 0, self.bins - 1)
        flat = idx[:, 0]
        for c in range(1, self.dim):
            flat = flat * self.bins + idx[:, c]
        return self.values[flat]

    def to_grid(self, level: int) -> GridFunction:
        return GridFunction(level, self(cell_centers(level, self.dim)), self.dim)


def split(data: Dataset, fraction: float, seed) -> tuple[Dataset, Dataset]:
    """Random disjoint split into ``(pilot_set, inference_set)``."""
    n = len(data)
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    k = int(round(fraction * n))
    if k == 0 or k == n:
        raise ValueError(f"split of {n} records at {fraction} leaves an empty part")
    perm = np.random.default_rng(seed).permutation(n)
    return data[np.sort(perm[:k])], data[np.sort(perm[k:])]


def _invert(prop: np.ndarray, clip: float) -> np.ndarray:
    return 1.0 / np.clip(prop, clip, 1.0 - clip)


def _fit_regressogram(data: Dataset, spec: PilotSpec) -> PilotEstimate:
    d = data.dim
    bins = spec.n_bins(len(data), d)
    cells = np.zeros(len(data), dtype=np.int64)
    if len(data):
        idx = np.clip(np.floor(data.z * bins).astype(np.int64), 0, bins - 1)
        cells = idx[:, 0]
        for c in range(1, d):
            cells = cells * bins + idx[:, c]
    count = np.bincount(cells, minlength=bins**d).astype(float)
    hits = np.bincount(cells, weights=data.r.astype(float), minlength=bins**d)
    overall = (hits.sum() + 0.5) / (count.sum() + 1.0)
    prop = np.where(count > 0, (hits + 0.5) / (count + 1.0), overall)
    return PilotEstimate(bins, _invert(prop, spec.clip), d)


def _fit_series_logistic(data: Dataset, spec: PilotSpec) -> PilotEstimate:
    d = data.dim
    basis = WaveletBasis("haar", d, spec.level)
    X = basis.matrix(data.z, spec.level)
    r = data.r.astype(float)
    ridge = 1e-4

    def objective(w):
        eta = X @ w
        nll = np.sum(np.logaddexp(0.0, eta) - r * eta) + 0.5 * ridge * w @ w
        grad = X.T @ (psi(eta) - r) + ridge * w
        return nll, grad

    res = minimize(objective, np.zeros(X.shape[1]), jac=True, method="L-BFGS-B")
    # Haar features up to `level` are constant on the cells of grid `level + 1`
    bins = 2 ** (spec.level + 1)
    grid = basis.grid_matrix(spec.level) @ res.x
    return PilotEstimate(bins, _invert(psi(grid), spec.clip), d)


def fit_pilot(pilot_set: Dataset, spec: PilotSpec) -> PilotEstimate:
    """Fit ``a_hat``; always within ``[1, 1/clip]``."""
    if len(pilot_set) == 0:
        raise ValueError("pilot set is empty")
    if spec.kind == "regressogram":
        return _fit_regressogram(pilot_set, spec)
    return _fit_series_logistic(pilot_set, spec)


def l2_error(a_hat, a0, F=None, level: int = 12, dim: int = 1) -> float:
    """``||a_hat - a0||_{L2(F)}`` by midpoint quadrature (``F=None``: uniform)."""
    if isinstance(a0, GridFunction):
        level, dim = a0.level, a0.dim
    pts = cell_centers(level, dim)
    diff = evaluate(a_hat, pts, dim) - evaluate(a0, pts, dim)
    w = np.ones(pts.shape[0]) if F is None else evaluate(F, pts, dim)
    return math.sqrt(float(np.sum(w * diff**2)) * 2.0 ** (-level * dim))


def pilot_rate_probe(truth, spec: PilotSpec, n_list, reps: int, seed: int = 0) -> list[dict]:
    """Median ``L2(F0)`` error of the pilot over ``reps`` simulated pilot sets per ``n``."""
    from .dgp import simulate

    if list(n_list) != sorted(n_list):
        raise ValueError("n_list must be increasing")
    table = []
    for i, n in enumerate(n_list):
        errs = []
        for rep in range(reps):
            rng = np.random.default_rng(np.random.SeedSequence([seed, i, rep]))
            est = fit_pilot(simulate(truth, n, rng), spec)
            errs.append(l2_error(est, truth.a, truth.f))
        table.append({"n": int(n), "median_l2_error": float(np.median(errs)), "reps": reps})
    return table
