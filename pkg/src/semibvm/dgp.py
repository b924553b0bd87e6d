"""Synthetic truths ``(a0, b0, f0)`` with prescribed smoothness and data simulation."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .funcspace import GridFunction, HolderSynthesisSpec, WaveletBasis, cell_centers, synthesize_holder
from .model import Dataset, EfficientSummary, ParamTriple, efficient_influence, efficient_variance, psi

__all__ = ["TruthConfig", "ModelTruth", "build_truth", "simulate"]


@dataclass(frozen=True)
class TruthConfig:
    """Recipe for a synthetic truth.

    ``1/a0`` and ``b0`` are ``margin + (1 - 2 margin) * psi(offset + W)`` with
    ``W`` a random wavelet series of the stated smoothness; ``f0`` is
    ``exp(W_f)`` normalised, or uniform when ``gamma`` is ``None``.
    """

    dim: int = 1
    alpha: float = 2.0
    beta: float = 2.0
    gamma: float | None = None
    seed_a: int = 11
    seed_b: int = 12
    seed_f: int = 13
    amp_a: float = 1.0
    amp_b: float = 1.5
    amp_f: float = 1.0
    offset_a: float = 0.5
    offset_b: float = 0.3
    margin: float = 0.05
    grid_level: int | None = None
    family: str = "daub4"

    @property
    def level(self) -> int:
        if self.grid_level is not None:
            return self.grid_level
        return 12 if self.dim == 1 else 6


@dataclass(frozen=True, eq=False)
class ModelTruth:
    a: GridFunction
    b: GridFunction
    f: GridFunction | None
    alpha: float
    beta: float
    gamma: float | None = None

    @property
    def dim(self) -> int:
        return self.b.dim

    @property
    def params(self) -> ParamTriple:
        return ParamTriple(self.a, self.b, self.f, self.dim)

    @cached_property
    def summary(self) -> EfficientSummary:
        return efficient_variance(self.params)

    @property
    def chi(self) -> float:
        return self.summary.chi

    def influence(self, data: Dataset) -> np.ndarray:
        return efficient_influence(data, self.params, self.chi)


def _series(cfg: TruthConfig, smoothness: float, seed: int, amp: float) -> np.ndarray:
    level = cfg.level
    basis = WaveletBasis(cfg.family, cfg.dim, level - 1, level)
    return synthesize_holder(HolderSynthesisSpec(smoothness, seed, amp, basis)).values


def build_truth(cfg: TruthConfig) -> ModelTruth:
    level, d, m = cfg.level, cfg.dim, cfg.margin
    inv_a = m + (1 - 2 * m) * psi(cfg.offset_a + _series(cfg, cfg.alpha, cfg.seed_a, cfg.amp_a))
    b = m + (1 - 2 * m) * psi(cfg.offset_b + _series(cfg, cfg.beta, cfg.seed_b, cfg.amp_b))
    f = None
    if cfg.gamma is not None:
        w = _series(cfg, cfg.gamma, cfg.seed_f, cfg.amp_f)
        e = np.exp(w - w.max())
        f = GridFunction(level, e / (np.sum(e) * 2.0 ** (-level * d)), d)
    return ModelTruth(GridFunction(level, 1.0 / inv_a, d), GridFunction(level, b, d), f, cfg.alpha, cfg.beta, cfg.gamma)


def simulate(truth: ModelTruth, n: int, rng: np.random.Generator) -> Dataset:
    """Draw ``n`` i.i.d. observations ``(Z, R, RY)`` from the truth."""
    d = truth.dim
    if truth.f is None:
        z = rng.random((n, d))
    else:
        level = truth.f.level
        probs = truth.f.values * truth.f.cell_volume
        cells = rng.choice(probs.size, size=n, p=probs / probs.sum())
        lower = cell_centers(level, d)[cells] - 0.5 * 2.0**-level
        z = lower + rng.random((n, d)) * 2.0**-level
    prop = 1.0 / truth.a(z)
    b = truth.b(z)
    r = rng.random(n) < prop
    y = rng.random(n) < b
    return Dataset(z, r, r & y)
