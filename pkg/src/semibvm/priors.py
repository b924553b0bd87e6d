"""Gaussian priors on the logit regression ``eta_b`` (and log-density ``eta_f``).

Every prior is a :class:`SeedMap`: a deterministic map from a standard
Gaussian seed vector ``theta`` to a function.  The regression priors are
linear in ``theta``, ``eta(z) = design(z) @ theta``, so one sampler serves
them all.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .funcspace import GridFunction, WaveletBasis, as_points, cell_centers
from .model import evaluate

__all__ = [
    "SeedMap",
    "ConstantSeedMap",
    "SeriesPriorSpec",
    "SeriesPrior",
    "RLPriorSpec",
    "RiemannLiouvillePrior",
    "PropensityDependentPrior",
    "ExpDensityMap",
    "series_truncation",
    "series_draw",
    "rl_draw",
    "propensity_dependent_draw",
    "exp_density_map",
    "rkhs_norm_series",
]


class SeedMap:
    """Linear map ``theta -> eta`` evaluated at arbitrary points."""

    kind = "linear"
    dim = 1

    @property
    def seed_dim(self) -> int:
        raise NotImplementedError

    def design(self, z) -> np.ndarray:
        """Matrix ``D`` with ``eta(z) = D @ theta``; shape ``(len(z), seed_dim)``."""
        raise NotImplementedError

    def eval(self, theta, z) -> np.ndarray:
        """``eta`` at ``z`` for one seed (``(p,)``) or a batch of seeds (``(S, p)``)."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape[-1] != self.seed_dim:
            raise ValueError(f"seed has length {theta.shape[-1]}, expected {self.seed_dim}")
        return theta @ self.design(z).T

    __call__ = eval

    def covariance(self, z1, z2=None) -> np.ndarray:
        d1 = self.design(z1)
        d2 = d1 if z2 is None else self.design(z2)
        return d1 @ d2.T


@dataclass(frozen=True)
class ConstantSeedMap(SeedMap):
    """One-parameter submodel ``eta(z) = scale * theta``."""

    scale: float = 1.0
    kind = "constant"

    @property
    def seed_dim(self) -> int:
        return 1

    def design(self, z) -> np.ndarray:
        return np.full((as_points(z, self.dim).shape[0], 1), self.scale)


def series_truncation(n: int, betabar: float, dim: int = 1) -> int:
    """Smallest ``J >= 0`` with ``2**J >= n**(1/(2 betabar + d))``."""
    target = n ** (1.0 / (2 * betabar + dim))
    return max(0, math.ceil(math.log2(target) - 1e-12))


@dataclass(frozen=True)
class SeriesPriorSpec:
    betabar: float
    n: int
    r: float = 0.0
    dim: int = 1

    def __post_init__(self):
        if not self.betabar > 0 or self.r < 0 or self.n < 1:
            raise ValueError("need betabar > 0, r >= 0, n >= 1")

    @property
    def truncation(self) -> int:
        return series_truncation(self.n, self.betabar, self.dim)


@dataclass(frozen=True)
class SeriesPrior(SeedMap):
    """Truncated wavelet series ``sum_{j<=J} sum_k sigma_j g_jk psi_jk`` plus a scaling term.

    ``sigma_j = 2**(-j (r + d/2))``; the scaling function gets ``sigma = 1``.
    """

    spec: SeriesPriorSpec
    family: str = "haar"
    kind = "series"

    @property
    def dim(self) -> int:
        return self.spec.dim

    @property
    def J(self) -> int:
        return self.spec.truncation

    @cached_property
    def basis(self) -> WaveletBasis:
        J = self.J
        grid = J + 1 if self.family == "haar" else max(J + 1, 10 if self.dim == 1 else 6)
        return WaveletBasis(self.family, self.dim, J, grid)

    @property
    def seed_dim(self) -> int:
        return self.basis.n_coeffs(self.J)

    @cached_property
    def sigmas(self) -> np.ndarray:
        lv = self.basis.levels(self.J)
        s = 2.0 ** (-lv * (self.spec.r + self.dim / 2))
        s[lv < 0] = 1.0
        return s

    def design(self, z) -> np.ndarray:
        return self.basis.matrix(z, self.J) * self.sigmas


@dataclass(frozen=True)
class RLPriorSpec:
    betabar: float
    grid_level: int = 12

    def __post_init__(self):
        if not self.betabar > 0:
            raise ValueError("betabar must be positive")

    @property
    def poly_terms(self) -> int:
        return math.floor(self.betabar) + 2

    @property
    def seed_dim(self) -> int:
        return 2**self.grid_level + self.poly_terms


@dataclass(frozen=True)
class RiemannLiouvillePrior(SeedMap):
    """Riemann-Liouville process released at zero, on [0, 1].

    Seeds ``0 .. floor(betabar)+1`` are the polynomial coefficients, the rest
    are standardised Brownian increments on ``2**grid_level`` cells.  The
    fractional integral is a left-point Riemann sum; the cell containing ``z``
    uses the exact cell average of the kernel.
    """

    spec: RLPriorSpec
    kind = "riemann-liouville"

    @property
    def seed_dim(self) -> int:
        return self.spec.seed_dim

    def integral_design(self, z) -> np.ndarray:
        z = as_points(z, 1)[:, 0]
        M = 2**self.spec.grid_level
        ds = 1.0 / M
        p = self.spec.betabar - 0.5
        s = np.arange(M) * ds
        m = np.minimum(np.floor(z / ds).astype(np.int64), M)
        diff = z[:, None] - s[None, :]
        full = np.arange(M)[None, :] < m[:, None]
        out = np.zeros((z.size, M))
        out[full] = diff[full] ** p
        part = (m < M) & (z - m * ds > 0)
        rows = np.nonzero(part)[0]
        w = z[rows] - m[rows] * ds
        out[rows, m[rows]] = w ** (p + 1) / ((p + 1) * ds)
        return out * math.sqrt(ds)

    def design(self, z) -> np.ndarray:
        z1 = as_points(z, 1)[:, 0]
        poly = z1[:, None] ** np.arange(self.spec.poly_terms)[None, :]
        return np.hstack([poly, self.integral_design(z1)])

    def integral_part(self, theta, z) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return theta[..., self.spec.poly_terms :] @ self.integral_design(z).T


@dataclass(frozen=True)
class PropensityDependentPrior(SeedMap):
    """``eta(z) = W(z) + lambda a_hat(z)`` with ``lambda = sigma_lambda * theta[-1]``."""

    inner: SeedMap
    a_hat: object
    sigma_lambda: float = 1.0
    kind = "propensity"

    def __post_init__(self):
        if self.sigma_lambda < 0:
            raise ValueError("sigma_lambda must be nonnegative")

    @property
    def dim(self) -> int:
        return self.inner.dim

    @property
    def seed_dim(self) -> int:
        return self.inner.seed_dim + 1

    def design(self, z) -> np.ndarray:
        col = self.sigma_lambda * evaluate(self.a_hat, z, self.dim)
        return np.hstack([self.inner.design(z), col[:, None]])

    def lam(self, theta) -> np.ndarray:
        return self.sigma_lambda * np.asarray(theta)[..., -1]


@dataclass(frozen=True)
class ExpDensityMap:
    """``f = exp(W) / int exp(W)`` on the level-``level`` grid."""

    inner: SeedMap
    level: int = 10
    kind = "exp-density"

    @property
    def seed_dim(self) -> int:
        return self.inner.seed_dim

    @property
    def dim(self) -> int:
        return self.inner.dim

    @cached_property
    def grid_design(self) -> np.ndarray:
        return self.inner.design(cell_centers(self.level, self.dim))

    def log_density(self, theta) -> np.ndarray:
        """Normalised log-density on the grid (batched over leading axes of ``theta``)."""
        w = np.asarray(theta, dtype=float) @ self.grid_design.T
        top = w.max(axis=-1, keepdims=True)
        h = 2.0 ** (-self.level * self.dim)
        lognorm = top + np.log(np.sum(np.exp(w - top), axis=-1, keepdims=True) * h)
        return w - lognorm

    def density(self, theta) -> GridFunction:
        return GridFunction(self.level, np.exp(self.log_density(theta)), self.dim)


# functional front-ends -----------------------------------------------------


def series_draw(spec: SeriesPriorSpec, theta, z, family: str = "haar") -> np.ndarray:
    return SeriesPrior(spec, family).eval(theta, z)


def rl_draw(spec: RLPriorSpec, theta, z) -> np.ndarray:
    return RiemannLiouvillePrior(spec).eval(theta, z)


def propensity_dependent_draw(prior: PropensityDependentPrior, theta, z) -> np.ndarray:
    return prior.eval(theta, z)


def exp_density_map(inner: SeedMap, theta, level: int = 10) -> GridFunction:
    return ExpDensityMap(inner, level).density(theta)


def rkhs_norm_series(prior: SeriesPrior | SeriesPriorSpec, w) -> float:
    """RKHS norm ``sqrt(sum sigma_j^-2 <w, psi_jk>^2)`` of a function in the series span.

    ``w`` is a coefficient vector in the basis layout or a :class:`GridFunction`.
    """
    if isinstance(prior, SeriesPriorSpec):
        prior = SeriesPrior(prior)
    if isinstance(w, GridFunction):
        full = WaveletBasis(prior.family, prior.dim, w.level - 1, w.level).analyze(w)
    else:
        full = np.asarray(w, dtype=float)
    p = prior.seed_dim
    if np.any(np.abs(full[p:]) > 1e-10):
        raise ValueError("function has components above the truncation level")
    coeffs = np.zeros(p)
    coeffs[: min(p, full.size)] = full[:p]
    return float(math.sqrt(np.sum((coeffs / prior.sigmas) ** 2)))
