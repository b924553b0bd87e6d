"""Binary missing-at-random model: likelihood, mean response, efficient influence.

Observations are ``X = (Z, R, RY)`` with ``P(R=1|Z) = 1/a(Z)`` and
``P(Y=1|Z) = b(Z)``.  The estimand is ``chi = int b dF``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Union

import numpy as np

from .funcspace import GridFunction, QuadratureError, as_points, cell_centers

__all__ = [
    "PROB_CLIP",
    "Observation",
    "Dataset",
    "DiscreteDistribution",
    "ParamTriple",
    "EfficientSummary",
    "LogLikelihood",
    "psi",
    "psi_inv",
    "evaluate",
    "log_likelihood",
    "chi_functional",
    "efficient_influence",
    "efficient_variance",
    "aipw_estimate",
]

PROB_CLIP = 1e-12

Function = Union[GridFunction, Callable]


def psi(x):
    """Logistic function, computed without overflow for large ``|x|``."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def psi_inv(p):
    p = np.asarray(p, dtype=float)
    out = np.log(p) - np.log1p(-p)
    return out if out.ndim else float(out)


class Observation(NamedTuple):
    z: np.ndarray
    r: int
    ry: int


@dataclass(frozen=True, eq=False)
class Dataset:
    """i.i.d. records ``(z, r, r*y)``; ``z`` is stored as ``(n, d)``."""

    z: np.ndarray
    r: np.ndarray
    ry: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=np.int8).ravel()
        ry = np.asarray(self.ry, dtype=np.int8).ravel()
        z = np.asarray(self.z, dtype=float)
        z = z.reshape(-1, 1) if z.ndim == 1 else z
        if not (z.shape[0] == r.size == ry.size):
            raise ValueError("z, r and ry must have the same length")
        if np.any((r != 0) & (r != 1)) or np.any((ry != 0) & (ry != 1)):
            raise ValueError("r and ry must be 0/1 indicators")
        if np.any(ry > r):
            raise ValueError("ry must be 0 whenever r is 0")
        if np.any(z < 0) or np.any(z > 1):
            raise ValueError("covariates must lie in [0, 1]^d")
        for name, arr in (("z", z), ("r", r), ("ry", ry)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def from_observations(cls, obs) -> "Dataset":
        obs = list(obs)
        return cls(np.array([np.atleast_1d(o.z) for o in obs]), [o.r for o in obs], [o.ry for o in obs])

    def __len__(self) -> int:
        return self.r.size

    def __getitem__(self, idx) -> Union["Dataset", Observation]:
        if np.isscalar(idx):
            return Observation(self.z[idx], int(self.r[idx]), int(self.ry[idx]))
        return Dataset(self.z[idx], self.r[idx], self.ry[idx])

    @property
    def dim(self) -> int:
        return self.z.shape[1]

    @property
    def observed(self) -> "Dataset":
        """Records with ``r = 1``; the only ones informative about ``b``."""
        return self[self.r == 1]

    def concat(self, other: "Dataset") -> "Dataset":
        return Dataset(np.vstack([self.z, other.z]), np.r_[self.r, other.r], np.r_[self.ry, other.ry])


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Finitely supported distribution (empirical measure or a Dirichlet draw)."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        atoms = atoms.reshape(-1, 1) if atoms.ndim == 1 else atoms
        w = np.asarray(self.weights, dtype=float).ravel()
        if atoms.shape[0] != w.size:
            raise ValueError("one weight per atom")
        if np.any(w < 0) or abs(math.fsum(w) - 1.0) > 1e-12:
            raise ValueError("weights must be a probability vector")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", w)

    @classmethod
    def empirical(cls, z) -> "DiscreteDistribution":
        z = np.asarray(z, dtype=float)
        n = z.shape[0]
        return cls(z, np.full(n, 1.0 / n))


def evaluate(fn: Function, z, dim: int = 1) -> np.ndarray:
    """Evaluate a GridFunction or a vectorised callable at points ``z``.

    Callables receive a 1-d array when ``d = 1`` and an ``(n, d)`` array otherwise.
    """
    if isinstance(fn, GridFunction):
        dim = fn.dim
    pts = as_points(z, dim)
    if isinstance(fn, GridFunction):
        return fn(pts)
    val = fn(pts[:, 0] if dim == 1 else pts)
    return np.broadcast_to(np.asarray(val, dtype=float), (pts.shape[0],)).copy()


@dataclass(frozen=True, eq=False)
class ParamTriple:
    """Model parameter ``(a, b, F)``.

    ``a`` is the inverse propensity score, ``b`` the regression of ``Y`` on
    ``Z``, ``F`` a density on the grid (``GridFunction``), a
    :class:`DiscreteDistribution`, or ``None`` for the uniform law.
    """

    a: Function
    b: Function
    F: GridFunction | DiscreteDistribution | None = None
    dim: int = 1

    def validate(self, z, margin: float = 1e-3, density_margin: float | None = None) -> None:
        inv_a = 1.0 / evaluate(self.a, z, self.dim)
        b = evaluate(self.b, z, self.dim)
        if np.any(inv_a <= margin) or np.any(inv_a >= 1 - margin):
            raise ValueError(f"1/a not inside ({margin}, {1 - margin})")
        if np.any(b <= margin) or np.any(b >= 1 - margin):
            raise ValueError(f"b not inside ({margin}, {1 - margin})")
        if density_margin is not None and isinstance(self.F, GridFunction):
            f = self.F.values
            if np.any(f <= density_margin) or np.any(f >= 1 / density_margin):
                raise ValueError("density not bounded away from 0 and infinity")


class EfficientSummary(NamedTuple):
    chi: float
    var_eff: float
    var_b_part: float
    var_f_part: float


class LogLikelihood(NamedTuple):
    total: float
    a: float
    b: float
    f: float


def _log_prob(p: np.ndarray, name: str) -> np.ndarray:
    if np.any(p <= 0) or np.any(p >= 1):
        raise ValueError(f"{name} probabilities must lie strictly inside (0, 1)")
    return np.log(np.clip(p, PROB_CLIP, 1 - PROB_CLIP))


def log_likelihood(data: Dataset, params: ParamTriple, include_density: bool = False) -> LogLikelihood:
    """Log-likelihood and its additive ``a``, ``b`` and ``f`` parts."""
    z = data.z
    r = data.r.astype(float)
    ry = data.ry.astype(float)
    pr = 1.0 / evaluate(params.a, z, params.dim)
    ell_a = math.fsum(r * _log_prob(pr, "propensity") + (1 - r) * _log_prob(1 - pr, "propensity"))
    obs = data.r == 1
    if obs.any():
        b = evaluate(params.b, z[obs], params.dim)
        y = ry[obs]
        ell_b = math.fsum(y * _log_prob(b, "regression") + (1 - y) * _log_prob(1 - b, "regression"))
    else:
        ell_b = 0.0
    ell_f = 0.0
    if include_density:
        if not isinstance(params.F, GridFunction) and params.F is not None:
            raise ValueError("density component requires F given by a density")
        if isinstance(params.F, GridFunction):
            f = params.F(z)
            if np.any(f <= 0):
                raise ValueError("density must be positive at the data")
            ell_f = math.fsum(np.log(f))
    return LogLikelihood(math.fsum([ell_a, ell_b, ell_f]), ell_a, ell_b, ell_f)


def _density_integral(vals_fn, F: GridFunction | None, dim: int, level: int) -> float:
    pts = cell_centers(level, dim)
    vals = vals_fn(pts)
    h = 2.0 ** (-level * dim)
    if F is None:
        return float(np.sum(vals) * h)
    w = F(pts)
    return float(np.sum(vals * w) * h)


def _quad_level(fns, F, dim: int, level: int | None) -> int:
    if level is not None:
        return level
    levels = [g.level for g in (*fns, F) if isinstance(g, GridFunction)]
    return max(levels) if levels else (14 if dim == 1 else 7)


def chi_functional(b: Function, F=None, level: int | None = None, tol: float | None = None, dim: int = 1) -> float:
    """Mean response ``int b dF``.

    Weighted sum for a :class:`DiscreteDistribution`, midpoint quadrature for a
    density (``None`` = uniform).  With ``tol``, the estimate is compared with
    the next-coarser grid and :class:`QuadratureError` is raised if they differ
    by more than ``tol``.
    """
    if isinstance(F, DiscreteDistribution):
        return math.fsum(F.weights * evaluate(b, F.atoms, F.atoms.shape[1]))
    if isinstance(F, GridFunction):
        dim = F.dim
    level = _quad_level([b], F, dim, level)
    val = _density_integral(lambda p: evaluate(b, p, dim), F, dim, level)
    if tol is not None and level > 1:
        coarse = _density_integral(lambda p: evaluate(b, p, dim), F, dim, level - 1)
        if abs(val - coarse) > tol:
            raise QuadratureError(f"grid level {level} too coarse for tolerance {tol}")
    return val


def efficient_influence(obs: Observation | Dataset, params: ParamTriple, chi: float):
    """``r a(z) (y - b(z)) + b(z) - chi`` for one observation or a whole dataset."""
    if isinstance(obs, Observation):
        val = efficient_influence(Dataset([np.atleast_1d(obs.z)], [obs.r], [obs.ry]), params, chi)
        return float(val[0])
    a = evaluate(params.a, obs.z, params.dim)
    b = evaluate(params.b, obs.z, params.dim)
    r = obs.r.astype(float)
    return r * a * (obs.ry - b) + b - chi


def efficient_variance(truth: ParamTriple, level: int | None = None) -> EfficientSummary:
    """Efficient variance ``int a b (1-b) dF + int b^2 dF - chi^2`` and its two parts."""
    F = truth.F
    dim = truth.dim
    if isinstance(F, DiscreteDistribution):
        w = F.weights
        a = evaluate(truth.a, F.atoms, dim)
        b = evaluate(truth.b, F.atoms, dim)
        chi = math.fsum(w * b)
        var_b = math.fsum(w * a * b * (1 - b))
        var_f = math.fsum(w * (b - chi) ** 2)
    else:
        level = _quad_level([truth.a, truth.b], F, dim, level)
        pts = cell_centers(level, dim)
        a = evaluate(truth.a, pts, dim)
        b = evaluate(truth.b, pts, dim)
        w = np.ones(pts.shape[0]) if F is None else F(pts)
        h = 2.0 ** (-level * dim)
        total = float(np.sum(w) * h)
        if abs(total - 1) > 1e-8:
            raise QuadratureError(f"covariate density integrates to {total}")
        chi = float(np.sum(w * b) * h)
        var_b = float(np.sum(w * a * b * (1 - b)) * h)
        var_f = float(np.sum(w * (b - chi) ** 2) * h)
    return EfficientSummary(chi, var_b + var_f, var_b, var_f)


def aipw_estimate(data: Dataset, a_hat: Function, b_hat: Function) -> float:
    """Augmented inverse-probability-weighted estimate of the mean response."""
    a = evaluate(a_hat, data.z, data.dim)
    b = evaluate(b_hat, data.z, data.dim)
    r = data.r.astype(float)
    terms = r * a * (data.ry - r * b) + b
    return math.fsum(terms) / len(data)
