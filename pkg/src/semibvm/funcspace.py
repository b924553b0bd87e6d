"""Functions on the unit cube [0, 1]^d.

Everything here lives on a cell-centred dyadic grid: a function at level ``L``
is stored by its values at the ``2**(L*d)`` cell centres and evaluated
off-grid by looking up the cell that contains the point.  Wavelet bases are
orthonormal periodised filter banks (Haar by default, Daubechies-4 optional)
with the nonstandard tensor construction for ``d = 2``.

Coefficient layout (``d = 1``)::

    [scaling | level 0 (1) | level 1 (2) | ... | level j (2**j) | ...]

so level ``j`` occupies ``[2**j, 2**(j+1))``.  For ``d = 2`` level ``j`` holds
``3 * 4**j`` coefficients at ``[4**j, 4**(j+1))``, ordered by wavelet type
``e`` (1: detail along z1, 2: detail along z2, 3: both) and then ``(k1, k2)``.
"""
from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "GridFunction",
    "WaveletBasis",
    "HolderSynthesisSpec",
    "as_points",
    "cell_centers",
    "cell_index",
    "evaluate_basis",
    "synthesize_holder",
    "quadrature",
    "QuadratureError",
]

_SQRT2 = math.sqrt(2.0)
_SQRT3 = math.sqrt(3.0)

FILTERS = {
    "haar": np.array([1.0, 1.0]) / _SQRT2,
    "daub4": np.array([1 + _SQRT3, 3 + _SQRT3, 3 - _SQRT3, 1 - _SQRT3]) / (4 * _SQRT2),
}

_MAGIC = b"SBGF"


class QuadratureError(ValueError):
    """Raised when a weight is not a density or the grid is too coarse."""


def as_points(z, dim: int = 1) -> np.ndarray:
    """Return ``z`` as an ``(n, dim)`` float array."""
    z = np.asarray(z, dtype=float)
    if z.ndim == 0:
        z = z.reshape(1, 1)
    elif z.ndim == 1:
        z = z.reshape(-1, 1) if dim == 1 else z.reshape(1, -1)
    if z.shape[1] != dim:
        raise ValueError(f"points have dimension {z.shape[1]}, expected {dim}")
    return z


def cell_centers(level: int, dim: int = 1) -> np.ndarray:
    """Cell centres of the level-``level`` grid, C-order, shape ``(2**(level*dim), dim)``."""
    m = 2**level
    axis = (np.arange(m) + 0.5) / m
    if dim == 1:
        return axis.reshape(-1, 1)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def cell_index(z, level: int, dim: int = 1) -> np.ndarray:
    """Flat index of the grid cell containing each point (right edge folds into the last cell)."""
    pts = as_points(z, dim)
    m = 2**level
    idx = np.clip(np.floor(pts * m).astype(np.int64), 0, m - 1)
    flat = idx[:, 0]
    for c in range(1, dim):
        flat = flat * m + idx[:, c]
    return flat


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Piecewise-constant function given by its values on a dyadic grid."""

    level: int
    values: np.ndarray
    dim: int = 1

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("only d in {1, 2} is supported")
        vals = np.array(self.values, dtype=float).ravel()
        if vals.size != 2 ** (self.level * self.dim):
            raise ValueError(
                f"expected {2 ** (self.level * self.dim)} values at level {self.level}, got {vals.size}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def n_cells(self) -> int:
        return self.values.size

    @property
    def cell_volume(self) -> float:
        return 2.0 ** (-self.level * self.dim)

    def points(self) -> np.ndarray:
        return cell_centers(self.level, self.dim)

    def as_array(self) -> np.ndarray:
        return self.values.reshape((2**self.level,) * self.dim)

    def __call__(self, z) -> np.ndarray:
        return self.values[cell_index(z, self.level, self.dim)]

    def map(self, fn) -> "GridFunction":
        return GridFunction(self.level, fn(self.values), self.dim)

    @classmethod
    def from_callable(cls, fn, level: int, dim: int = 1) -> "GridFunction":
        pts = cell_centers(level, dim)
        arg = pts[:, 0] if dim == 1 else pts
        return cls(level, np.broadcast_to(np.asarray(fn(arg), dtype=float), (pts.shape[0],)), dim)

    # serialization -------------------------------------------------------

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write(f"# level={self.level} dim={self.dim}\n")
        for v in self.values.tolist():
            buf.write(f"{v!r}\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "GridFunction":
        if isinstance(source, str) and source.startswith("#"):
            text = source
        else:
            with open(source, encoding="utf-8") as fh:
                text = fh.read()
        header, *rows = text.strip().splitlines()
        fields = dict(item.split("=") for item in header.lstrip("# ").split())
        return cls(int(fields["level"]), np.array([float(r) for r in rows]), int(fields["dim"]))

    def to_bytes(self) -> bytes:
        return _MAGIC + struct.pack("<ii", self.level, self.dim) + self.values.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "GridFunction":
        if data[:4] != _MAGIC:
            raise ValueError("not a serialized GridFunction")
        level, dim = struct.unpack("<ii", data[4:12])
        return cls(level, np.frombuffer(data[12:], dtype="<f8").copy(), dim)


# --- periodised orthonormal filter bank ----------------------------------


def _fwd_step(x: np.ndarray, axis: int, h: np.ndarray):
    x = np.moveaxis(x, axis, 0)
    m = x.shape[0]
    half = np.arange(m // 2)
    g = h[::-1] * (-1.0) ** np.arange(h.size)
    lo = np.zeros((m // 2,) + x.shape[1:])
    hi = np.zeros_like(lo)
    for i in range(h.size):
        xi = x[(2 * half + i) % m]
        lo += h[i] * xi
        hi += g[i] * xi
    return np.moveaxis(lo, 0, axis), np.moveaxis(hi, 0, axis)


def _inv_step(lo: np.ndarray, hi: np.ndarray, axis: int, h: np.ndarray):
    lo = np.moveaxis(lo, axis, 0)
    hi = np.moveaxis(hi, axis, 0)
    m = 2 * lo.shape[0]
    half = np.arange(m // 2)
    g = h[::-1] * (-1.0) ** np.arange(h.size)
    x = np.zeros((m,) + lo.shape[1:])
    for i in range(h.size):
        # 2k+i is injective in k modulo m, so plain fancy-index += is safe
        x[(2 * half + i) % m] += h[i] * lo + g[i] * hi
    return np.moveaxis(x, 0, axis)


def _dwt(x: np.ndarray, dim: int, h: np.ndarray) -> np.ndarray:
    """Full orthonormal transform over the first ``dim`` axes; trailing axes are batch."""
    m = x.shape[0]
    batch = x.shape[dim:]
    out = np.zeros((m**dim,) + batch)
    cur = x
    while m > 1:
        j = int(math.log2(m)) - 1
        if dim == 1:
            cur, hi = _fwd_step(cur, 0, h)
            out[2**j : 2 ** (j + 1)] = hi
        else:
            lo0, hi0 = _fwd_step(cur, 0, h)
            ll, lh = _fwd_step(lo0, 1, h)
            hl, hh = _fwd_step(hi0, 1, h)
            size = 4**j
            for e, blk in enumerate((hl, lh, hh)):
                out[size + e * size : size + (e + 1) * size] = blk.reshape((size,) + batch)
            cur = ll
        m //= 2
    out[0] = cur.reshape(batch)
    return out


def _idwt(c: np.ndarray, level: int, dim: int, h: np.ndarray) -> np.ndarray:
    batch = c.shape[1:]
    cur = c[0].reshape((1,) * dim + batch)
    for j in range(level):
        if dim == 1:
            hi = c[2**j : 2 ** (j + 1)]
            cur = _inv_step(cur, hi, 0, h)
        else:
            size = 4**j
            side = 2**j
            hl, lh, hh = (
                c[size + e * size : size + (e + 1) * size].reshape((side, side) + batch) for e in range(3)
            )
            lo0 = _inv_step(cur, lh, 1, h)
            hi0 = _inv_step(hl, hh, 1, h)
            cur = _inv_step(lo0, hi0, 0, h)
    return cur


@dataclass(frozen=True)
class WaveletBasis:
    """Orthonormal wavelet basis on [0, 1]^d realised on a dyadic grid.

    Parameters
    ----------
    family : {"haar", "daub4"}
    dim : 1 or 2
    max_level : int
        Highest resolution level ``J_max`` that may be addressed.
    grid_level : int, optional
        Working grid; defaults to ``max_level + 1`` (exact for Haar).
    """

    family: str = "haar"
    dim: int = 1
    max_level: int = 10
    grid_level: int | None = None

    def __post_init__(self):
        if self.family not in FILTERS:
            raise ValueError(f"unknown wavelet family {self.family!r}")
        if self.dim not in (1, 2):
            raise ValueError("only d in {1, 2} is supported")
        if self.grid_level is None:
            object.__setattr__(self, "grid_level", self.max_level + 1)
        if self.max_level < 0 or self.grid_level <= self.max_level:
            raise ValueError("need 0 <= max_level < grid_level")

    @property
    def filter(self) -> np.ndarray:
        return FILTERS[self.family]

    def n_coeffs(self, level: int) -> int:
        """Number of functions (scaling included) with resolution <= ``level``."""
        return 2 ** ((level + 1) * self.dim)

    def level_slice(self, j: int) -> slice:
        if j == -1:
            return slice(0, 1)
        base = 2 ** (j * self.dim)
        return slice(base, 2 ** ((j + 1) * self.dim))

    def index(self, j: int, k) -> int:
        """Flat coefficient index of ``psi_{jk}``; ``j = -1`` is the scaling function."""
        if j == -1:
            if k not in (0, (0,), None):
                raise IndexError("scaling function has only k = 0")
            return 0
        if not 0 <= j <= self.max_level:
            raise IndexError(f"level {j} outside [0, {self.max_level}]")
        side = 2**j
        if self.dim == 1:
            k = int(k[0] if isinstance(k, tuple) else k)
            if not 0 <= k < side:
                raise IndexError(f"k={k} outside [0, {side})")
            return side + k
        e, k1, k2 = k
        if e not in (1, 2, 3) or not (0 <= k1 < side and 0 <= k2 < side):
            raise IndexError(f"index {k} out of range at level {j}")
        size = side * side
        return size + (e - 1) * size + k1 * side + k2

    def levels(self, level: int) -> np.ndarray:
        """Resolution level of each coefficient up to ``level`` (scaling -> -1)."""
        out = np.full(self.n_coeffs(level), -1, dtype=np.int64)
        for j in range(level + 1):
            out[self.level_slice(j)] = j
        return out

    def analyze(self, f: GridFunction) -> np.ndarray:
        """Coefficients <f, psi_jk> for every basis function at ``f``'s grid level."""
        if f.dim != self.dim:
            raise ValueError("dimension mismatch")
        scale = math.sqrt(f.n_cells)
        return _dwt(f.as_array() / scale, self.dim, self.filter)

    def synthesize(self, coeffs, level: int | None = None) -> GridFunction:
        """Grid function with the given coefficients (zero-padded to the grid)."""
        level = self.grid_level if level is None else level
        full = np.zeros(2 ** (level * self.dim))
        coeffs = np.asarray(coeffs, dtype=float)
        full[: coeffs.size] = coeffs
        vals = _idwt(full, level, self.dim, self.filter) * math.sqrt(full.size)
        return GridFunction(level, vals.ravel(), self.dim)

    @cached_property
    def _grid_cache(self) -> dict:
        return {}

    def grid_matrix(self, level: int) -> np.ndarray:
        """Values of all basis functions up to ``level`` on the working grid, ``(cells, p)``."""
        cache = self._grid_cache
        if level not in cache:
            if level > self.max_level:
                raise IndexError(f"level {level} above max_level {self.max_level}")
            p = self.n_coeffs(level)
            g = self.grid_level
            eye = np.zeros((2 ** (g * self.dim), p))
            eye[np.arange(p), np.arange(p)] = 1.0
            vals = _idwt(eye, g, self.dim, self.filter) * math.sqrt(eye.shape[0])
            mat = vals.reshape(-1, p)
            mat.flags.writeable = False
            cache[level] = mat
        return cache[level]

    def matrix(self, z, level: int) -> np.ndarray:
        """Basis functions up to ``level`` evaluated at points ``z`` by cell lookup."""
        return self.grid_matrix(level)[cell_index(z, self.grid_level, self.dim)]


def evaluate_basis(basis: WaveletBasis, j: int, k, z) -> np.ndarray:
    """Value of ``psi_{jk}`` at ``z`` (array of points)."""
    idx = basis.index(j, k)
    level = max(j, 0)
    col = basis.grid_matrix(level)[:, idx]
    return col[cell_index(z, basis.grid_level, basis.dim)]


@dataclass(frozen=True)
class HolderSynthesisSpec:
    """Random wavelet series with coefficient decay ``amplitude * 2**(-j (s + d/2))``."""

    smoothness: float
    seed: int
    amplitude: float = 1.0
    basis: WaveletBasis = WaveletBasis()

    def __post_init__(self):
        if not self.smoothness > 0:
            raise ValueError("smoothness must be positive")

    def bounds(self) -> np.ndarray:
        """Per-coefficient envelope in the basis layout up to ``basis.max_level``."""
        lv = self.basis.levels(self.basis.max_level)
        env = abs(self.amplitude) * 2.0 ** (-lv * (self.smoothness + self.basis.dim / 2))
        env[0] = 0.0
        return env


def synthesize_holder(spec: HolderSynthesisSpec) -> GridFunction:
    basis = spec.basis
    p = basis.n_coeffs(basis.max_level)
    u = np.random.default_rng(spec.seed).uniform(-1.0, 1.0, size=p - 1)
    coeffs = np.concatenate([[0.0], u]) * spec.bounds()
    return basis.synthesize(coeffs)


def quadrature(f, weight: GridFunction | None = None, level: int | None = None) -> float:
    """Midpoint rule on the dyadic grid, optionally against a density ``weight``.

    ``f`` may be a :class:`GridFunction` (its own grid is used) or a callable,
    evaluated at the cell centres of ``level`` (default: the weight's level,
    else 14 for d=1 and 7 for d=2).
    """
    dim = weight.dim if weight is not None else getattr(f, "dim", 1)
    if isinstance(f, GridFunction):
        level = f.level
        vals = f.values
    else:
        if level is None:
            level = weight.level if weight is not None else (14 if dim == 1 else 7)
        pts = cell_centers(level, dim)
        vals = np.broadcast_to(np.asarray(f(pts[:, 0] if dim == 1 else pts), dtype=float), (pts.shape[0],))
    h = 2.0 ** (-level * dim)
    if weight is None:
        return float(np.sum(vals) * h)
    w = weight(cell_centers(level, dim)) if weight.level != level else weight.values
    if np.any(w < 0):
        raise QuadratureError("weight must be nonnegative")
    total = float(np.sum(w) * h)
    if abs(total - 1.0) > 1e-8:
        raise QuadratureError(f"weight integrates to {total}, not 1")
    return float(np.sum(vals * w) * h)
