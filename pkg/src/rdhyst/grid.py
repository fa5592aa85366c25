"""Uniform grid on [0, 1] and vector-valued grid functions."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

__all__ = ["Grid", "GridFunction", "interpolate"]


@dataclass(frozen=True)
class Grid:
    """n uniform cells on [0, 1]; n + 1 nodes x_i = i/n."""

    n: int

    def __post_init__(self):
        if self.n < 8:
            raise ValueError(f"grid needs n >= 8 cells, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n + 1) / self.n

    @property
    def npts(self) -> int:
        return self.n + 1

    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.n + 1, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w


@dataclass
class GridFunction:
    """Values on the nodes of a Grid, shape (n+1, d)."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.ndim != 2 or vals.shape[0] != self.grid.npts:
            raise ValueError(
                f"values must have shape ({self.grid.npts}, d), got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function values must be finite")
        self.values = vals

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_callable(cls, grid: Grid, fn) -> "GridFunction":
        vals = np.asarray(fn(grid.x), dtype=np.float64)
        if vals.ndim == 1:
            vals = vals[:, None]
        return cls(grid, vals)

    def copy(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.copy())


def interpolate(f: GridFunction, x) -> np.ndarray:
    """Piecewise-linear interpolation at x in [0, 1]; vector-valued result."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise DomainError(f"interpolation point outside [0, 1]: {x}")
    n = f.grid.n
    pos = x * n
    i0 = np.minimum(pos.astype(np.int64), n - 1)
    frac = pos - i0
    lo = f.values[i0]
    hi = f.values[i0 + 1]
    if x.ndim == 0:
        return lo + frac * (hi - lo)
    return lo + frac[..., None] * (hi - lo)
