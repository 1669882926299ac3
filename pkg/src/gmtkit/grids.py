"""Uniform-lattice containers: scalar samples and boolean masks.

Samples live at cell centers: the i-th cell of axis d covers
``[origin[d] + i*h, origin[d] + (i+1)*h]`` and its sample point is the
midpoint.  Integrals are midpoint sums with cell weight ``h**n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = ["GridFunction", "RasterSet"]


def _centers_1d(origin: float, count: int, h: float) -> np.ndarray:
    return origin + (np.arange(count) + 0.5) * h


@dataclass(frozen=True)
class GridFunction:
    """Real samples on a uniform lattice over a box."""

    values: np.ndarray
    origin: np.ndarray
    h: float

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        object.__setattr__(self, "origin", np.atleast_1d(np.asarray(self.origin, dtype=float)))
        if self.h <= 0:
            raise ValueError("spacing must be positive")
        if self.origin.shape != (self.values.ndim,):
            raise ValueError("origin length must match lattice dimension")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("all samples must be finite")

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def extents(self) -> tuple[int, ...]:
        return self.values.shape

    def axis_centers(self, d: int) -> np.ndarray:
        return _centers_1d(self.origin[d], self.values.shape[d], self.h)

    def meshgrid(self) -> list[np.ndarray]:
        axes = [self.axis_centers(d) for d in range(self.ndim)]
        return list(np.meshgrid(*axes, indexing="ij"))

    def points(self) -> np.ndarray:
        """All cell centers, shape (ncells, ndim)."""
        grids = self.meshgrid()
        return np.stack([g.ravel() for g in grids], axis=-1)

    @classmethod
    def from_callable(
        cls,
        fn: Callable[..., np.ndarray],
        origin: Sequence[float],
        extents: Sequence[int],
        h: float,
    ) -> "GridFunction":
        """Sample ``fn(x1, ..., xn)`` (vectorized) at cell centers."""
        origin = np.atleast_1d(np.asarray(origin, dtype=float))
        axes = [_centers_1d(origin[d], extents[d], h) for d in range(len(origin))]
        grids = np.meshgrid(*axes, indexing="ij")
        values = np.asarray(fn(*grids), dtype=float)
        return cls(values=values, origin=origin, h=h)

    def integral(self) -> float:
        return float(self.values.sum() * self.h**self.ndim)

    def index_of(self, x: Sequence[float]) -> tuple[int, ...]:
        """Lattice index of the cell containing x (clipped to the box)."""
        x = np.asarray(x, dtype=float)
        idx = np.floor((x - self.origin) / self.h).astype(int)
        idx = np.clip(idx, 0, np.array(self.extents) - 1)
        return tuple(int(i) for i in idx)

    def value_at(self, x: Sequence[float]) -> float:
        return float(self.values[self.index_of(x)])

    def interpolate(self, x: Sequence[float]) -> float:
        """Multilinear interpolation between neighbouring cell centers."""
        x = np.asarray(x, dtype=float)
        t = (x - self.origin) / self.h - 0.5
        lo = np.floor(t).astype(int)
        frac = t - lo
        ext = np.array(self.extents)
        val = 0.0
        for corner in np.ndindex(*([2] * self.ndim)):
            idx = np.clip(lo + np.array(corner), 0, ext - 1)
            w = np.prod(np.where(np.array(corner) == 1, frac, 1.0 - frac))
            val += w * self.values[tuple(idx)]
        return float(val)

    def to_csv(self, path) -> None:
        _write_lattice_csv(path, self.values, self.origin, self.h, fmt="%.17g")

    @classmethod
    def from_csv(cls, path) -> "GridFunction":
        values, origin, h = _read_lattice_csv(path)
        return cls(values=values, origin=origin, h=h)


@dataclass(frozen=True)
class RasterSet:
    """Boolean mask on a uniform lattice; a cell belongs to the set iff True."""

    mask: np.ndarray
    origin: np.ndarray
    h: float

    def __post_init__(self):
        object.__setattr__(self, "mask", np.asarray(self.mask, dtype=bool))
        object.__setattr__(self, "origin", np.atleast_1d(np.asarray(self.origin, dtype=float)))
        if self.h <= 0:
            raise ValueError("spacing must be positive")
        if self.origin.shape != (self.mask.ndim,):
            raise ValueError("origin length must match lattice dimension")
        if any(s < 1 for s in self.mask.shape):
            raise ValueError("mask must have at least one cell per axis")

    @property
    def ndim(self) -> int:
        return self.mask.ndim

    @property
    def extents(self) -> tuple[int, ...]:
        return self.mask.shape

    def axis_centers(self, d: int) -> np.ndarray:
        return _centers_1d(self.origin[d], self.mask.shape[d], self.h)

    def true_centers(self) -> np.ndarray:
        """Centers of member cells, shape (count, ndim)."""
        idx = np.argwhere(self.mask)
        return self.origin + (idx + 0.5) * self.h

    @classmethod
    def from_predicate(
        cls,
        pred: Callable[..., np.ndarray],
        origin: Sequence[float],
        extents: Sequence[int],
        h: float,
    ) -> "RasterSet":
        origin = np.atleast_1d(np.asarray(origin, dtype=float))
        axes = [_centers_1d(origin[d], extents[d], h) for d in range(len(origin))]
        grids = np.meshgrid(*axes, indexing="ij")
        return cls(mask=np.asarray(pred(*grids), dtype=bool), origin=origin, h=h)

    def complement(self) -> "RasterSet":
        return RasterSet(mask=~self.mask, origin=self.origin, h=self.h)

    def to_csv(self, path) -> None:
        _write_lattice_csv(path, self.mask.astype(int), self.origin, self.h, fmt="%d")

    @classmethod
    def from_csv(cls, path) -> "RasterSet":
        values, origin, h = _read_lattice_csv(path)
        return cls(mask=values != 0, origin=origin, h=h)


def _write_lattice_csv(path, values: np.ndarray, origin: np.ndarray, h: float, fmt: str) -> None:
    dims = "x".join(str(s) for s in values.shape)
    org = ",".join("%.17g" % v for v in origin)
    with open(path, "w") as fh:
        fh.write(f"dims={dims};origin={org};h={h:.17g}\n")
        np.savetxt(fh, values.reshape(-1, 1), fmt=fmt)


def _read_lattice_csv(path):
    with open(path) as fh:
        header = fh.readline().strip()
        fields = dict(part.split("=", 1) for part in header.split(";"))
        shape = tuple(int(s) for s in fields["dims"].split("x"))
        origin = np.array([float(s) for s in fields["origin"].split(",")])
        h = float(fields["h"])
        flat = np.loadtxt(fh, ndmin=1)
    return flat.reshape(shape), origin, h
