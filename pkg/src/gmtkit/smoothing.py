"""Mollifier kernels, mollification, weak-derivative verification.

The standard kernel C(n) exp(1/(|x|^2 - 1)) is normalized by radial
Gauss-Legendre quadrature; kernel mass can be cross-checked by an
independent tensor-product rule.  Mollified outputs live on the shrunken
domain where the full kernel support fits (no padding).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.signal import fftconvolve

from .errors import UnderResolvedKernelError
from .grids import GridFunction
from .hausdorff import omega
from .pointwise import gradient_fd

__all__ = [
    "MollifierKernel",
    "TestFunctionBattery",
    "BatteryError",
    "make_standard_mollifier",
    "make_ball_mollifier",
    "mollify",
    "difference_quotient",
    "weak_derivative_residual",
    "mollify_commutes_with_weak_derivative",
    "bump_value",
    "bump_grad",
]


class BatteryError(ValueError):
    """A test-function support escapes the domain."""


def _unscaled_standard(r2: np.ndarray) -> np.ndarray:
    """exp(1/(r^2 - 1)) on r^2 < 1, 0 outside (unnormalized)."""
    out = np.zeros_like(r2, dtype=float)
    inside = r2 < 1.0
    out[inside] = np.exp(1.0 / (r2[inside] - 1.0))
    return out


def _gauss_legendre(a: float, b: float, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(nodes)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


@dataclass(frozen=True)
class MollifierKernel:
    """Nonnegative even unit-mass kernel supported in B(0, eps)."""

    kind: str  # "standard" | "ball-indicator"
    n: int
    eps: float
    normalization: float

    def unscaled(self, pts: np.ndarray) -> np.ndarray:
        """phi on the unit ball; pts has shape (..., n)."""
        r2 = (np.asarray(pts, dtype=float) ** 2).sum(axis=-1)
        if self.kind == "standard":
            return self.normalization * _unscaled_standard(r2)
        return np.where(r2 < 1.0, self.normalization, 0.0)

    def scaled(self, pts: np.ndarray) -> np.ndarray:
        """phi_eps(x) = eps^-n phi(x / eps)."""
        return self.unscaled(np.asarray(pts, dtype=float) / self.eps) / self.eps**self.n

    def mass(self, nodes: int = 96) -> float:
        """Independent tensor-product Gauss-Legendre integral of phi."""
        x, w = _gauss_legendre(-1.0, 1.0, nodes)
        grids = np.meshgrid(*([x] * self.n), indexing="ij")
        pts = np.stack(grids, axis=-1)
        vals = self.unscaled(pts)
        for _ in range(self.n):
            vals = vals @ w
        return float(vals)


def _standard_normalization(n: int, nodes: int = 64) -> float:
    # integral over the unit ball in spherical shells: n*omega_n*r^(n-1) dr
    r, w = _gauss_legendre(0.0, 1.0, nodes)
    integral = n * omega(n) * float((w * np.exp(1.0 / (r**2 - 1.0)) * r ** (n - 1)).sum())
    return 1.0 / integral


def make_standard_mollifier(n: int, eps: float) -> MollifierKernel:
    if n < 1 or eps <= 0:
        raise ValueError("need n >= 1 and eps > 0")
    return MollifierKernel("standard", n, eps, _standard_normalization(n))


def make_ball_mollifier(n: int, eps: float) -> MollifierKernel:
    if n < 1 or eps <= 0:
        raise ValueError("need n >= 1 and eps > 0")
    return MollifierKernel("ball-indicator", n, eps, 1.0 / omega(n))


def mollify(f: GridFunction, kernel: MollifierKernel, eps: float | None = None) -> GridFunction:
    """Discrete convolution f * phi_eps, restricted to the shrunken domain.

    The sampled kernel is renormalized to unit discrete mass so constants
    mollify to themselves exactly.
    """
    eps = kernel.eps if eps is None else eps
    if eps != kernel.eps:
        kernel = MollifierKernel(kernel.kind, kernel.n, eps, kernel.normalization)
    h = f.h
    if eps < 2 * h:
        raise UnderResolvedKernelError(f"eps = {eps} must be at least 2h = {2 * h}")
    kr = int(math.ceil(eps / h)) - 1
    offsets = np.arange(-kr, kr + 1) * h
    grids = np.meshgrid(*([offsets] * f.ndim), indexing="ij")
    K = kernel.scaled(np.stack(grids, axis=-1))
    K /= K.sum() * h**f.ndim
    # K is even, so convolution and correlation coincide
    out = fftconvolve(f.values, K, mode="valid") * h**f.ndim
    return GridFunction(values=out, origin=f.origin + kr * h, h=h)


def difference_quotient(f: GridFunction, axis: int, step: float) -> GridFunction:
    """(f(x - step e_i) - f(x)) / step on the cells where both terms exist."""
    h = f.h
    if abs(step) < h:
        raise ValueError("step must be at least one cell")
    s = int(round(step / h))
    if not math.isclose(s * h, step, rel_tol=1e-9):
        raise ValueError("step must be a lattice multiple of the spacing")
    vals = f.values
    n = vals.shape[axis]
    if abs(s) >= n:
        raise ValueError("step exceeds the domain")
    idx_cur = [slice(None)] * f.ndim
    idx_back = [slice(None)] * f.ndim
    if s > 0:
        idx_cur[axis] = slice(s, None)
        idx_back[axis] = slice(None, n - s)
        new_origin_shift = s
    else:
        idx_cur[axis] = slice(None, n + s)
        idx_back[axis] = slice(-s, None)
        new_origin_shift = 0
    dq = (vals[tuple(idx_back)] - vals[tuple(idx_cur)]) / (s * h)
    origin = f.origin.copy()
    origin[axis] += new_origin_shift * h
    return GridFunction(values=dq, origin=origin, h=h)


def bump_value(pts: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    """Unnormalized smooth bump exp(1/(u^2 - 1)), u = |x - c| / r."""
    u2 = ((np.asarray(pts, dtype=float) - center) / radius) ** 2
    u2 = u2.sum(axis=-1)
    return _unscaled_standard(u2)


def bump_grad(pts: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    """Analytic gradient of bump_value, shape (..., n)."""
    pts = np.asarray(pts, dtype=float)
    d = (pts - center) / radius
    u2 = (d**2).sum(axis=-1)
    phi = _unscaled_standard(u2)
    denom = np.where(u2 < 1.0, (u2 - 1.0) ** 2, 1.0)
    scale = np.where(u2 < 1.0, -2.0 * phi / denom, 0.0)
    return scale[..., None] * d / radius


@dataclass(frozen=True)
class TestFunctionBattery:
    """Seeded family of compactly supported smooth bumps with analytic grads."""

    centers: np.ndarray  # (count, n)
    radii: np.ndarray  # (count,)
    seed: int

    @property
    def count(self) -> int:
        return self.centers.shape[0]

    @classmethod
    def seeded(
        cls,
        box_lo: Sequence[float],
        box_hi: Sequence[float],
        count: int = 12,
        seed: int = 42,
    ) -> "TestFunctionBattery":
        lo = np.asarray(box_lo, dtype=float)
        hi = np.asarray(box_hi, dtype=float)
        rng = np.random.default_rng(seed)
        centers, radii = [], []
        for _ in range(count):
            c = lo + (0.25 + 0.5 * rng.random(lo.shape)) * (hi - lo)
            margin = float(min(np.minimum(c - lo, hi - c).min(), (hi - lo).min() / 2))
            radii.append(margin * (0.4 + 0.5 * rng.random()))
            centers.append(c)
        return cls(np.array(centers), np.array(radii), seed)

    def value(self, i: int, pts: np.ndarray) -> np.ndarray:
        return bump_value(pts, self.centers[i], float(self.radii[i]))

    def grad(self, i: int, pts: np.ndarray) -> np.ndarray:
        return bump_grad(pts, self.centers[i], float(self.radii[i]))

    def to_json(self) -> str:
        return json.dumps(
            {"centers": self.centers.tolist(), "radii": self.radii.tolist(), "seed": self.seed}
        )

    @classmethod
    def from_json(cls, text: str) -> "TestFunctionBattery":
        data = json.loads(text)
        return cls(np.array(data["centers"]), np.array(data["radii"]), int(data["seed"]))


def _check_support_inside(f: GridFunction, battery: TestFunctionBattery) -> None:
    lo = f.origin
    hi = f.origin + np.array(f.extents) * f.h
    for i in range(battery.count):
        c, r = battery.centers[i], battery.radii[i]
        if np.any(c - r < lo) or np.any(c + r > hi):
            raise BatteryError(f"bump {i} support escapes the domain")


def weak_derivative_residual(
    f: GridFunction,
    g: GridFunction,
    axis: int,
    battery: TestFunctionBattery,
) -> float:
    """max_i | int phi_i g + int (d phi_i / dx_axis) f |  (midpoint sums).

    A small residual certifies g as the weak partial derivative of f on
    the grid.
    """
    if g.values.shape != f.values.shape:
        raise ValueError("candidate must share the lattice of f")
    _check_support_inside(f, battery)
    pts = f.points()
    cell = f.h**f.ndim
    worst = 0.0
    for i in range(battery.count):
        phi = battery.value(i, pts)
        dphi = battery.grad(i, pts)[..., axis]
        residual = abs(
            float((phi * g.values.ravel()).sum() * cell)
            + float((dphi * f.values.ravel()).sum() * cell)
        )
        worst = max(worst, residual)
    return worst


def mollify_commutes_with_weak_derivative(
    f: GridFunction,
    g: GridFunction,
    kernel: MollifierKernel,
    axis: int = 0,
) -> float:
    """sup over the doubly-shrunken domain of |d_axis(f_eps) - (g)_eps|."""
    f_eps = mollify(f, kernel)
    g_eps = mollify(g, kernel)
    d_f_eps = gradient_fd(f_eps)[axis]
    # drop another kernel radius so one-sided stencils never enter
    kr = int(math.ceil(kernel.eps / f.h)) - 1
    sl = tuple(slice(kr, s - kr) for s in f_eps.extents)
    return float(np.abs(d_f_eps[sl] - g_eps.values[sl]).max())
