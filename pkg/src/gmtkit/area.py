"""Linear and parametric area formulas, multiplicity, change of variables.

J(T) = sqrt(det(T^t T)) is computed two independent ways (singular values
and the Cauchy-Binet minor expansion) so each can certify the other.
Parametric surface integrals are midpoint cell sums of the pointwise
Jacobian; cell centers never touch chart seams or coordinate
singularities, so angular charts integrate over the open box directly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NonConvergenceError
from .grids import GridFunction, RasterSet
from .hausdorff import SingularMapError, lebesgue_measure
from .pointwise import gradient_fd

__all__ = [
    "LinearMap",
    "ParametricMap",
    "MultiplicityProfile",
    "j_linear",
    "cauchy_binet",
    "image_measure_linear",
    "builtin_map",
    "curve_length",
    "graph_area",
    "surface_measure",
    "multiplicity",
    "area_formula_with_multiplicity",
    "change_of_variables",
    "jacobian_l1_check",
]


@dataclass(frozen=True)
class LinearMap:
    """T: R^k -> R^n as an n x k matrix, k <= n."""

    matrix: np.ndarray

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        object.__setattr__(self, "matrix", M)
        if not np.all(np.isfinite(M)):
            raise ValueError("matrix entries must be finite")
        if M.shape[1] > M.shape[0]:
            raise ValueError("need k <= n (tall or square matrix)")

    @property
    def k(self) -> int:
        return self.matrix.shape[1]

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def j_linear(T: LinearMap) -> float:
    """J(T) = sqrt(det(T^t T)), as the product of singular values."""
    return float(np.prod(np.linalg.svd(T.matrix, compute_uv=False)))


def cauchy_binet(T: LinearMap) -> float:
    """J(T) through the minor expansion: sqrt of the sum of squared
    k x k minors over all row subsets.
    """
    M = T.matrix
    k = T.k
    total = 0.0
    for rows in itertools.combinations(range(T.n), k):
        total += float(np.linalg.det(M[list(rows), :])) ** 2
    return math.sqrt(total)


def image_measure_linear(T: LinearMap, E: RasterSet) -> float:
    """H^k(T(E)) = J(T) * Lebesgue(E) for injective T."""
    if E.ndim != T.k:
        raise ValueError("raster dimension must equal k")
    J = j_linear(T)
    if J <= 0:
        raise SingularMapError("T must be injective (J(T) > 0)")
    return J * lebesgue_measure(E)


@dataclass(frozen=True)
class ParametricMap:
    """Black-box map Phi: box in R^k -> R^n with optional analytic Jacobian.

    ``evaluator`` maps an (N, k) array of points to an (N, n) array;
    ``jacobian`` (optional) maps it to (N, n, k).  Injectivity is asserted
    by the caller, never detected.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    domain_lo: np.ndarray
    domain_hi: np.ndarray
    n: int
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None
    injective: bool = False

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.domain_lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.domain_hi, dtype=float))
        object.__setattr__(self, "domain_lo", lo)
        object.__setattr__(self, "domain_hi", hi)
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise ValueError("domain box must be nondegenerate")
        if self.k > self.n:
            raise ValueError("need k <= n")

    @property
    def k(self) -> int:
        return self.domain_lo.shape[0]

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        return np.asarray(self.evaluator(np.atleast_2d(np.asarray(pts, dtype=float))), dtype=float)

    def jacobian_at(self, pts: np.ndarray, step: float) -> np.ndarray:
        """(N, n, k) Jacobian: analytic if available, else central differences."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.jacobian is not None:
            return np.asarray(self.jacobian(pts), dtype=float)
        cols = []
        for d in range(self.k):
            e = np.zeros(self.k)
            e[d] = step
            cols.append((self(pts + e) - self(pts - e)) / (2 * step))
        return np.stack(cols, axis=-1)

    def j_at(self, pts: np.ndarray, step: float) -> np.ndarray:
        """Pointwise J(Phi) = sqrt(det(DPhi^t DPhi)), shape (N,)."""
        J = self.jacobian_at(pts, step)
        if self.k == 1:
            return np.sqrt((J[:, :, 0] ** 2).sum(axis=1))
        G = np.einsum("pik,pil->pkl", J, J)
        return np.sqrt(np.maximum(np.linalg.det(G), 0.0))

    def signed_det(self, pts: np.ndarray, step: float) -> np.ndarray:
        if self.k != self.n:
            raise ValueError("signed determinant needs k = n")
        return np.linalg.det(self.jacobian_at(pts, step))


def builtin_map(name: str, **params) -> ParametricMap:
    """Named maps: helix, polar, sphere, fold, square.

    helix: x -> (cos x, sin x, x) on ]lo, hi[ (default ]0, 1[);
    polar: (r, theta) -> (r cos theta, r sin theta) on ]0,1[ x ]-pi,pi[;
    sphere: (theta, phi) -> unit sphere on ]0,pi[ x ]0,2pi[;
    fold: piecewise-linear tent with ``laps`` laps on ]0, 1[;
    square: x -> x^2 on ]lo, hi[ (default ]-1, 1[).
    """
    if name == "helix":
        lo = float(params.get("lo", 0.0))
        hi = float(params.get("hi", 1.0))
        return ParametricMap(
            evaluator=lambda p: np.stack(
                [np.cos(p[:, 0]), np.sin(p[:, 0]), p[:, 0]], axis=1
            ),
            domain_lo=[lo],
            domain_hi=[hi],
            n=3,
            jacobian=lambda p: np.stack(
                [-np.sin(p[:, 0]), np.cos(p[:, 0]), np.ones(len(p))], axis=1
            )[:, :, None],
            injective=True,
        )
    if name == "polar":
        r_hi = float(params.get("r_hi", 1.0))
        return ParametricMap(
            evaluator=lambda p: np.stack(
                [p[:, 0] * np.cos(p[:, 1]), p[:, 0] * np.sin(p[:, 1])], axis=1
            ),
            domain_lo=[0.0, -math.pi],
            domain_hi=[r_hi, math.pi],
            n=2,
            jacobian=lambda p: np.stack(
                [
                    np.stack([np.cos(p[:, 1]), -p[:, 0] * np.sin(p[:, 1])], axis=1),
                    np.stack([np.sin(p[:, 1]), p[:, 0] * np.cos(p[:, 1])], axis=1),
                ],
                axis=1,
            ),
            injective=True,
        )
    if name == "sphere":
        def sphere_eval(p):
            th, ph = p[:, 0], p[:, 1]
            return np.stack(
                [np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=1
            )

        def sphere_jac(p):
            th, ph = p[:, 0], p[:, 1]
            d_th = np.stack([np.cos(th) * np.cos(ph), np.cos(th) * np.sin(ph), -np.sin(th)], axis=1)
            d_ph = np.stack([-np.sin(th) * np.sin(ph), np.sin(th) * np.cos(ph), np.zeros(len(p))], axis=1)
            return np.stack([d_th, d_ph], axis=2)

        return ParametricMap(
            evaluator=sphere_eval,
            domain_lo=[0.0, 0.0],
            domain_hi=[math.pi, 2 * math.pi],
            n=3,
            jacobian=sphere_jac,
            injective=True,
        )
    if name == "fold":
        laps = int(params.get("laps", 2))
        if laps < 1:
            raise ValueError("laps must be >= 1")

        def fold_eval(p):
            u = np.clip(p[:, 0], 0.0, 1.0) * laps
            m = np.floor(u).astype(int)
            frac = u - m
            val = np.where(m % 2 == 0, frac, 1.0 - frac)
            return val[:, None]

        return ParametricMap(
            evaluator=fold_eval,
            domain_lo=[0.0],
            domain_hi=[1.0],
            n=1,
            injective=laps == 1,
        )
    if name == "square":
        lo = float(params.get("lo", -1.0))
        hi = float(params.get("hi", 1.0))
        return ParametricMap(
            evaluator=lambda p: p[:, :1] ** 2,
            domain_lo=[lo],
            domain_hi=[hi],
            n=1,
            jacobian=lambda p: (2 * p[:, :1])[:, :, None],
            injective=lo >= 0 or hi <= 0,
        )
    raise ValueError(f"unknown builtin map {name!r}")


def curve_length(phi: ParametricMap, nodes: int = 1024) -> float:
    """H^1 of an injective curve: Gauss-Legendre quadrature of |dPhi/dt|."""
    if phi.k != 1:
        raise ValueError("curve_length needs a 1-parameter map")
    if not phi.injective:
        raise ValueError("curve must be flagged injective")
    a, b = float(phi.domain_lo[0]), float(phi.domain_hi[0])
    x, w = np.polynomial.legendre.leggauss(nodes)
    t = 0.5 * (b - a) * x + 0.5 * (a + b)
    speed = phi.j_at(t[:, None], step=(b - a) * 1e-6)
    return float(0.5 * (b - a) * (w * speed).sum())


def graph_area(f: GridFunction, mask: np.ndarray | None = None) -> float:
    """Area of the graph of f over its box: sum of h^k sqrt(1 + |grad f|^2)."""
    gn2 = (gradient_fd(f) ** 2).sum(axis=0)
    integrand = np.sqrt(1.0 + gn2)
    if mask is not None:
        integrand = np.where(mask, integrand, 0.0)
    return float(integrand.sum() * f.h**f.ndim)


def _cell_sum(phi: ParametricMap, E: RasterSet | None, m: int) -> float:
    lo, hi = phi.domain_lo, phi.domain_hi
    k = phi.k
    steps = (hi - lo) / m
    axes = [lo[d] + (np.arange(m) + 0.5) * steps[d] for d in range(k)]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    J = phi.j_at(pts, step=float(steps.min()) / 4)
    if E is not None:
        idx = np.floor((pts - E.origin) / E.h).astype(int)
        inside = np.all((idx >= 0) & (idx < np.array(E.extents)), axis=1)
        member = np.zeros(len(pts), dtype=bool)
        member[inside] = E.mask[tuple(idx[inside].T)]
        J = np.where(member, J, 0.0)
    return float(J.sum() * np.prod(steps))


def surface_measure(
    phi: ParametricMap, E: RasterSet | None = None, m: int = 256
) -> float:
    """H^k(Phi(E)) = int_E J(Phi) for injective Phi: midpoint cell sums at
    m and 2m cells per axis, Richardson-combined.
    """
    if not phi.injective:
        raise ValueError("surface_measure needs the injectivity flag; "
                         "use the multiplicity-weighted operations otherwise")
    coarse = _cell_sum(phi, E, m)
    fine = _cell_sum(phi, E, 2 * m)
    return (4 * fine - coarse) / 3


@dataclass(frozen=True)
class MultiplicityProfile:
    """Preimage count N(Phi, E, y) with its refinement trace."""

    y: np.ndarray
    counts: tuple[int, ...]  # one per partition depth
    count: int | None  # stabilized value, None if the trace never settled
    stabilized: bool


def _hit_components(hits: np.ndarray) -> int:
    """Connected components (full adjacency) of a boolean partition mask."""
    if hits.ndim == 1:
        h = hits.astype(np.int8)
        return int(h[0] + ((h[1:] == 1) & (h[:-1] == 0)).sum())
    from scipy import ndimage

    structure = np.ones((3,) * hits.ndim, dtype=int)
    _, n = ndimage.label(hits, structure=structure)
    return int(n)


def _partition_hits(
    phi: ParametricMap, E: RasterSet | None, depth: int, y: np.ndarray
) -> np.ndarray:
    """Boolean mask over the depth-indexed partition: cell image bounding
    box (corner samples, inflated by half its own extent) contains y.
    """
    lo, hi = phi.domain_lo, phi.domain_hi
    k = phi.k
    m = 2**depth
    steps = (hi - lo) / m
    corner_axes = [lo[d] + np.arange(m + 1) * steps[d] for d in range(k)]
    grids = np.meshgrid(*corner_axes, indexing="ij")
    corners = np.stack([g.ravel() for g in grids], axis=-1)
    vals = phi(corners).reshape(*(m + 1,) * k, phi.n)
    box_lo = vals.copy()
    box_hi = vals.copy()
    for d in range(k):
        sl_a = [slice(None)] * (k + 1)
        sl_b = [slice(None)] * (k + 1)
        sl_a[d] = slice(None, box_lo.shape[d] - 1)
        sl_b[d] = slice(1, None)
        box_lo = np.minimum(box_lo[tuple(sl_a)], box_lo[tuple(sl_b)])
        box_hi = np.maximum(box_hi[tuple(sl_a)], box_hi[tuple(sl_b)])
    pad = 0.25 * (box_hi - box_lo) + 1e-12
    hits = np.all((y >= box_lo - pad) & (y <= box_hi + pad), axis=-1)
    if E is not None:
        center_axes = [lo[d] + (np.arange(m) + 0.5) * steps[d] for d in range(k)]
        cgrids = np.meshgrid(*center_axes, indexing="ij")
        centers = np.stack([g.ravel() for g in cgrids], axis=-1)
        idx = np.floor((centers - E.origin) / E.h).astype(int)
        inside = np.all((idx >= 0) & (idx < np.array(E.extents)), axis=1)
        member = np.zeros(len(centers), dtype=bool)
        member[inside] = E.mask[tuple(idx[inside].T)]
        hits = hits & member.reshape(hits.shape)
    return hits


def multiplicity(
    phi: ParametricMap,
    y: Sequence[float],
    E: RasterSet | None = None,
    depths: Sequence[int] = range(4, 12),
) -> MultiplicityProfile:
    """N(Phi, E, y): connected clusters of partition cells whose image box
    contains y, refined until two consecutive depths agree.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    counts = []
    for depth in depths:
        counts.append(_hit_components(_partition_hits(phi, E, depth, y)))
        if len(counts) >= 2 and counts[-1] == counts[-2]:
            return MultiplicityProfile(y, tuple(counts), counts[-1], True)
    return MultiplicityProfile(y, tuple(counts), None, False)


def _multiplicity_row_1d(
    phi: ParametricMap, E: RasterSet | None, depth: int, ys: np.ndarray
) -> np.ndarray:
    """Vectorized N(y) over a 1-D y-grid for k = n = 1 at a fixed depth."""
    lo, hi = float(phi.domain_lo[0]), float(phi.domain_hi[0])
    m = 2**depth
    corners = np.linspace(lo, hi, m + 1)
    vals = phi(corners[:, None])[:, 0]
    box_lo = np.minimum(vals[:-1], vals[1:])
    box_hi = np.maximum(vals[:-1], vals[1:])
    pad = 0.25 * (box_hi - box_lo) + 1e-12
    if E is not None:
        centers = 0.5 * (corners[:-1] + corners[1:])
        idx = np.floor((centers - E.origin[0]) / E.h).astype(int)
        inside = (idx >= 0) & (idx < E.extents[0])
        member = np.zeros(m, dtype=bool)
        member[inside] = E.mask[idx[inside]]
    else:
        member = np.ones(m, dtype=bool)
    hits = (
        (ys[:, None] >= box_lo - pad) & (ys[:, None] <= box_hi + pad) & member
    )
    h = hits.astype(np.int8)
    return h[:, 0] + ((h[:, 1:] == 1) & (h[:, :-1] == 0)).sum(axis=1)


def _y_grid_1d(phi: ParametricMap, n_y: int, probe: int = 4096) -> tuple[np.ndarray, float]:
    lo, hi = float(phi.domain_lo[0]), float(phi.domain_hi[0])
    t = np.linspace(lo, hi, probe)
    vals = phi(t[:, None])[:, 0]
    y0, y1 = float(vals.min()), float(vals.max())
    span = y1 - y0
    y0 -= 0.05 * span
    y1 += 0.05 * span
    dy = (y1 - y0) / n_y
    return y0 + (np.arange(n_y) + 0.5) * dy, dy


def area_formula_with_multiplicity(
    phi: ParametricMap,
    E: RasterSet | None = None,
    n_y: int = 256,
    depth: int = 12,
    m_cells: int = 4096,
) -> tuple[float, float]:
    """(lhs, rhs) of  int N(Phi, E, y) dy  =  int_E J(Phi)  for k = n = 1.

    The lhs integrates the vectorized multiplicity over a y-grid spanning
    the observed image (two depths, Richardson-free stabilization check);
    the rhs is a midpoint sum of |Phi'|.
    """
    if phi.k != 1 or phi.n != 1:
        raise ValueError("the two-sided area formula is implemented for k = n = 1")
    ys, dy = _y_grid_1d(phi, n_y)
    counts = _multiplicity_row_1d(phi, E, depth, ys)
    counts_prev = _multiplicity_row_1d(phi, E, depth - 1, ys)
    disagree = float(np.mean(counts != counts_prev))
    if disagree > 0.05:
        raise NonConvergenceError(
            f"multiplicity unstable on {disagree:.0%} of the y-grid"
        )
    lhs = float(counts.sum() * dy)
    rhs = _cell_sum(phi, E, m_cells)
    return lhs, rhs


def change_of_variables(
    phi: ParametricMap,
    u: Callable[[np.ndarray], np.ndarray],
    E: RasterSet | None = None,
    n_y: int = 256,
    depth: int = 12,
    m_cells: int = 4096,
) -> tuple[float, float]:
    """(lhs, rhs) of  int u J(Phi)  =  int sum_{x in Phi^-1(y)} u(x) dy.

    For k = n = 1 preimages are the best cells of each hit cluster at the
    final partition depth.  For k = n = 2 the map must be flagged
    injective; the preimage of each y-cell is then located by nearest
    neighbour on a dense forward-evaluated parameter grid, so the rhs is a
    first-order estimate while the lhs is a plain midpoint quadrature.
    """
    if phi.k == 2 and phi.n == 2:
        if not phi.injective:
            raise ValueError("the 2-D branch needs the injectivity flag")
        return _change_of_variables_2d(phi, u, E, n_y, m_cells)
    if phi.k != 1 or phi.n != 1:
        raise ValueError("implemented for k = n <= 2")
    lo, hi = float(phi.domain_lo[0]), float(phi.domain_hi[0])
    steps = (hi - lo) / m_cells
    centers = lo + (np.arange(m_cells) + 0.5) * steps
    J = phi.j_at(centers[:, None], step=steps / 4)
    uvals = np.asarray(u(centers[:, None]), dtype=float).reshape(-1)
    member = np.ones(m_cells, dtype=bool)
    if E is not None:
        idx = np.floor((centers - E.origin[0]) / E.h).astype(int)
        inside = (idx >= 0) & (idx < E.extents[0])
        member[:] = False
        member[inside] = E.mask[idx[inside]]
    lhs = float((uvals * J * member).sum() * steps)

    ys, dy = _y_grid_1d(phi, n_y)
    m = 2**depth
    corners = np.linspace(lo, hi, m + 1)
    vals = phi(corners[:, None])[:, 0]
    box_lo = np.minimum(vals[:-1], vals[1:])
    box_hi = np.maximum(vals[:-1], vals[1:])
    pad = 0.25 * (box_hi - box_lo) + 1e-12
    cell_centers = 0.5 * (corners[:-1] + corners[1:])
    cell_vals = phi(cell_centers[:, None])[:, 0]
    if E is not None:
        idx = np.floor((cell_centers - E.origin[0]) / E.h).astype(int)
        inside = (idx >= 0) & (idx < E.extents[0])
        memb = np.zeros(m, dtype=bool)
        memb[inside] = E.mask[idx[inside]]
    else:
        memb = np.ones(m, dtype=bool)
    rhs = 0.0
    for y in ys:
        hits = (y >= box_lo - pad) & (y <= box_hi + pad) & memb
        if not hits.any():
            continue
        h = hits.astype(np.int8)
        starts = np.flatnonzero(np.diff(np.concatenate([[0], h])) == 1)
        ends = np.flatnonzero(np.diff(np.concatenate([h, [0]])) == -1)
        total = 0.0
        for s, e in zip(starts, ends):
            best = s + int(np.argmin(np.abs(cell_vals[s : e + 1] - y)))
            total += float(np.asarray(u(cell_centers[best : best + 1, None])).reshape(-1)[0])
        rhs += total * dy
    return lhs, float(rhs)


def _change_of_variables_2d(
    phi: ParametricMap,
    u: Callable[[np.ndarray], np.ndarray],
    E: RasterSet | None,
    n_y: int,
    m_cells: int,
) -> tuple[float, float]:
    from scipy.spatial import cKDTree

    m = int(round(math.sqrt(m_cells))) if m_cells > 4096 else 512
    lo, hi = phi.domain_lo, phi.domain_hi
    steps = (hi - lo) / m
    axes = [lo[d] + (np.arange(m) + 0.5) * steps[d] for d in range(2)]
    g = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([a.ravel() for a in g], axis=-1)
    J = phi.j_at(pts, step=float(steps.min()) / 4)
    uvals = np.asarray(u(pts), dtype=float).reshape(-1)
    member = np.ones(len(pts), dtype=bool)
    if E is not None:
        idx = np.floor((pts - E.origin) / E.h).astype(int)
        inside = np.all((idx >= 0) & (idx < np.array(E.extents)), axis=1)
        member[:] = False
        member[inside] = E.mask[tuple(idx[inside].T)]
    lhs = float((uvals * J * member).sum() * np.prod(steps))

    img = phi(pts[member])
    tree = cKDTree(img)
    y_lo = img.min(axis=0)
    y_hi = img.max(axis=0)
    dy = (y_hi - y_lo) / max(n_y, 64)
    ny = max(n_y, 64)
    y_axes = [y_lo[d] + (np.arange(ny) + 0.5) * dy[d] for d in range(2)]
    yg = np.meshgrid(*y_axes, indexing="ij")
    ys = np.stack([a.ravel() for a in yg], axis=-1)
    # a y-cell counts when an image sample lies within one image-grid step
    cutoff = 2.0 * float(np.linalg.norm(
        np.abs(phi.jacobian_at(pts[:1], float(steps.min()) / 4)[0]) @ steps
    ))
    dist, nearest = tree.query(ys, distance_upper_bound=max(cutoff, float(dy.max())))
    hit = np.isfinite(dist)
    u_member = uvals[member]
    rhs = float(u_member[nearest[hit]].sum() * np.prod(dy))
    return lhs, rhs


def jacobian_l1_check(
    phi: ParametricMap, E: RasterSet | None = None, m_cells: int = 4096
) -> tuple[float, float]:
    """(int |det DPhi|, int N(Phi, E, y) dy) for k = n; they must agree."""
    if phi.k != phi.n:
        raise ValueError("needs k = n")
    if phi.k == 1:
        lhs = _cell_sum(phi, E, m_cells)
        rhs, _ = area_formula_with_multiplicity(phi, E, m_cells=m_cells)
        return lhs, rhs
    lhs = _cell_sum(phi, E, int(round(math.sqrt(m_cells))))
    # 2-D multiplicity integral over a tensor y-grid
    n_y = 64
    lo, hi = phi.domain_lo, phi.domain_hi
    probe_axes = [np.linspace(lo[d], hi[d], 256) for d in range(2)]
    g = np.meshgrid(*probe_axes, indexing="ij")
    img = phi(np.stack([a.ravel() for a in g], axis=-1))
    y_lo = img.min(axis=0)
    y_hi = img.max(axis=0)
    span = y_hi - y_lo
    y_lo -= 0.02 * span
    y_hi += 0.02 * span
    dy = (y_hi - y_lo) / n_y
    rhs = 0.0
    depth = 7
    for i in range(n_y):
        for j in range(n_y):
            y = y_lo + (np.array([i, j]) + 0.5) * dy
            hits = _partition_hits(phi, E, depth, y)
            rhs += _hit_components(hits) * float(np.prod(dy))
    return lhs, float(rhs)
