"""Acceptance gate: one test per criterion, pinned tolerances, timed.

Each test prints a single machine-greppable line
    [criterion NN] <name>: <measured> (tol <tol>) -> PASS|FAIL
before asserting, so the gate's verdict survives in captured output.
"""

import math
import time

import numpy as np
import pytest

from conftest import cantor_function, cantor_ifs_json
from gmtkit import area as ar
from gmtkit import hausdorff as hd
from gmtkit import measures as ms
from gmtkit import pointwise as pw
from gmtkit import smoothing as sm
from gmtkit import sobolev_bv as sb
from gmtkit.grids import GridFunction, RasterSet


def verdict(num, name, ok, detail):
    line = f"[criterion {num:02d}] {name}: {detail} -> {'PASS' if ok else 'FAIL'}"
    print(line)
    assert ok, line


def test_criterion_01_cantor_dimension():
    t0 = time.perf_counter()
    ifs = hd.IfsSystem.from_json(cantor_ifs_json(depth=12))
    est = hd.dimension_estimate(ifs, hd.default_scales(3, 10))
    elapsed = time.perf_counter() - t0
    target = math.log(2) / math.log(3)
    err = abs(est.slope - target)
    verdict(
        1,
        "cantor box-counting dimension",
        err <= 0.02 and elapsed < 5.0,
        f"slope={est.slope:.5f} err={err:.2e} (tol 0.02) time={elapsed:.2f}s (<5s)",
    )


def test_criterion_02_helix_length():
    t0 = time.perf_counter()
    length = ar.curve_length(ar.builtin_map("helix"), nodes=1024)
    elapsed = time.perf_counter() - t0
    err = abs(length - math.sqrt(2))
    verdict(
        2,
        "helix curve length",
        err <= 1e-8 and elapsed < 1.0,
        f"length={length:.12f} err={err:.2e} (tol 1e-8) time={elapsed:.2f}s (<1s)",
    )


def test_criterion_03_cauchy_binet():
    t0 = time.perf_counter()
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(100):
        k = int(rng.integers(1, 4))
        n = int(rng.integers(k, 7))
        T = ar.LinearMap(rng.standard_normal((n, k)))
        worst = max(worst, abs(ar.j_linear(T) - ar.cauchy_binet(T)))
    elapsed = time.perf_counter() - t0
    verdict(
        3,
        "cauchy-binet vs J(T) battery",
        worst <= 1e-10 and elapsed < 1.0,
        f"max|diff|={worst:.2e} (tol 1e-10) over 100 maps, time={elapsed:.2f}s (<1s)",
    )


def test_criterion_04_density_subsequences():
    t0 = time.perf_counter()
    # dyadic-interval set: exact rasterization at h = 2^-23
    M = 23
    h = 2.0**-M
    mask = np.zeros(2**M, dtype=bool)
    j = 0
    while 2 * j + 1 <= M:
        mask[2 ** (M - 2 * j - 1) : 2 ** (M - 2 * j)] = True
        j += 1
    E = RasterSet(mask, [0.0], h)
    worst_third = 0.0
    worst_sixth = 0.0
    for k in range(3, 7):
        r_even = pw.density(E, [0.0], radii=[2.0 ** (-2 * k)]).ratios[0]
        r_odd = pw.density(E, [0.0], radii=[2.0 ** (-2 * k - 1)]).ratios[0]
        worst_third = max(worst_third, abs(r_even - 1 / 3))
        worst_sixth = max(worst_sixth, abs(r_odd - 1 / 6))
    # Heaviside set at its boundary point
    H = RasterSet.from_predicate(lambda x: x >= 0, [-1.0], [8192], 2 / 8192)
    half = pw.density(H, [0.0], radii=2.0 ** -np.arange(4, 10)).ratios
    worst_half = float(np.abs(half - 0.5).max())
    elapsed = time.perf_counter() - t0
    ok = worst_third <= 1e-3 and worst_sixth <= 1e-3 and worst_half <= 1e-3
    verdict(
        4,
        "density subsequences 1/3, 1/6, 1/2",
        ok and elapsed < 2.0,
        f"err(1/3)={worst_third:.2e} err(1/6)={worst_sixth:.2e} "
        f"err(1/2)={worst_half:.2e} (tol 1e-3) time={elapsed:.2f}s (<2s)",
    )


def _ratio_function(x, y):
    denom = x**2 + y**2
    return np.where(denom > 0, x**2 * y / np.where(denom > 0, denom, 1.0), 0.0)


def test_criterion_05_directional_derivative():
    t0 = time.perf_counter()
    t11 = pw.directional_derivative(_ratio_function, [0.0, 0.0], [1.0, 1.0])
    t10 = pw.directional_derivative(_ratio_function, [0.0, 0.0], [1.0, 0.0])
    t01 = pw.directional_derivative(_ratio_function, [0.0, 0.0], [0.0, 1.0])
    defect = abs(t10 + t01 - t11)
    elapsed = time.perf_counter() - t0
    err_d = abs(t11 - 0.5)
    err_a = abs(defect - 0.5)
    verdict(
        5,
        "directional derivative and additivity defect",
        err_d <= 1e-6 and err_a <= 1e-6 and elapsed < 1.0,
        f"T(1,1)={t11:.8f} (err {err_d:.2e}) defect={defect:.8f} "
        f"(err {err_a:.2e}, tol 1e-6) time={elapsed:.2f}s (<1s)",
    )


def test_criterion_06_weak_derivative():
    t0 = time.perf_counter()
    h = 1e-3
    N = 2000
    f = GridFunction.from_callable(lambda x: np.maximum(x, 0.0), [-1.0], [N], h)
    g = GridFunction.from_callable(lambda x: (x > 0).astype(float), [-1.0], [N], h)
    battery = sm.TestFunctionBattery.seeded([-1.0], [1.0], seed=42)
    residual = sm.weak_derivative_residual(f, g, 0, battery)
    # delta functional: -int phi' H = phi(0) per battery member
    pts = f.points()
    cell = h
    worst_delta = 0.0
    for i in range(battery.count):
        dphi = battery.grad(i, pts)[..., 0]
        lhs = -float((dphi * g.values.ravel()).sum() * cell)
        phi0 = float(battery.value(i, np.zeros((1, 1)))[0])
        worst_delta = max(worst_delta, abs(lhs - phi0))
    elapsed = time.perf_counter() - t0
    verdict(
        6,
        "weak derivative of x+ and delta identity",
        residual <= 1e-4 and worst_delta <= 1e-6 and elapsed < 2.0,
        f"residual={residual:.2e} (tol 1e-4) delta err={worst_delta:.2e} "
        f"(tol 1e-6) time={elapsed:.2f}s (<2s)",
    )


def test_criterion_07_mollifier():
    t0 = time.perf_counter()
    worst_mass = 0.0
    for n in (1, 2):
        for eps in (0.1, 0.05):
            worst_mass = max(
                worst_mass, abs(sm.make_standard_mollifier(n, eps).mass() - 1.0)
            )
    h = 1e-3
    N = 2000
    f = GridFunction.from_callable(lambda x: np.maximum(x, 0.0), [-1.0], [N], h)
    g = GridFunction.from_callable(lambda x: (x > 0).astype(float), [-1.0], [N], h)
    disc = sm.mollify_commutes_with_weak_derivative(
        f, g, sm.make_standard_mollifier(1, 0.1)
    )
    elapsed = time.perf_counter() - t0
    verdict(
        7,
        "mollifier mass and commutation",
        worst_mass <= 1e-8 and disc <= 1e-3 and elapsed < 5.0,
        f"mass err={worst_mass:.2e} (tol 1e-8) commute={disc:.2e} "
        f"(tol 1e-3) time={elapsed:.2f}s (<5s)",
    )


def _bump_field(rng, extents=96):
    h = 1.0 / extents
    f = GridFunction(np.zeros((extents, extents)), [0.0, 0.0], h)
    pts = f.points()
    vals = np.zeros(extents * extents)
    for _ in range(3):
        c = 0.2 + 0.6 * rng.random(2)
        r = 0.1 + 0.15 * rng.random()
        vals += rng.standard_normal() * sm.bump_value(pts, c, r)
    return GridFunction(vals.reshape(extents, extents), [0.0, 0.0], h)


def test_criterion_08_inequality_batteries():
    t0 = time.perf_counter()
    rng = np.random.default_rng(42)
    violations = 0
    for _ in range(100):
        f = _bump_field(rng)
        lhs, rhs, _ = sb.gns_check(f, 1.0)
        if lhs > rhs:
            violations += 1
    for _ in range(100):
        f = _bump_field(rng)
        lhs, rhs = sb.poincare_cube_check(f, [0.0, 0.0], 1.0, 2.0)
        if lhs > rhs:
            violations += 1
    for _ in range(100):
        f = _bump_field(rng)
        if sb.morrey_check(f, 4.0, n_pairs=100, seed=int(rng.integers(2**31))) > 1.0:
            violations += 1
    elapsed = time.perf_counter() - t0
    verdict(
        8,
        "GNS/Poincare/Morrey batteries",
        violations == 0 and elapsed < 60.0,
        f"violations={violations}/300 (tol 0) time={elapsed:.2f}s (<60s)",
    )


def test_criterion_09_bmo():
    t0 = time.perf_counter()
    # 2.25 * 4096 is exactly representable, so the oscillation is exactly 0
    const = GridFunction(np.full((64, 64), 2.25), [0.0, 0.0], 1 / 64)
    bmo_const = sb.bmo_seminorm(const)
    f = GridFunction.from_callable(
        lambda x, y: np.sin(7 * x) * np.cos(5 * y), [0, 0], [128, 128], 1 / 128
    )
    bounded_ok = sb.bmo_seminorm(f) <= 2 * float(np.abs(f.values).max())
    flog = GridFunction.from_callable(
        lambda x, y: np.log(np.sqrt(x**2 + y**2)), [1e-4, 1e-4], [512, 512], 1 / 512
    )
    gens = [sb.bmo_seminorm(flog, generations=g) for g in (1, 2, 3, 4)]
    growth = (max(gens) - min(gens)) / min(gens)
    elapsed = time.perf_counter() - t0
    verdict(
        9,
        "BMO seminorm",
        bmo_const == 0.0 and bounded_ok and growth < 0.10 and elapsed < 10.0,
        f"const={bmo_const} bounded<=2sup={bounded_ok} log-growth={growth:.2%} "
        f"(tol 10%) time={elapsed:.2f}s (<10s)",
    )


def test_criterion_10_bv_norm_distance():
    t0 = time.perf_counter()
    h = 1e-3
    N = 1000
    x = (np.arange(N) + 0.5) * h
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(10):
        a, b = np.sort(0.1 + 0.8 * rng.random(2))
        fa = (x <= a).astype(float)
        fb = (x <= b).astype(float)
        dist = sb.bv_norm(fa - fb, h=h)
        worst = max(worst, abs(dist - (2 + b - a)))
    elapsed = time.perf_counter() - t0
    verdict(
        10,
        "BV norm indicator distance",
        worst <= 2 * h and elapsed < 1.0,
        f"max err={worst:.2e} (tol 2h={2 * h:.0e}) time={elapsed:.2f}s (<1s)",
    )


def test_criterion_11_coarea_consistency():
    t0 = time.perf_counter()
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(20):
        c = 0.3 + 0.4 * rng.random(2)
        w = 8 + 10 * rng.random()
        f = GridFunction.from_callable(
            lambda x, y: np.exp(-w * ((x - c[0]) ** 2 + (y - c[1]) ** 2)),
            [0, 0],
            [256, 256],
            1 / 256,
        )
        grad = sb.variation_nd(f, "gradient-integral").tv
        coarea = sb.variation_nd(f, "coarea").tv
        worst = max(worst, abs(coarea - grad) / grad)
    elapsed = time.perf_counter() - t0
    verdict(
        11,
        "coarea vs gradient-integral",
        worst <= 0.02 and elapsed < 30.0,
        f"max rel diff={worst:.4f} (tol 0.02) over 20 bumps, time={elapsed:.2f}s (<30s)",
    )


def test_criterion_12_bv_decomposition():
    t0 = time.perf_counter()
    N = 4096
    x = (np.arange(N) + 0.5) / N
    rng = np.random.default_rng(42)
    locs = np.sort(rng.choice(np.arange(100, N - 100), 8, replace=False))
    heights = 2.0 ** -np.arange(1, 9)
    f = np.zeros(N)
    for l, ht in zip(locs, heights):
        f[l + 1 :] += ht
    dec = sb.decompose_1d(f)
    found = sorted(round(p * N) - 1 for p, _ in dec.jump_locations)
    jumps_exact = found == sorted(int(l) for l in locs) and all(
        abs(ht - dict(
            (round(p * N) - 1, hh) for p, hh in dec.jump_locations
        )[int(l)]) == 0.0
        for l, ht in zip(locs, heights)
    )
    fc = cantor_function(x, depth=10)
    dc = sb.decompose_1d(fc)
    a_norm = float(np.abs(dc.ac_part).max())
    j_norm = float(np.abs(dc.jump_part).max())
    rise = float(dc.cantor_part[-1] - dc.cantor_part[0])
    elapsed = time.perf_counter() - t0
    ok = (
        jumps_exact
        and a_norm <= 0.02
        and j_norm <= 0.02
        and abs(rise - 1.0) <= 0.02
        and elapsed < 5.0
    )
    verdict(
        12,
        "1-D BV decomposition",
        ok,
        f"jumps_exact={jumps_exact} |f_a|={a_norm:.2e} |f_j|={j_norm:.2e} "
        f"(tol 0.02) rise={rise:.4f} (1 +- 0.02) time={elapsed:.2f}s (<5s)",
    )


def test_criterion_13_area_formula():
    t0 = time.perf_counter()
    lhs, rhs = ar.area_formula_with_multiplicity(ar.builtin_map("square"), n_y=8192)
    err_l = abs(lhs - 2.0)
    err_r = abs(rhs - 2.0)
    cov_lhs, _ = ar.change_of_variables(
        ar.builtin_map("polar"), lambda p: np.ones(len(p))
    )
    err_pi = abs(cov_lhs - math.pi)
    elapsed = time.perf_counter() - t0
    ok = err_l <= 1e-3 and err_r <= 1e-3 and err_pi <= 1e-6 and elapsed < 5.0
    verdict(
        13,
        "area formula and polar substitution",
        ok,
        f"x^2: lhs err={err_l:.2e} rhs err={err_r:.2e} (tol 1e-3); "
        f"polar err={err_pi:.2e} (tol 1e-6) time={elapsed:.2f}s (<5s)",
    )


def test_criterion_14_measures_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(500):
        k = int(rng.integers(1, 11))
        m = int(rng.integers(1, 4))
        mu = ms.AtomicMeasure(tuple(range(k)), rng.standard_normal((k, m)))
        tv = ms.total_variation(mu, mu.full_subset())
        sup = ms.partition_variation_sup(mu)
        worst = max(worst, abs(tv - sup))
        if m == 1:
            pos, neg = ms.jordan_decomposition(mu)
            worst = max(
                worst, float(np.abs(pos.weights - neg.weights - mu.weights).max())
            )
            e_pos, e_neg = ms.hahn_decomposition(mu)
            worst = max(
                worst,
                0.0 if np.all(e_pos.flags ^ e_neg.flags) else 1.0,
                float(np.abs(np.minimum(mu.weights[e_pos.flags, 0], 0)).max(initial=0.0)),
            )
        nu = ms.AtomicMeasure(tuple(range(k)), np.abs(rng.standard_normal(k)))
        f, singular = ms.radon_nikodym(mu, nu)
        rebuilt = f * nu.weights[:, 0][:, None] + singular.weights
        worst = max(worst, float(np.abs(rebuilt - mu.weights).max()))
    elapsed = time.perf_counter() - t0
    verdict(
        14,
        "measure decomposition oracles",
        worst <= 1e-12 and elapsed < 5.0,
        f"max defect={worst:.2e} (tol 1e-12) over 500 instances, "
        f"time={elapsed:.2f}s (<5s)",
    )


def test_criterion_15_premeasure_properties():
    t0 = time.perf_counter()
    rng = np.random.default_rng(42)
    s_values = (0.5, 1.0, 1.5)
    ok = True
    detail = []
    # clouds dense relative to the smallest scale, so box counts have not
    # saturated at single points (where the finite-sample estimator decays)
    sizes = {1: 1000, 2: 4000, 3: 20000}
    for trial in range(10):
        n = int(rng.integers(1, 4))
        cloud = hd.PointCloud(rng.random((sizes[n], n)))
        for s in s_values:
            # delta-monotonicity: smaller delta -> larger premeasure.
            # The refined estimate minimizes over nested dyadic covers, so
            # it is monotone even when s exceeds the cloud's dimension
            # (where a single coarse grid overshoots the infimum).
            vals = [
                hd.premeasure_delta(cloud, s, d, refine_floor=2.0**-8)
                for d in (0.4, 0.2, 0.1)
            ]
            if not all(b >= a - 1e-9 for a, b in zip(vals, vals[1:])):
                ok = False
                detail.append(f"monotonicity s={s} trial={trial}")
            # t^s scaling
            t = 0.25 + 0.5 * rng.random()
            lhs = hd.premeasure_delta(cloud.scale(t), s, t * 0.1)
            rhs = t**s * hd.premeasure_delta(cloud, s, 0.1)
            if abs(lhs - rhs) > 1e-9 * max(1.0, rhs):
                ok = False
                detail.append(f"scaling s={s} trial={trial}")
            # Lipschitz image bound under an exactly-L Lipschitz map
            L = 0.5 + 2.0 * rng.random()
            image_pm, bound = hd.lipschitz_image_bound_check(
                lambda pts: L * pts, L, cloud, s, 0.1
            )
            if image_pm > bound + 1e-9:
                ok = False
                detail.append(f"lipschitz s={s} trial={trial}")
    elapsed = time.perf_counter() - t0
    verdict(
        15,
        "premeasure property suite",
        ok and elapsed < 10.0,
        (f"violations: {detail}" if detail else "all properties hold")
        + f", time={elapsed:.2f}s (<10s)",
    )
