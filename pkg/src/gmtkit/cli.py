"""Batch command-line front end.

Loads grids, point clouds, measures and map definitions from files,
dispatches to the library, and writes a versioned JSON (or CSV) report
plus optional standalone SVG plots.  All randomness flows from a single
--seed flag, so identical configs produce identical outputs; the one
timestamp field can be disabled for byte-stable runs.

Exit codes: 0 success, 1 validation error, 2 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import area as ar
from . import hausdorff as hd
from . import measures as ms
from . import pointwise as pw
from . import smoothing as sm
from . import sobolev_bv as sb
from .errors import NonConvergenceError, UnderResolvedKernelError
from .grids import GridFunction, RasterSet

SCHEMA = "gmtkit/1"

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NONCONVERGENCE = 2


class ValidationFailure(ValueError):
    """Bad config or input file; maps to exit code 1."""


def _parse_floats(text: str, count: int | None = None) -> list[float]:
    parts = [p for p in text.split(",") if p != ""]
    vals = [float(p) for p in parts]
    if count is not None and len(vals) != count:
        raise ValidationFailure(f"expected {count} comma-separated values, got {text!r}")
    return vals


def _parse_scales(text: str) -> np.ndarray:
    """'a..b' -> dyadic scales 2^-a .. 2^-b."""
    try:
        a, b = text.split("..")
        return hd.default_scales(int(a), int(b))
    except (ValueError, TypeError) as exc:
        raise ValidationFailure(f"bad --scales {text!r}; expected 'a..b'") from exc


def _load_grid(path: str) -> GridFunction:
    p = Path(path)
    if not p.is_file():
        raise ValidationFailure(f"input file not found: {path}")
    if p.stat().st_size == 0:
        raise ValidationFailure(f"input file is empty: {path}")
    try:
        return GridFunction.from_csv(p)
    except Exception as exc:
        raise ValidationFailure(f"cannot parse grid CSV {path}: {exc}") from exc


def _load_measure(path: str) -> ms.AtomicMeasure:
    p = Path(path)
    if not p.is_file():
        raise ValidationFailure(f"input file not found: {path}")
    if p.stat().st_size == 0:
        raise ValidationFailure(f"input file is empty: {path}")
    try:
        data = json.loads(p.read_text())
        weights = np.asarray(data["weights"], dtype=float)
        if weights.ndim == 1:
            weights = weights[:, None]
        return ms.AtomicMeasure(atoms=tuple(data["atoms"]), weights=weights)
    except ValidationFailure:
        raise
    except Exception as exc:
        raise ValidationFailure(f"cannot parse measure JSON {path}: {exc}") from exc


def _load_cloud_or_ifs(path: str, scales: np.ndarray) -> hd.PointCloud:
    p = Path(path)
    if not p.is_file():
        raise ValidationFailure(f"input file not found: {path}")
    if p.stat().st_size == 0:
        raise ValidationFailure(f"input file is empty: {path}")
    if p.suffix == ".json":
        try:
            ifs = hd.IfsSystem.from_json(p.read_text())
        except Exception as exc:
            raise ValidationFailure(f"cannot parse IFS JSON {path}: {exc}") from exc
        return hd.ifs_points(ifs, depth=ifs.depth or None, min_scale=float(scales.min()))
    try:
        return hd.PointCloud.from_csv(p)
    except Exception as exc:
        raise ValidationFailure(f"cannot parse point CSV {path}: {exc}") from exc


# ---------------------------------------------------------------- commands


def _cmd_measure(args) -> dict:
    mu = _load_measure(_single_input(args))
    result = {
        "atoms": list(mu.atoms),
        "m": mu.m,
        "total_variation": ms.total_variation(mu, mu.full_subset()),
        "atom_norms": np.linalg.norm(mu.weights, axis=1).tolist(),
    }
    if mu.m == 1:
        pos, neg = ms.jordan_decomposition(mu)
        e_pos, e_neg = ms.hahn_decomposition(mu)
        result["jordan_positive"] = pos.weights[:, 0].tolist()
        result["jordan_negative"] = neg.weights[:, 0].tolist()
        result["hahn_positive_atoms"] = [a for a, f in zip(mu.atoms, e_pos.flags) if f]
        result["hahn_negative_atoms"] = [a for a, f in zip(mu.atoms, e_neg.flags) if f]
    return result


def _cmd_dim(args) -> dict:
    scales = _parse_scales(args.scales)
    cloud = _load_cloud_or_ifs(_single_input(args), scales)
    est = hd.dimension_estimate(cloud, scales)
    return {
        "slope": est.slope,
        "intercept": est.intercept,
        "r2": est.r2,
        "degenerate": est.degenerate,
        "scales": est.scales.tolist(),
        "counts": est.counts.tolist(),
    }


def _cmd_density(args) -> dict:
    path = _single_input(args)
    p = Path(path)
    if not p.is_file() or p.stat().st_size == 0:
        raise ValidationFailure(f"input file missing or empty: {path}")
    try:
        E = RasterSet.from_csv(p)
    except Exception as exc:
        raise ValidationFailure(f"cannot parse raster CSV {path}: {exc}") from exc
    if args.point is None:
        raise ValidationFailure("density requires --point")
    x = _parse_floats(args.point, E.ndim)
    report = pw.density(E, x)
    return {
        "point": x,
        "classification": report.classification,
        "radii": report.radii.tolist(),
        "ratios": report.ratios.tolist(),
        "limit_estimate": report.limit_estimate,
    }


def _cmd_mollify(args) -> dict:
    f = _load_grid(_single_input(args))
    if args.eps is None:
        raise ValidationFailure("mollify requires --eps")
    kernel = sm.make_standard_mollifier(f.ndim, args.eps)
    try:
        out = sm.mollify(f, kernel)
    except UnderResolvedKernelError as exc:
        raise ValidationFailure(str(exc)) from exc
    out_path = Path(args.output) / "mollified.csv"
    out.to_csv(out_path)
    return {
        "eps": args.eps,
        "kernel_mass": kernel.mass(),
        "output_grid": out_path.name,
        "input_extents": list(f.extents),
        "output_extents": list(out.extents),
    }


def _cmd_weakdiff(args) -> dict:
    if len(args.input) != 2:
        raise ValidationFailure("weakdiff needs two --input files: f and the candidate g")
    f = _load_grid(args.input[0])
    g = _load_grid(args.input[1])
    lo = f.origin
    hi = f.origin + np.array(f.extents) * f.h
    battery = sm.TestFunctionBattery.seeded(lo, hi, seed=args.seed)
    residual = sm.weak_derivative_residual(f, g, args.axis, battery)
    return {"axis": args.axis, "residual": residual, "battery_size": battery.count}


def _cmd_sobolev(args) -> dict:
    f = _load_grid(_single_input(args))
    p = args.p
    rep = sb.sobolev_norm(f, p)
    result = {
        "p": p,
        "lp_norm": rep.lp_norm,
        "grad_lp_norm": rep.grad_lp_norm,
        "sobolev_norm": rep.sobolev_norm,
        "p_star": rep.p_star,
    }
    n = f.ndim
    if p < n:
        lhs, rhs, C = sb.gns_check(f, p)
        result["regime"] = "gns"
        result["embedding"] = {"lhs": lhs, "rhs": rhs, "constant": C, "holds": lhs <= rhs}
    elif p == n:
        b = sb.bmo_seminorm(f)
        bound = 2 * float(np.abs(f.values).max())
        result["regime"] = "bmo"
        result["embedding"] = {"bmo_seminorm": b, "bound": bound, "holds": b <= bound}
    else:
        worst = sb.morrey_check(f, p, seed=args.seed)
        result["regime"] = "morrey"
        result["embedding"] = {"worst_ratio": worst, "holds": worst <= 1.0}
    return result


def _cmd_bv(args) -> dict:
    f = _load_grid(_single_input(args))
    if f.ndim == 1:
        dec = sb.decompose_1d(f.values, h=f.h)
        return {
            "variation": sb.variation_1d(f.values),
            "bv_norm": sb.bv_norm(f.values, h=f.h),
            "jumps": [{"x": x, "height": h} for x, h in dec.jump_locations],
            "ac_rise": float(dec.ac_part[-1] - dec.ac_part[0]),
            "singular_rise": float(dec.cantor_part[-1] - dec.cantor_part[0]),
        }
    grad = sb.variation_nd(f, "gradient-integral")
    coarea = sb.variation_nd(f, "coarea")
    return {
        "variation_gradient_integral": grad.tv,
        "variation_coarea": coarea.tv,
        "per_level": coarea.per_level,
    }


def _cmd_area(args) -> dict:
    if args.map is None:
        raise ValidationFailure("area requires --map NAME")
    params = {}
    if args.range is not None:
        lo, hi = _parse_floats(args.range, 2)
        params = {"lo": lo, "hi": hi}
    try:
        phi = ar.builtin_map(args.map, **params)
    except (ValueError, TypeError) as exc:
        raise ValidationFailure(str(exc)) from exc
    if phi.k == 1 and phi.injective:
        return {"map": args.map, "length": ar.curve_length(phi)}
    if phi.injective:
        return {"map": args.map, "surface_measure": ar.surface_measure(phi)}
    lhs, rhs = ar.area_formula_with_multiplicity(phi, n_y=4096)
    return {"map": args.map, "multiplicity_integral": lhs, "jacobian_integral": rhs}


COMMANDS = {
    "measure": _cmd_measure,
    "dim": _cmd_dim,
    "density": _cmd_density,
    "mollify": _cmd_mollify,
    "weakdiff": _cmd_weakdiff,
    "sobolev": _cmd_sobolev,
    "bv": _cmd_bv,
    "area": _cmd_area,
}


def _single_input(args) -> str:
    if len(args.input) != 1:
        raise ValidationFailure("this command takes exactly one --input file")
    return args.input[0]


# ------------------------------------------------------------------ output


def _flatten(prefix: str, obj, rows: list[tuple[str, str]]) -> None:
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, rows)
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}[{i}]", v, rows)
    else:
        rows.append((prefix, json.dumps(obj)))


def _write_report(report: dict, out_dir: Path, fmt: str) -> Path:
    if fmt == "json":
        path = out_dir / "report.json"
        path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    else:
        path = out_dir / "report.csv"
        rows: list[tuple[str, str]] = []
        _flatten("", report, rows)
        with open(path, "w") as fh:
            fh.write("key,value\n")
            for k, v in rows:
                fh.write(f"{k},{v}\n")
    return path


def _svg_header(w: int, h: int) -> str:
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
            f'viewBox="0 0 {w} {h}">\n<rect width="{w}" height="{h}" fill="white"/>\n')


def _svg_series(xs, ys, w=480, h=360, margin=40, step=False, points=True, line_from=None):
    """Polyline + optional markers for one series, with axis frame."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1

    def sx(x):
        return margin + (x - x0) / (x1 - x0) * (w - 2 * margin)

    def sy(y):
        return h - margin - (y - y0) / (y1 - y0) * (h - 2 * margin)

    parts = [_svg_header(w, h)]
    parts.append(
        f'<rect x="{margin}" y="{margin}" width="{w - 2 * margin}" '
        f'height="{h - 2 * margin}" fill="none" stroke="black"/>\n'
    )
    if step:
        pts = []
        for i in range(len(xs)):
            pts.append(f"{sx(xs[i]):.2f},{sy(ys[i]):.2f}")
            if i + 1 < len(xs):
                pts.append(f"{sx(xs[i + 1]):.2f},{sy(ys[i]):.2f}")
        parts.append(f'<polyline points="{" ".join(pts)}" fill="none" stroke="steelblue"/>\n')
    else:
        if line_from is not None:
            slope, intercept = line_from
            ya, yb = slope * x0 + intercept, slope * x1 + intercept
            parts.append(
                f'<line x1="{sx(x0):.2f}" y1="{sy(ya):.2f}" x2="{sx(x1):.2f}" '
                f'y2="{sy(yb):.2f}" stroke="firebrick"/>\n'
            )
        if points:
            for x, y in zip(xs, ys):
                parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="steelblue"/>\n')
    parts.append(
        f'<text x="{margin}" y="{h - 8}" font-size="11">x: [{x0:.4g}, {x1:.4g}]</text>\n'
        f'<text x="8" y="{margin - 8}" font-size="11">y: [{y0:.4g}, {y1:.4g}]</text>\n'
    )
    parts.append("</svg>\n")
    return "".join(parts)


def emit_plot(report: dict, kind: str, out_dir: Path) -> Path:
    """Write a loglog (dimension fit) or levels (coarea) SVG from a report."""
    result = report.get("results", {})
    if kind == "loglog":
        if "scales" not in result or "counts" not in result:
            raise ValidationFailure("report lacks the scales/counts series for a loglog plot")
        scales = np.asarray(result["scales"], dtype=float)
        counts = np.asarray(result["counts"], dtype=float)
        if scales.size == 0:
            raise ValidationFailure("empty series")
        xs = np.log(1.0 / scales)
        ys = np.log(counts)
        svg = _svg_series(xs, ys, line_from=(result["slope"], result["intercept"]))
        path = out_dir / "loglog.svg"
    elif kind == "levels":
        levels = result.get("per_level")
        if not levels:
            raise ValidationFailure("report lacks the per_level series for a levels plot")
        xs = [t for t, _ in levels]
        ys = [p for _, p in levels]
        svg = _svg_series(xs, ys, step=True)
        path = out_dir / "levels.svg"
    else:
        raise ValidationFailure(f"unknown plot kind {kind!r}")
    path.write_text(svg)
    return path


_PLOT_KIND = {"dim": "loglog", "bv": "levels"}


# -------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gmtkit",
        description="Batch front end for the gmtkit analysis library.",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--input", action="append", default=[],
                        help="input file; repeatable where a command takes several")
    parser.add_argument("--output", default=".", help="output directory")
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--p", type=float, default=2.0, help="Lebesgue/Sobolev exponent")
    parser.add_argument("--eps", type=float, default=None, help="mollifier width")
    parser.add_argument("--scales", default="3..10", help="dyadic scale range a..b")
    parser.add_argument("--depth", type=int, default=0, help="IFS/partition depth override")
    parser.add_argument("--map", default=None,
                        help="builtin map name: helix, polar, sphere, fold, square")
    parser.add_argument("--range", default=None, help="parameter range lo,hi for --map")
    parser.add_argument("--point", default=None, help="query point x1,...,xn")
    parser.add_argument("--axis", type=int, default=0, help="axis for weakdiff")
    parser.add_argument("--format", choices=["json", "csv"], default="json")
    parser.add_argument("--plot", choices=["none", "svg"], default="none")
    parser.add_argument("--no-timestamp", action="store_true",
                        help="omit the timestamp field for byte-identical reruns")
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out_dir = Path(args.output)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        results = COMMANDS[args.command](args)
        report = {
            "schema": SCHEMA,
            "command": args.command,
            "seed": args.seed,
            "results": results,
        }
        if not args.no_timestamp:
            report["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
        _write_report(report, out_dir, args.format)
        if args.plot == "svg":
            kind = _PLOT_KIND.get(args.command)
            if kind is None:
                raise ValidationFailure(f"command {args.command!r} has no plot")
            emit_plot(report, kind, out_dir)
        return EXIT_OK
    except ValidationFailure as exc:
        _write_error(out_dir, "validation", str(exc))
        return EXIT_VALIDATION
    except NonConvergenceError as exc:
        _write_error(out_dir, "non-convergence", str(exc))
        return EXIT_NONCONVERGENCE


def _write_error(out_dir: Path, kind: str, message: str) -> None:
    payload = {"schema": SCHEMA, "error": {"kind": kind, "message": message}}
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "error.json").write_text(json.dumps(payload, indent=2) + "\n")
    except OSError:
        pass
    print(json.dumps(payload), file=sys.stderr)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
