"""Command-line front end.

Commands: eval, douglas, pflat, curvature, classify, deform, construct,
catalog.  ``--json`` switches to machine output with a stable schema;
``--csv PATH`` writes sweep data (header ``x1,x2,y1,y2,value``) and renders a
matplotlib figure next to it (same stem, ``.png``) unless ``--no-plot`` is
given.  Exit codes: 0 success, 1 verdict failure in ``catalog run``, 2 input
error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import catalog as _catalog
from .criteria import classify, douglas_fit
from .curvature import curvature_eval, flag_curvature_2d, k_curvature, matsumoto_pflat_test
from .deform import (
    DeformError,
    HarmonicPair,
    bar_alpha,
    construct_rem61,
    construct_thm12_ii,
    kropina_deform,
    m3_deform,
)
from .exprlang import ExprError, MetricDef, format_metric_def, parse_expr, parse_metric_def
from .finsler import FinslerDomainError, finsler_spray, hamel_residual
from .geometry import GeometryError, metric_at
from .jets import JetDomainError
from .phi import PhiDomainError, QuadratureError
from .sampling import DEFAULT_REGION, direction_samples, sample_points

_INPUT_ERRORS = (
    ExprError,
    PhiDomainError,
    QuadratureError,
    GeometryError,
    FinslerDomainError,
    JetDomainError,
    DeformError,
    ValueError,
    OSError,
)


def _load_metric(path: str) -> MetricDef:
    return parse_metric_def(Path(path).read_text())


def _parse_pair(text: str, what: str) -> np.ndarray:
    try:
        parts = [float(p) for p in text.split(",")]
    except ValueError:
        raise ValueError(f"{what} must be two comma-separated numbers, got {text!r}") from None
    if len(parts) != 2:
        raise ValueError(f"{what} must have exactly two components, got {text!r}")
    return np.array(parts)


def _emit(payload: dict, as_json: bool):
    if as_json:
        print(json.dumps(payload, sort_keys=True, indent=2))
        return
    for key, value in payload.items():
        print(f"{key}: {value}")


def _write_csv_and_figure(path: str, rows, value_label: str, no_plot: bool):
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x1", "x2", "y1", "y2", "value"])
        writer.writerows(rows)
    if no_plot:
        return None
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    data = np.asarray(rows, dtype=float)
    fig, ax = plt.subplots(figsize=(5.4, 4.4))
    sc = ax.scatter(data[:, 0], data[:, 1], c=data[:, 4], s=36, cmap="viridis")
    fig.colorbar(sc, ax=ax, label=value_label)
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.set_title(value_label)
    fig.tight_layout()
    figure_path = path.with_suffix(".png")
    fig.savefig(figure_path, dpi=130)
    plt.close(fig)
    return figure_path


def _grid(region, n):
    xs = np.linspace(region[0][0], region[0][1], n)
    ys = np.linspace(region[1][0], region[1][1], n)
    return [(a, b) for a in xs for b in ys]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_eval(args) -> int:
    md = _load_metric(args.metric)
    x = _parse_pair(args.point, "--point")
    y = _parse_pair(args.dir, "--dir")
    se = finsler_spray(md, x, y)
    payload = {
        "command": "eval",
        "x": list(map(float, x)),
        "y": list(map(float, y)),
        "F": se.F,
        "G": list(map(float, se.G)),
        "G_alpha": list(map(float, se.G_alpha)),
    }
    if args.csv:
        rows = []
        for p in _grid(DEFAULT_REGION, args.grid):
            try:
                rows.append([p[0], p[1], y[0], y[1], finsler_spray(md, p, y).F])
            except _INPUT_ERRORS:
                continue
        fig = _write_csv_and_figure(args.csv, rows, "F", args.no_plot)
        payload["csv"] = args.csv
        if fig:
            payload["figure"] = str(fig)
    _emit(payload, args.json)
    return 0


def _cmd_douglas(args) -> int:
    md = _load_metric(args.metric)
    rng = np.random.default_rng(args.seed)
    pts = sample_points(rng, args.points)
    fits = [douglas_fit(md, p, threshold=args.tol) for p in pts]
    worst = max(f.residual for f in fits)
    payload = {
        "command": "douglas",
        "points": len(fits),
        "max_residual": worst,
        "threshold": args.tol,
        "verdict": "pass" if worst <= args.tol else "fail",
        "per_point": [f.to_dict() for f in fits],
    }
    _emit(payload, args.json)
    return 0


def _cmd_pflat(args) -> int:
    md = _load_metric(args.metric)
    rng = np.random.default_rng(args.seed)
    pts = sample_points(rng, args.points)
    report = matsumoto_pflat_test(md, pts, douglas_threshold=args.tol)
    hamel_max = 0.0
    for p in pts:
        y = direction_samples(md, p)[0]
        hamel_max = max(hamel_max, float(np.max(np.abs(hamel_residual(md, p, y)))))
    payload = {
        "command": "pflat",
        "matsumoto": report.to_dict(),
        "hamel_max": hamel_max,
        "hamel_chart_projective": hamel_max <= 1e-8,
        "verdict": report.verdict,
    }
    _emit(payload, args.json)
    return 0


def _cmd_curvature(args) -> int:
    md = _load_metric(args.metric)
    payload = {"command": "curvature"}
    if args.point and args.dir:
        x = _parse_pair(args.point, "--point")
        y = _parse_pair(args.dir, "--dir")
        ce = curvature_eval(md, x, y)
        payload.update(
            {
                "x": list(x),
                "y": list(y),
                "R": [list(map(float, row)) for row in ce.R],
                "K": ce.K,
                "K12": ce.K12,
                "H1": list(map(float, ce.H1)),
            }
        )
    if args.csv:
        y = _parse_pair(args.dir, "--dir") if args.dir else np.array([1.0, 0.5])
        rows = []
        for p in _grid(DEFAULT_REGION, args.grid):
            try:
                m = metric_at(md, p)
                yy = np.asarray(y, dtype=float)
                yy = yy / float(np.sqrt(yy @ m.a @ yy))
                value = (
                    k_curvature(md, p, yy)
                    if args.quantity == "k12"
                    else flag_curvature_2d(md, p, yy)
                )
                rows.append([p[0], p[1], yy[0], yy[1], value])
            except _INPUT_ERRORS:
                continue
        label = "K12" if args.quantity == "k12" else "K"
        fig = _write_csv_and_figure(args.csv, rows, label, args.no_plot)
        payload["csv"] = args.csv
        if fig:
            payload["figure"] = str(fig)
    if "x" not in payload and not args.csv:
        raise ValueError("curvature needs --point/--dir or --csv")
    _emit(payload, args.json)
    return 0


def _cmd_classify(args) -> int:
    md = _load_metric(args.metric)
    rng = np.random.default_rng(args.seed)
    pts = sample_points(rng, max(args.points, 5))
    report = classify(md, pts, douglas_threshold=args.tol)
    if args.json:
        print(report.to_json())
    else:
        print(f"label: {report.label}")
        print(f"douglas: {report.douglas} (max residual {report.douglas_residual:.3e})")
        print(f"passing cases: {', '.join(report.passing_cases) or '(none)'}")
    return 0


def _cmd_deform(args) -> int:
    md = _load_metric(args.metric)
    if args.kind == "kropina":
        if args.m is None:
            raise ValueError("deform kropina needs --m")
        dm = kropina_deform(md, args.m)
    elif args.kind == "m3":
        if args.c is None:
            raise ValueError("deform m3 needs --c")
        dm = m3_deform(md, args.c)
    else:
        if args.k is None:
            raise ValueError("deform bar needs --k")
        dm = bar_alpha(md, args.k)
    text = format_metric_def(dm.metric)
    Path(args.output).write_text(text)
    _emit(
        {"command": "deform", "kind": dm.kind, "params": dm.params, "output": args.output},
        args.json,
    )
    return 0


def _cmd_construct(args) -> int:
    if args.kind == "thm12_ii":
        for required in ("u", "v", "B"):
            if getattr(args, required) is None:
                raise ValueError(f"construct thm12_ii needs --{required}")
        pair = HarmonicPair(parse_expr(args.u, 2), parse_expr(args.v, 2))
        md = construct_thm12_ii(parse_expr(args.B, 2), pair, args.c if args.c is not None else 0.0)
        extra = {}
    else:
        for required in ("u", "v", "eta", "m"):
            if getattr(args, required) is None:
                raise ValueError(f"construct rem61 needs --{required}")
        pair = HarmonicPair(parse_expr(args.u, 2), parse_expr(args.v, 2))
        built = construct_rem61(
            pair, parse_expr(args.eta, 2), args.m, args.c if args.c is not None else 0.0
        )
        md = built.metric
        extra = {
            "closed_beta_condition_holds": built.third_equation_holds,
            "closed_beta_condition_max": built.third_equation_max,
        }
    Path(args.output).write_text(format_metric_def(md))
    _emit({"command": "construct", "kind": args.kind, "output": args.output, **extra}, args.json)
    return 0


def _cmd_catalog(args) -> int:
    if args.action == "list":
        payload = {
            name: entry.description for name, entry in _catalog.ENTRIES.items()
        }
        if args.json:
            print(json.dumps(payload, sort_keys=True, indent=2))
        else:
            for name, desc in payload.items():
                print(f"{name:18s} {desc}")
        return 0
    if args.action == "export":
        if not args.name or args.name == "--all":
            raise ValueError("catalog export needs an entry name")
        entry = _catalog.ENTRIES[args.name]
        text = format_metric_def(entry.build())
        if args.output:
            Path(args.output).write_text(text)
            print(f"wrote {args.output}")
        else:
            print(text, end="")
        return 0
    # run
    run_all = getattr(args, "run_all", False) or args.name in (None, "all")
    names = list(_catalog.ENTRIES) if run_all else [args.name]
    for name in names:
        if name not in _catalog.ENTRIES:
            raise ValueError(f"unknown catalog entry {name!r}")
    reports = [_catalog.run_entry(name, seed=args.seed) for name in names]
    ok = bool(all(r.ok for r in reports))
    if args.json:
        print(json.dumps({"reports": [r.to_dict() for r in reports], "ok": ok}, sort_keys=True, indent=2))
    else:
        for r in reports:
            print(f"{'OK  ' if r.ok else 'FAIL'} {r.entry}")
            for c in r.checks:
                print(f"   {'+' if c.ok else '-'} {c.name}: {c.detail}")
    return 0 if ok else 1


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finsler2d",
        description="Numerical engine for two-dimensional (alpha,beta)-Finsler metrics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, points_default=5):
        p.add_argument("--json", action="store_true", help="machine-readable output")
        p.add_argument("--seed", type=int, default=0, help="sampling seed")
        p.add_argument("--tol", type=float, default=1e-7, help="verdict threshold")
        p.add_argument("--points", type=int, default=points_default, help="sample points")

    p = sub.add_parser("eval", help="F and spray coefficients at a point/direction")
    p.add_argument("--metric", required=True)
    p.add_argument("--point", required=True, help="x1,x2")
    p.add_argument("--dir", required=True, help="y1,y2")
    p.add_argument("--csv", help="also sweep F over the region into this CSV")
    p.add_argument("--grid", type=int, default=12, help="sweep grid resolution")
    p.add_argument("--no-plot", action="store_true", help="suppress the companion figure")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("douglas", help="Douglas verdict over sampled points")
    p.add_argument("--metric", required=True)
    common(p)
    p.set_defaults(func=_cmd_douglas)

    p = sub.add_parser("pflat", help="projective flatness: Douglas + K12 and Hamel")
    p.add_argument("--metric", required=True)
    common(p, points_default=4)
    p.set_defaults(func=_cmd_pflat)

    p = sub.add_parser("curvature", help="curvature data at a point or swept over a grid")
    p.add_argument("--metric", required=True)
    p.add_argument("--point", help="x1,x2")
    p.add_argument("--dir", help="y1,y2")
    p.add_argument("--quantity", choices=("k12", "flag"), default="k12")
    p.add_argument("--csv", help="sweep output CSV path")
    p.add_argument("--grid", type=int, default=12)
    p.add_argument("--no-plot", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_curvature)

    p = sub.add_parser("classify", help="Douglas test plus matching normal-form checks")
    p.add_argument("--metric", required=True)
    common(p)
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("deform", help="emit a deformed metric definition")
    p.add_argument("kind", choices=("kropina", "m3", "bar"))
    p.add_argument("--metric", required=True)
    p.add_argument("--output", "-o", required=True)
    p.add_argument("--m", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--k", type=float)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_deform)

    p = sub.add_parser("construct", help="emit a constructed metric definition")
    p.add_argument("kind", choices=("thm12_ii", "rem61"))
    p.add_argument("--u")
    p.add_argument("--v")
    p.add_argument("--eta")
    p.add_argument("--B")
    p.add_argument("--m", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--output", "-o", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_construct)

    p = sub.add_parser("catalog", help="list, export, or run the example catalog")
    p.add_argument("action", choices=("list", "run", "export"))
    p.add_argument("name", nargs="?", help="entry name (omit or pass --all to run everything)")
    p.add_argument("--all", dest="run_all", action="store_true", help="run every entry")
    p.add_argument("--output", "-o")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_catalog)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _INPUT_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
