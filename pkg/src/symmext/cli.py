"""Command-line front end.

Every command writes its artifacts and a ``manifest.json`` (argument echo,
package versions, SHA-256 of each artifact) into an output directory; the
directory defaults to ``symmext-runs/<command>-<config hash>``.

Exit codes: 0 success, 2 invalid configuration, 3 infeasible measures,
4 search did not converge (artifacts are still written).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import platform
import sys
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy

from . import __version__
from .data_model import PRESETS, DataError, LinearTuple, is_fully_symmetric, load_data, range_inclusion
from .functional import eval_exact_symmetric, eval_monte_carlo, eval_strips
from .genericity import classify_data, classify_triple, figure1_disks, radius_family, transition_scan
from .geometry import (
    GeometryError,
    GridSet,
    InfeasibleMeasure,
    ball_tuple,
    profile_from_text,
    profile_to_text,
    rasterize,
    symmetrize,
)
from .kernels import kernel_grid, pairing
from .perturb import DEFAULT_T, dilation_scan, nonexistence_probe
from .render import boundaries_svg, disks_svg, heatmap_svg
from .search import SearchConfig, SearchError, distance_to_balls, run_search

EXIT_INVALID = 2
EXIT_INFEASIBLE = 3
EXIT_UNCONVERGED = 4

# measures in units of pi
SET_PRESETS: dict[str, tuple[float, ...]] = {
    "unit-disks": (1.0, 1.0, 1.0, 1.0),
    "balls-r1.3": (1.0, 1.0, 1.69, 1.0),
}

SCHEMA_HELP = """\
data JSON:   {"maps": [{"x": [a, b], "y": [c, d], "ell": [e, f]}, ... 4 maps]}
             L_j(x, y) = (x_j . x, y_j . y + ell_j . x); "ell" is optional.
             Presets: %s.
sets dir:    E1.txt .. E4.txt in the run-length profile format
             (see docs/formats.md); presets: %s (prefix "presets/" optional).
rects JSON:  {"sets": [{"rects": [[x0, x1, y0, y1], ...]}, ... 4 sets]}
measures:    comma list e1,e2,e3,e4, in units of pi unless --measure-unit area.
""" % (", ".join(sorted(PRESETS)), ", ".join(sorted(SET_PRESETS)))


class ConfigError(ValueError):
    pass


# -- helpers -------------------------------------------------------------------------


def _floats(text: str, n: int | None = None, what: str = "value") -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"bad {what} list {text!r}") from exc
    if n is not None and len(vals) != n:
        raise ConfigError(f"expected {n} {what}s, got {len(vals)}")
    return vals


def _measures(args) -> tuple[float, ...]:
    e = _floats(args.measures, 4, "measure")
    if min(e) <= 0 or not all(math.isfinite(v) for v in e):
        raise ConfigError("measures must be positive")
    return tuple(v * math.pi for v in e) if args.measure_unit == "pi" else e


def _resolution(args) -> float:
    if not args.resolution > 0:
        raise ConfigError("resolution must be positive")
    return args.resolution


def _load_sets(ref: str, cell: float):
    key = ref.removeprefix("presets/")
    if not Path(ref).exists() and key in SET_PRESETS:
        return ball_tuple([v * math.pi for v in SET_PRESETS[key]], cell)
    path = Path(ref)
    if not path.is_dir():
        raise ConfigError(f"unknown set preset or missing directory: {ref}")
    files = sorted(path.glob("E*.txt"))
    if len(files) != 4:
        raise ConfigError(f"{ref} must contain E1.txt .. E4.txt")
    try:
        return tuple(profile_from_text(f.read_text()) for f in files)
    except GeometryError as exc:
        raise ConfigError(str(exc)) from exc


def _write_sets(E, out: Path) -> list[Path]:
    paths = []
    for k, s in enumerate(E, 1):
        p = out / f"E{k}.txt"
        p.write_text(profile_to_text(s))
        paths.append(p)
    return paths


def _write_csv(path: Path, header: Sequence[str], rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return path


def _write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"not serializable: {type(o)}")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out")}


def _out_dir(args) -> Path:
    if args.out:
        out = Path(args.out)
    else:
        digest = hashlib.sha256(json.dumps(_config(args), sort_keys=True).encode()).hexdigest()[:10]
        out = Path("symmext-runs") / f"{args.command}-{digest}"
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out} is not writable")
    return out


def write_manifest(out: Path, args, argv: Sequence[str], status: str, exit_code: int) -> Path:
    files = sorted(p for p in out.rglob("*") if p.is_file() and p.name != "manifest.json")
    manifest = {
        "command": args.command,
        "argv": list(argv),
        "config": _config(args),
        "status": status,
        "exit_code": exit_code,
        "versions": {
            "symmext": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "threads": os.environ.get("SYMMEXT_THREADS", "1"),
        "checksums": {str(p.relative_to(out)): _sha256(p) for p in files},
    }
    return _write_json(out / "manifest.json", manifest)


# -- commands ----------------------------------------------------------------------------
# each returns (status, exit_code)


def cmd_eval(args, out: Path):
    L = load_data(args.data)
    h = _resolution(args)
    E = _load_sets(args.sets, h)
    if args.method == "exact":
        rep = eval_strips(L, E, args.eval_resolution) if L.perturbed else eval_exact_symmetric(L, E, args.eval_resolution)
    else:
        rep = eval_monte_carlo(L, E, args.samples, args.seed)
    d = rep.to_dict()
    _write_json(out / "report.json", d)
    print(json.dumps(d, sort_keys=True))
    return "ok", 0


def _rect_sets(path: str, cell: float):
    try:
        data = json.loads(Path(path).read_text())
        sets = []
        for entry in data["sets"]:
            parts = []
            for x0, x1, y0, y1 in entry["rects"]:
                if not (x1 > x0 and y1 > y0):
                    raise ConfigError(f"empty rectangle {[x0, x1, y0, y1]}")
                parts.append(rasterize(_Box(x0, x1, y0, y1), cell))
            sets.append(_grid_union(parts, cell))
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad rects file {path}: {exc}") from exc
    return sets


class _Box:
    def __init__(self, x0, x1, y0, y1):
        self.b = (float(x0), float(x1), float(y0), float(y1))

    def bounds(self):
        return self.b

    def contains(self, x, y):
        x0, x1, y0, y1 = self.b
        return (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)


def _grid_union(parts: list[GridSet], cell: float) -> GridSet:
    """Union of grid sets on a common lattice."""
    lo = np.min([p.origin for p in parts], axis=0)
    hi = np.max([np.asarray(p.origin) + np.array(p.shape) * cell for p in parts], axis=0)
    n = np.round((hi - lo) / cell).astype(int)
    bits = np.zeros(n, dtype=bool)
    for p in parts:
        o = np.round((np.asarray(p.origin) - lo) / cell).astype(int)
        bits[o[0] : o[0] + p.shape[0], o[1] : o[1] + p.shape[1]] |= p.bits
    return GridSet((float(lo[0]), float(lo[1])), cell, bits)


def cmd_symmetrize(args, out: Path):
    h = _resolution(args)
    grids = _rect_sets(args.input, h)
    sym = [symmetrize(g) for g in grids]
    _write_sets(sym, out)
    boundaries_svg(sym, out / "symmetrized.svg")
    rows = [(k + 1, g.area, s.area) for k, (g, s) in enumerate(zip(grids, sym))]
    _write_csv(out / "areas.csv", ["set", "area_in", "area_out"], rows)
    if args.data and len(grids) == 4:
        L = load_data(args.data)
        lhs = eval_monte_carlo(L, tuple(grids), args.samples, args.seed)
        rhs = eval_exact_symmetric(L, sym, args.eval_resolution)
        holds = lhs.value <= rhs.value + 3 * lhs.error_bound + rhs.error_bound
        res = {"lhs": lhs.to_dict(), "rhs": rhs.to_dict(), "holds": bool(holds)}
        _write_json(out / "check.json", res)
        print(json.dumps(res, sort_keys=True))
    return "ok", 0


def cmd_kernel(args, out: Path):
    L = load_data(args.data)
    h = _resolution(args)
    if args.sets:
        E = _load_sets(args.sets, h)
    elif args.measures:
        E = ball_tuple(_measures(args), h)
    else:
        raise ConfigError("kernel needs --sets or --measures")
    i = args.index - 1
    if not 0 <= i < 4:
        raise ConfigError("--index must be 1..4")
    F = kernel_grid(L, E, i, h)
    F.to_csv(out / "kernel.csv")
    heatmap_svg(F, out / "kernel.svg", E[i])
    lam = eval_exact_symmetric(L, E, args.eval_resolution)
    res = {"index": args.index, "pairing": pairing(F, E[i]), "lambda": lam.value, "cells": list(F.values.shape)}
    _write_json(out / "kernel.json", res)
    print(json.dumps(res, sort_keys=True))
    return "ok", 0


def _figure1(out: Path, rs=(1.3, math.sqrt(3), 1.85)) -> list[dict]:
    rows = []
    for r in rs:
        v = classify_triple(*figure1_disks(r))
        name = f"figure1_r{r:.4f}.svg"
        disks_svg(figure1_disks(r), out / name, f"r = {r:.4f}: {v.case}")
        rows.append({"r": r, "case": v.case, "census": list(v.census), "svg": name})
    _write_csv(out / "verdicts.csv", ["r", "case", "census"], [(d["r"], d["case"], " ".join(map(str, d["census"]))) for d in rows])
    return rows


def cmd_classify(args, out: Path):
    L = load_data(args.data)
    if not is_fully_symmetric(L):
        raise ConfigError("classification needs fully symmetric data")
    i = args.index - 1
    if not 0 <= i < 4:
        raise ConfigError("--index must be 1..4")
    e = radius_family(args.r)
    res = {"r": args.r, "index": args.index, "verdict": classify_data(L, e, i, check_admissible=not args.skip_admissibility).to_dict()}
    if args.figure1:
        res["figure1"] = _figure1(out)
    _write_json(out / "verdict.json", res)
    print(json.dumps(res, sort_keys=True, default=_jsonable))
    return "ok", 0


def cmd_figure1(args, out: Path):
    rows = _figure1(out)
    L = PRESETS["eq32"]
    trans = transition_scan(L, radius_family, 0, (args.r_min, args.r_max))
    res = {"panels": rows, "transitions": [{"r": t.r, "kind": t.kind, "bracket": list(t.bracket)} for t in trans]}
    _write_json(out / "figure1.json", res)
    for d in rows:
        print(f"r={d['r']:.10f}  {d['case']}")
    for t in trans:
        print(f"transition r*={t.r:.10f}  {t.kind}")
    return "ok", 0


def cmd_maximize(args, out: Path):
    L = load_data(args.data)
    e = _measures(args)
    cfg = SearchConfig(
        resolution=_resolution(args),
        max_sweeps=args.max_sweeps,
        patience=args.patience,
        gain_tol=args.gain_tol,
        init=args.init,
        seed=args.seed,
        eval_resolution=args.eval_resolution,
    )
    state, reg = run_search(L, e, cfg)
    lam, eps, ts = state.lambda_history, state.eps_history, state.t_history
    rows = [(k, lam[k], eps[k - 1] if k else 0.0, ts[k - 1] if k else 1.0) for k in range(len(lam))]
    _write_csv(out / "lambda_history.csv", ["sweep", "lambda", "eps_disc", "t"], rows)
    sets = out / "sets"
    sets.mkdir(exist_ok=True)
    _write_sets(state.tuple, sets)
    boundaries_svg(state.tuple, out / "boundaries.svg")
    summary = {
        "status": state.status,
        "sweeps": state.sweep,
        # an unconverged state holds the best tuple next to the full history
        "lambda": max(lam) if state.status == "unconverged" else state.value,
        "lambda_last": lam[-1],
        "monotone": state.monotone(),
        "hausdorff_to_balls": distance_to_balls(state.tuple, e),
        "regularity": reg.to_dict(),
    }
    _write_json(out / "summary.json", summary)
    print(json.dumps(summary, sort_keys=True, default=_jsonable))
    if state.status != "converged":
        return state.status, EXIT_UNCONVERGED
    return "converged", 0


def _perturbed_data(args) -> LinearTuple:
    L = load_data(args.data)
    if args.ell:
        ell = np.array(_floats(args.ell, 8, "ell entry")).reshape(4, 2)
        L = L.base().with_ell(ell)
    if not L.perturbed:
        raise ConfigError("perturb needs ell rows (in the data JSON or via --ell)")
    return L


def cmd_perturb(args, out: Path):
    L = _perturbed_data(args)
    e = _measures(args)
    h = _resolution(args)
    t = tuple(2.0**-k for k in range(args.t_steps + 1)) if args.t_steps is not None else DEFAULT_T
    included, hmat = range_inclusion(L.ell_rows, L.y_rows)
    res: dict = {"included": bool(included), "h": None if hmat is None else hmat.tolist()}
    if args.scan:
        scan = dilation_scan(L, ball_tuple(e, h), t, args.eval_resolution, method=args.method, n=args.samples, seed=args.seed)
        _write_csv(out / "scan.csv", ["t", "lambda", "deficit", "sigma"], scan.rows())
        res.update(
            reference=scan.reference,
            p=scan.p,
            p_interval=list(scan.p_interval),
            flagged=scan.flagged,
            monotone=scan.monotone(),
            positive=scan.positive(),
            method=scan.method,
        )
    if args.probe:
        res["probe"] = nonexistence_probe(L.base(), L.ell_rows, e, t, h, args.eval_resolution)
    _write_json(out / "fit.json", res)
    print(json.dumps(res, sort_keys=True, default=_jsonable))
    return "ok", 0


# -- parser ---------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="symmext",
        description="Multilinear set-functional experiments on planar sets.",
        epilog=SCHEMA_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--version", action="version", version=f"symmext {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, data=True, measures=False, resolution=1 / 128):
        sp.formatter_class = argparse.RawDescriptionHelpFormatter
        sp.epilog = SCHEMA_HELP
        if data:
            sp.add_argument("--data", default="eq32", help="preset name or data JSON path")
        if measures:
            sp.add_argument("--measures", help="e1,e2,e3,e4")
            sp.add_argument("--measure-unit", choices=("pi", "area"), default="pi")
        sp.add_argument("--resolution", type=float, default=resolution, help="grid cell size h")
        sp.add_argument("--eval-resolution", type=float, default=None, help="panel width of the exact evaluator")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--samples", type=int, default=1_000_000)
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--threads", type=int, default=None, help="sets SYMMEXT_THREADS")

    sp = sub.add_parser("eval", help="evaluate the functional on a tuple of sets")
    common(sp)
    sp.add_argument("--sets", default="presets/unit-disks")
    sp.add_argument("--method", choices=("exact", "mc"), default="exact")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("symmetrize", help="symmetrize unions of rectangles")
    common(sp, data=False)
    sp.add_argument("--input", required=True, help="rects JSON")
    sp.add_argument("--data", default=None, help="also compare the functional before and after")
    sp.set_defaults(func=cmd_symmetrize)

    sp = sub.add_parser("kernel", help="kernel field K_i on a grid (CSV + SVG)")
    common(sp, measures=True)
    sp.add_argument("--sets", default=None)
    sp.add_argument("--index", type=int, default=1, help="1-based set index")
    sp.set_defaults(func=cmd_kernel)

    sp = sub.add_parser("classify", help="genericity verdict for the r-family of balls")
    common(sp)
    sp.add_argument("--r", type=float, default=1.3)
    sp.add_argument("--index", type=int, default=1)
    sp.add_argument("--figure1", action="store_true", help="also write the three disk panels")
    sp.add_argument("--skip-admissibility", action="store_true")
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("figure1", help="disk panels, verdict table and transition radius")
    common(sp, data=False)
    sp.add_argument("--r-min", type=float, default=1.3)
    sp.add_argument("--r-max", type=float, default=1.85)
    sp.set_defaults(func=cmd_figure1)

    sp = sub.add_parser("maximize", help="alternating superlevel ascent")
    common(sp, measures=True, resolution=1 / 64)
    sp.add_argument("--init", choices=("balls", "random"), default="balls")
    sp.add_argument("--max-sweeps", type=int, default=500)
    sp.add_argument("--patience", type=int, default=3)
    sp.add_argument("--gain-tol", type=float, default=1e-6)
    sp.set_defaults(func=cmd_maximize, measures="1,1,1.69,1")

    sp = sub.add_parser("perturb", help="perturbed data: dilation scan and range test")
    common(sp, measures=True)
    sp.add_argument("--ell", default=None, help="8 numbers, row-major 4x2 (overrides the data file)")
    sp.add_argument("--scan", action="store_true")
    sp.add_argument("--probe", action="store_true", help="run the nonexistence probe")
    sp.add_argument("--t-steps", type=int, default=None, help="t = 2^-k for k = 0..T (default 6)")
    sp.add_argument("--method", choices=("exact-strip", "monte-carlo"), default="exact-strip")
    sp.set_defaults(func=cmd_perturb, measures="1,1,1.69,1")

    sp = sub.add_parser("rerun", help="re-execute a run from its manifest")
    sp.add_argument("manifest")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=None)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "rerun":
        try:
            m = json.loads(Path(args.manifest).read_text())
            old = list(m["argv"])
        except (OSError, KeyError, ValueError) as exc:
            print(f"error: bad manifest: {exc}", file=sys.stderr)
            return EXIT_INVALID
        if "--out" in old:
            k = old.index("--out")
            del old[k : k + 2]
        out = args.out or str(Path(args.manifest).parent)
        return main(old + ["--out", out])
    if args.threads is not None:
        os.environ["SYMMEXT_THREADS"] = str(max(1, args.threads))
    try:
        out = _out_dir(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        status, code = args.func(args, out)
    except (InfeasibleMeasure, SearchError) as exc:
        status, code = f"infeasible: {exc}", EXIT_INFEASIBLE
        print(f"error: {exc}", file=sys.stderr)
    except (ConfigError, DataError, GeometryError) as exc:
        status, code = f"invalid: {exc}", EXIT_INVALID
        print(f"error: {exc}", file=sys.stderr)
    write_manifest(out, args, argv, status, code)
    return code


if __name__ == "__main__":
    sys.exit(main())
