"""Command-line interface: landscape-rate <command>.

Commands
  rate        network.json -> rate/entropy/theta summary (JSON on stdout)
  emu         network.json --pairs pairs.csv -> per-pair metric values (CSV)
  jrate       profile.csv|profile.json -> solver summary (JSON) + density CSV
  multipoint  constraints.json -> optimal network + rate (JSON)
  verify      run the built-in verification suite

File formats (all floats decimal, UTF-8, CSV newline-terminated with header):
  network  {"segments": [{"points": [[x, t], ...],
                          "density": [{"t0": ..., "t1": ..., "rho": ...}]}]}
  constraints  {"constraints": [{"x0":..,"t0":..,"x1":..,"t1":..,"alpha":..}]}
  profile  CSV with header t,f (breakpoint values), or JSON
           {"slopes": [...]} / {"times": [...], "slopes": [...]}
  pairs    CSV with header x0,t0,x1,t1

Exit codes: 0 ok, 1 internal error, 2 parse error, 3 invariant violation,
4 verification failure.

The emu command snaps pair endpoints and measure breakpoints onto the
evaluation grid (the DP needs aligned nodes); the CSV echoes the snapped
coordinates so every row is self-consistent.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .geometry import dirichlet_distance, pair, polyline
from .jrate import ProfileFunction, jrate_bounds, jrate_solve, profile_from_values
from .measures import (
    DensityPiece,
    NetworkError,
    PlantedMeasure,
    SegmentNetwork,
    WeightedSegment,
    kruzhkov_entropy,
    planted,
)
from .metric import GridSpec, evaluate_emu
from .multipoint import point_constraint, solve_multipoint
from .rates import network_rate, snap_measure_to_grid, theta_point
from . import verify as verify_suite

__all__ = ["main"]

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_PARSE = 2
EXIT_INVARIANT = 3
EXIT_VERIFY = 4


class SchemaError(ValueError):
    """Input file violates the documented schema."""


# ---------------------------------------------------------------------------
# input parsing


def _load_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path} is not valid JSON: {exc}") from exc


def _float_field(obj, key, where):
    try:
        return float(obj[key])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{where}: missing or non-numeric {key!r}") from exc


def network_from_json(obj) -> PlantedMeasure:
    if not isinstance(obj, dict) or "segments" not in obj:
        raise SchemaError('network JSON needs a top-level "segments" list')
    if not isinstance(obj["segments"], list):
        raise SchemaError('"segments" must be a list')
    segments = []
    for i, raw in enumerate(obj["segments"]):
        where = f"segments[{i}]"
        if not isinstance(raw, dict):
            raise SchemaError(f"{where}: expected an object")
        points = raw.get("points")
        if (not isinstance(points, list) or len(points) < 2
                or any(not isinstance(p, list) or len(p) != 2 for p in points)):
            raise SchemaError(f'{where}: "points" must list >= 2 [x, t] pairs')
        try:
            coords = [(float(x), float(t)) for x, t in points]
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"{where}: non-numeric point") from exc
        density = raw.get("density", [])
        if not isinstance(density, list):
            raise SchemaError(f'{where}: "density" must be a list')
        pieces = tuple(
            DensityPiece(_float_field(p, "t0", where),
                         _float_field(p, "t1", where),
                         _float_field(p, "rho", where))
            for p in density
        )
        segments.append(WeightedSegment(polyline(*coords), pieces))
    return PlantedMeasure(SegmentNetwork(tuple(segments)))


def network_to_json(mu) -> dict:
    segments = []
    for seg in mu.segments:
        segments.append({
            "points": [[b.x, b.t] for b in seg.path.breakpoints],
            "density": [{"t0": p.t0, "t1": p.t1, "rho": p.rho}
                        for p in seg.density],
        })
    return {"segments": segments}


def constraints_from_json(obj) -> list:
    if not isinstance(obj, dict) or "constraints" not in obj:
        raise SchemaError('constraints JSON needs a top-level "constraints" list')
    if not isinstance(obj["constraints"], list) or not obj["constraints"]:
        raise SchemaError('"constraints" must be a non-empty list')
    out = []
    for i, raw in enumerate(obj["constraints"]):
        where = f"constraints[{i}]"
        if not isinstance(raw, dict):
            raise SchemaError(f"{where}: expected an object")
        out.append(point_constraint(
            _float_field(raw, "x0", where), _float_field(raw, "t0", where),
            _float_field(raw, "x1", where), _float_field(raw, "t1", where),
            _float_field(raw, "alpha", where)))
    return out


def _read_pairs_csv(path: str) -> list:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            rows = list(reader)
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    needed = ("x0", "t0", "x1", "t1")
    if any(k not in (rows[0] or {}) for k in needed):
        raise SchemaError(f"{path}: header must include x0,t0,x1,t1")
    out = []
    for i, row in enumerate(rows):
        try:
            out.append(tuple(float(row[k]) for k in needed))
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"{path} row {i + 2}: non-numeric field") from exc
    return out


def profile_from_file(path: str) -> ProfileFunction:
    if path.endswith(".json"):
        obj = _load_json(path)
        if not isinstance(obj, dict) or "slopes" not in obj:
            raise SchemaError('profile JSON needs a "slopes" list')
        slopes = obj["slopes"]
        if not isinstance(slopes, list) or not slopes:
            raise SchemaError('"slopes" must be a non-empty list')
        try:
            slopes = [float(s) for s in slopes]
        except (TypeError, ValueError) as exc:
            raise SchemaError("non-numeric slope") from exc
        if "times" in obj:
            times = obj["times"]
            if not isinstance(times, list) or len(times) != len(slopes) + 1:
                raise SchemaError('"times" must have len(slopes) + 1 entries')
            times = [float(t) for t in times]
        else:
            n = len(slopes)
            times = [k / n for k in range(n + 1)]
        try:
            return ProfileFunction(tuple(times), tuple(slopes))
        except ValueError as exc:
            raise SchemaError(f"invalid profile: {exc}") from exc
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"t", "f"} <= set(reader.fieldnames):
                raise SchemaError(f"{path}: header must include t,f")
            ts, fs = [], []
            for i, row in enumerate(reader):
                try:
                    ts.append(float(row["t"]))
                    fs.append(float(row["f"]))
                except (TypeError, ValueError) as exc:
                    raise SchemaError(f"{path} row {i + 2}: non-numeric") from exc
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    if len(ts) < 2:
        raise SchemaError(f"{path}: need at least two breakpoints")
    try:
        return profile_from_values(ts, fs)
    except ValueError as exc:
        raise SchemaError(f"invalid profile: {exc}") from exc


# ---------------------------------------------------------------------------
# output helpers


def _emit_json(obj, out_path):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    sys.stdout.write(text)


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _figure_dir(args):
    if not args.figures:
        return None
    d = Path(args.figures)
    d.mkdir(parents=True, exist_ok=True)
    return d


# ---------------------------------------------------------------------------
# commands


def cmd_rate(args) -> int:
    mu = network_from_json(_load_json(args.network))
    report = network_rate(mu)
    _emit_json({
        "entropy": kruzhkov_entropy(mu),
        "rate": report.rate,
        "theta": report.theta,
        "theta_snapped_grid": report.snapped,
        "per_segment": list(report.per_segment),
    }, args.out)
    fig_dir = _figure_dir(args)
    if fig_dir:
        from .figures import save_network_figure
        save_network_figure(mu, fig_dir / "network.png",
                            title=f"rate {report.rate:.6g}")
    return EXIT_OK


def _emu_grid(mu, pairs, grid) -> GridSpec:
    xs = [v for p in pairs for v in (p[0], p[2])]
    ts = [v for p in pairs for v in (p[1], p[3])]
    for seg in mu.segments:
        xs.extend(b.x for b in seg.path.breakpoints)
        ts.extend(b.t for b in seg.path.breakpoints)
    pad = max(0.5, 0.1 * (max(xs) - min(xs)))
    span_t = max(ts) - min(ts)
    if span_t <= 0:
        raise SchemaError("pairs span no time interval")
    return GridSpec(min(xs) - pad, max(xs) + pad, min(ts), max(ts),
                    nx=grid[0], nt=grid[1])


def cmd_emu(args) -> int:
    mu = network_from_json(_load_json(args.network))
    raw_pairs = _read_pairs_csv(args.pairs)
    spec = _emu_grid(mu, raw_pairs, args.grid)
    snapped_mu, _moved = snap_measure_to_grid(mu, spec)
    xs, ts = spec.xs(), spec.ts()

    def snap(x, t):
        i = min(range(len(xs)), key=lambda k: abs(xs[k] - x))
        j = min(range(len(ts)), key=lambda k: abs(ts[k] - t))
        return float(xs[i]), float(ts[j])

    out_rows = []
    for x0, t0, x1, t1 in raw_pairs:
        x0, t0 = snap(x0, t0)
        x1, t1 = snap(x1, t1)
        if not t1 > t0:
            raise ValueError(f"pair ({x0},{t0})->({x1},{t1}) needs t1 > t0 "
                             "after snapping; refine --grid")
        u = pair(x0, t0, x1, t1)
        e = evaluate_emu(snapped_mu, u, spec)
        out_rows.append({
            "x0": x0, "t0": t0, "x1": x1, "t1": t1,
            "e": e, "d": dirichlet_distance(u),
            "theta": theta_point(snapped_mu, u, spec),
        })
    header = ["x0", "t0", "x1", "t1", "e", "d", "theta"]
    lines = [",".join(header)]
    for r in out_rows:
        lines.append(",".join(repr(r[k]) for k in header))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    fig_dir = _figure_dir(args)
    if fig_dir:
        from .figures import save_pairs_figure
        save_pairs_figure(out_rows, fig_dir / "pairs.png")
    return EXIT_OK


def cmd_jrate(args) -> int:
    f = profile_from_file(args.profile)
    solution = jrate_solve(f, tol=args.tol)
    lower, upper = jrate_bounds(f)
    csv_path = args.out or str(Path(args.profile).with_suffix(".rho.csv"))
    rho = solution.rho_array()
    rows = [(t, float(r)) for t, r in zip(solution.times, rho)]
    rows.append((solution.times[-1], float(rho[-1])))
    _write_csv(csv_path, ("t", "rho"), rows)
    _emit_json({
        "objective": solution.objective,
        "dual_objective": solution.dual_objective,
        "duality_gap": solution.residual,
        "max_violation": solution.max_violation,
        "lower_bound": lower,
        "upper_bound": upper,
        "iterations": solution.iterations,
        "converged": solution.converged,
        "n_cells": len(solution.rho),
        "density_csv": csv_path,
    }, None)
    fig_dir = _figure_dir(args)
    if fig_dir:
        from .figures import save_profile_figure
        save_profile_figure(f, solution, fig_dir / "profile.png")
    return EXIT_OK


def cmd_multipoint(args) -> int:
    constraints = constraints_from_json(_load_json(args.constraints))
    solution = solve_multipoint(constraints)
    measure = solution.measure if solution.measure is not None else planted()
    _emit_json({
        "rate": solution.rate,
        "topology": solution.topology.name,
        "junctions": [[j.x, j.t] for j in solution.topology.junctions],
        "achieved": list(solution.achieved),
        "alphas": [c.alpha for c in solution.constraints],
        "candidates": [{"topology": name, "rate": rate}
                       for name, rate in solution.candidates],
        "network": network_to_json(measure),
    }, args.out)
    fig_dir = _figure_dir(args)
    if fig_dir:
        from .figures import save_network_figure
        save_network_figure(measure, fig_dir / "multipoint.png",
                            constraints=constraints,
                            title=f"rate {solution.rate:.6g}")
    return EXIT_OK


def cmd_verify(args) -> int:
    ctx = verify_suite.VerifyContext(grid=tuple(args.grid), tol=args.tol,
                                     seed=args.seed)
    rows = verify_suite.run_all(args.filter, ctx)
    sys.stdout.write(verify_suite.render_table(rows) + "\n")
    if args.out:
        _write_csv(args.out,
                   ("criterion", "check", "expected", "computed",
                    "tolerance", "status"),
                   [(r.criterion, r.name, repr(r.expected), repr(r.computed),
                     repr(r.tol), "ok" if r.passed else "FAIL")
                    for r in rows])
    return EXIT_OK if all(r.passed for r in rows) else EXIT_VERIFY


# ---------------------------------------------------------------------------
# argument plumbing


def _grid_arg(text: str):
    try:
        nx, nt = text.split(",")
        return (int(nx), int(nt))
    except ValueError as exc:
        raise argparse.ArgumentTypeError("expected NX,NT") from exc


def _add_common(sub, *, grid=False, figures=False):
    sub.add_argument("--tol", type=float, default=1e-6,
                     help="solver tolerance (default 1e-6)")
    sub.add_argument("--seed", type=int, default=0,
                     help="seed for randomized checks (default 0)")
    sub.add_argument("--out", default=None, help="write results to PATH")
    if grid:
        sub.add_argument("--grid", type=_grid_arg, default=(200, 200),
                         metavar="NX,NT", help="grid cells (default 200,200)")
    if figures:
        sub.add_argument("--figures", default=None, metavar="DIR",
                         help="also render matplotlib figures into DIR")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="landscape-rate",
        description="Upper-tail rate functions for planted-network "
                    "directed metrics.")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("rate", help="rate/entropy/theta of a network")
    p.add_argument("network", help="network JSON file")
    _add_common(p, figures=True)
    p.set_defaults(func=cmd_rate)

    p = commands.add_parser("emu", help="grid metric values for point pairs")
    p.add_argument("network", help="network JSON file")
    p.add_argument("--pairs", required=True, help="CSV with x0,t0,x1,t1")
    _add_common(p, grid=True, figures=True)
    p.set_defaults(func=cmd_emu)

    p = commands.add_parser("jrate", help="geodesic rate of a profile")
    p.add_argument("profile", help="profile CSV (t,f) or JSON slope list")
    _add_common(p, figures=True)
    p.set_defaults(func=cmd_jrate)

    p = commands.add_parser("multipoint",
                            help="least rate meeting point constraints")
    p.add_argument("constraints", help="constraints JSON file")
    _add_common(p, figures=True)
    p.set_defaults(func=cmd_multipoint)

    p = commands.add_parser("verify", help="run the verification suite")
    p.add_argument("--filter", default=None,
                   help="run only criteria whose slug contains this")
    _add_common(p, grid=True)
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (NetworkError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except Exception as exc:  # pragma: no cover - defensive
        import traceback

        traceback.print_exc()
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
