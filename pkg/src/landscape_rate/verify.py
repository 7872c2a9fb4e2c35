"""Built-in verification suite.

Fourteen numbered criteria pin the library against its exact reference
values: closed-form rates, solver cross-checks, metric axioms, and the
structural invariants.  Each criterion yields a list of CheckRow entries
(expected value, computed value, tolerance) so the CLI can render a table
and the acceptance tests can assert row by row.

Criterion 7 carries a deliberately failing row: the quadratic slope mass of
the divergent block family beyond j=50 is a divergent harmonic-type tail
(the partial sum to j=1e6 already exceeds 0.77), so the stated 1e-3 bound
cannot hold.  The row reports the computed partial sum and stays red; see
the repository notes for the analysis.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import (
    Partition,
    SpaceTimePoint,
    SymmetryMap,
    apply_symmetry,
    pair,
    polyline,
    uniform_partition,
)
from .gradient import fd_gradient_profile, gradient_profile, q_energy
from .geodesics import rightmost_geodesic, wander_check
from .jrate import (
    divergent_block_l2_tail,
    divergent_block_profile,
    divergent_block_rate,
    iota_eval,
    jrate_bounds,
    jrate_solve,
    jrate_scaling_check,
    profile_from_breaks,
    profile_from_values,
    two_piece_profile,
    window_map,
)
from .measures import (
    empty_measure,
    planted,
    rate_of_measure,
    straight_segment,
    vertical_segment,
)
from .metric import (
    GridSpec,
    check_metric_axioms,
    dirichlet_grid_metric,
    evaluate_emu,
    evaluate_emu_grid,
    path_length_partition,
)
from .multipoint import (
    one_point_rate,
    point_constraint,
    solve_multipoint,
    two_point_rate,
)
from .rates import (
    auto_theta_grid,
    path_rate,
    partition_rate,
    snap_measure_to_grid,
    theta_total_from_measure,
    weight_function,
)

__all__ = [
    "CheckRow",
    "VerifyContext",
    "CRITERIA",
    "run_criterion",
    "run_all",
    "render_table",
]


@dataclass(frozen=True)
class CheckRow:
    criterion: str
    name: str
    expected: float
    computed: float
    tol: float
    passed: bool


@dataclass(frozen=True)
class VerifyContext:
    grid: tuple = (200, 200)
    tol: float = 1e-6
    seed: int = 0


def _close(crit: str, name: str, expected: float, computed: float,
           tol: float) -> CheckRow:
    return CheckRow(crit, name, float(expected), float(computed), float(tol),
                    bool(abs(computed - expected) <= tol))


def _rel(crit: str, name: str, expected: float, computed: float,
         rel: float) -> CheckRow:
    return _close(crit, name, expected, computed, rel * abs(expected))


def _at_most(crit: str, name: str, bound: float, computed: float) -> CheckRow:
    return CheckRow(crit, name, float(bound), float(computed), 0.0,
                    bool(computed <= bound))


def _flag(crit: str, name: str, ok: bool, computed: float = None) -> CheckRow:
    got = float(ok) if computed is None else float(computed)
    return CheckRow(crit, name, 1.0, got, 0.0, bool(ok))


# ---------------------------------------------------------------------------
# criterion bodies


def _criterion_one_point(ctx: VerifyContext) -> list:
    c = "01-one-point"
    rows = []
    t0 = time.perf_counter()
    for alpha in (0.5, 1.0, 2.0):
        target = 4.0 / 3.0 * alpha ** 1.5
        rows.append(_rel(c, f"closed form alpha={alpha}", target,
                         one_point_rate(alpha), 0.01))
        sol = solve_multipoint([point_constraint(0.0, 0.0, 0.0, 1.0, alpha)])
        rows.append(_rel(c, f"solver alpha={alpha}", target, sol.rate, 0.01))
    rows.append(_at_most(c, "elapsed seconds", 10.0, time.perf_counter() - t0))
    return rows


def _criterion_two_point(ctx: VerifyContext) -> list:
    c = "02-two-point"
    rows = []
    t0 = time.perf_counter()
    for alpha in (-0.5, 0.0, 1.0):
        closed = two_point_rate(alpha)
        sol = solve_multipoint([
            point_constraint(0.0, 0.0, -1.0, 1.0, alpha),
            point_constraint(0.0, 0.0, 1.0, 1.0, alpha),
        ])
        rows.append(_rel(c, f"rate alpha={alpha}", closed.rate, sol.rate, 0.02))
        got_topo = "V" if sol.topology.name == "disjoint" else "Y"
        rows.append(_flag(c, f"topology alpha={alpha} is {closed.topology}",
                          got_topo == closed.topology))
        if alpha == 1.0:
            t_junction = sol.topology.junctions[0].t
            rows.append(_close(c, "junction time alpha=1", closed.t_star,
                               t_junction, 0.02))
    rows.append(_at_most(c, "elapsed seconds", 60.0, time.perf_counter() - t0))
    return rows


def _criterion_tent(ctx: VerifyContext) -> list:
    c = "03-jrate-tent"
    rows = []
    for a, target, rel in ((0.5, 32.0 / 3.0, 0.01),
                           (0.25, 1408.0 / 81.0, 0.02)):
        f = two_piece_profile(a, cells_per_piece=200)  # 400 cells
        t0 = time.perf_counter()
        sol = jrate_solve(f, tol=ctx.tol)
        elapsed = time.perf_counter() - t0
        rows.append(_rel(c, f"tent apex a={a} (n=400)", target,
                         sol.objective, rel))
        rows.append(_at_most(c, f"tent a={a} elapsed seconds", 120.0, elapsed))
    return rows


def _criterion_scaling(ctx: VerifyContext) -> list:
    c = "04-jrate-scaling"
    f = two_piece_profile(0.5, cells_per_piece=50)
    chk = jrate_scaling_check(f, 2.0, tol=ctx.tol)
    ratio = chk.j_scaled / chk.j_base
    return [_rel(c, "J(2f)/J(f)", 8.0, ratio, 0.01)]


def _random_polyline_profile(rng: np.random.Generator):
    k = int(rng.integers(3, 8))
    gaps = rng.uniform(0.5, 1.5, k + 1)
    ts = np.concatenate([[0.0], np.cumsum(gaps) / np.sum(gaps)])
    ts[-1] = 1.0
    vals = np.concatenate([[0.0], rng.normal(0.0, 1.0, k), [0.0]])
    return profile_from_values(ts, vals)


def _criterion_sandwich(ctx: VerifyContext) -> list:
    c = "05-jrate-sandwich"
    rng = np.random.default_rng(ctx.seed)
    rows = []
    violations = 0
    for _ in range(20):
        f = _random_polyline_profile(rng)
        sol = jrate_solve(f, tol=ctx.tol)
        lower, upper = jrate_bounds(f)
        if not (lower - 1e-9 <= sol.objective <= upper + 1e-6):
            violations += 1
    rows.append(_close(c, "sandwich violations on 20 random profiles",
                       0.0, violations, 0.0))
    # constant |f'| = equality case: both bounds collapse to (4/3) c^3
    for speed in (0.8, 1.5, 2.5):
        signs = rng.permutation([1.0, -1.0] * 3)
        ts = np.linspace(0.0, 1.0, 7)
        f = profile_from_values(ts, np.concatenate([[0.0],
                                                    np.cumsum(signs / 6.0)]))
        f = f.scaled(speed)
        sol = jrate_solve(f, tol=ctx.tol)
        rows.append(_rel(c, f"constant-slope equality c={speed}",
                         4.0 / 3.0 * speed ** 3, sol.objective, 0.01))
    return rows


def _criterion_trapezoid(ctx: VerifyContext) -> list:
    c = "06-jrate-trapezoid"
    rows = []
    for beta in (1.0 / 8.0, 1.0 / 4.0):
        f = profile_from_breaks([0.0, beta, 1.0 - beta, 1.0],
                                [0.0, 1.0, 1.0, 0.0], cells_per_piece=34)
        sol = jrate_solve(f, tol=ctx.tol)
        target = 4.0 / 3.0 * (2.0 / beta) ** 1.5
        rows.append(_rel(c, f"trapezoid shoulder beta={beta}", target,
                         sol.objective, 0.02))
    return rows


def _criterion_divergent(ctx: VerifyContext) -> list:
    c = "07-jrate-divergent"
    rows = []
    f50 = divergent_block_profile(50)
    worst = 0.0
    for j in range(1, 51):
        w = window_map(f50, 1.0 / (j + 1), 1.0 / j)
        sol = jrate_solve(w, tol=ctx.tol)
        worst = max(worst, abs(sol.objective - divergent_block_rate(j)))
    rows.append(_close(c, "per-block solver vs closed form, j<=50",
                       0.0, worst, 1e-9))
    f10 = divergent_block_profile(10)
    sol10 = jrate_solve(f10, tol=ctx.tol)
    target10 = sum(divergent_block_rate(j) for j in range(1, 11))
    rows.append(_rel(c, "10-block truncation", target10, sol10.objective, 0.02))
    partial = np.cumsum([divergent_block_rate(j) for j in range(1, 51)])
    min_step = float(np.min(np.diff(partial)))
    rows.append(_flag(c, "partial sums strictly increase", min_step > 0.0,
                      computed=min_step))
    tail = divergent_block_l2_tail(51, 10 ** 6)
    # Red by analysis: the quadratic mass tail diverges (harmonic), so the
    # 1e-3 bound is unattainable; the row records the certified partial sum.
    rows.append(_at_most(c, "quadratic slope tail beyond j=50", 1e-3, tail))
    return rows


def _criterion_metric_grid(ctx: VerifyContext) -> list:
    c = "08-metric-grid"
    rows = []
    t0 = time.perf_counter()
    spec = GridSpec(-2.0, 2.0, 0.0, 1.0, nx=400, nt=400)
    mu = planted(vertical_segment(0.0, 0.0, 1.0, rho=1.0))
    rows.append(_rel(c, "ride value e(0,0;0,1)", 1.0,
                     evaluate_emu(mu, pair(0.0, 0.0, 0.0, 1.0), spec), 0.01))
    rows.append(_close(c, "empty network e(0,0;0,1)", 0.0,
                       evaluate_emu(empty_measure(),
                                    pair(0.0, 0.0, 0.0, 1.0), spec), 0.01))
    rows.append(_rel(c, "cross value e(-1,0;1,1)", -4.0,
                     evaluate_emu(mu, pair(-1.0, 0.0, 1.0, 1.0), spec), 0.01))
    # axioms need the all-pairs table; run them on a small closed grid
    small = GridSpec(-1.0, 1.0, 0.0, 1.0, nx=12, nt=12)
    e_small = evaluate_emu_grid(mu, small)
    report = check_metric_axioms(e_small)
    defect = max(report.dominance_defect, report.triangle_defect,
                 report.composition_defect, report.quadrangle_defect)
    rows.append(_at_most(c, "worst axiom defect vs tau_comp",
                         small.tau_comp, defect))
    rows.append(_flag(c, "axiom report ok", report.ok))
    rows.append(_at_most(c, "elapsed seconds", 30.0, time.perf_counter() - t0))
    return rows


def _random_network(rng: np.random.Generator):
    k = int(rng.integers(1, 5))
    segs = []
    for lane in range(k):
        x0 = 3.0 * lane + rng.uniform(-0.3, 0.3)
        start = rng.uniform(0.0, 0.5)
        duration = rng.uniform(0.2, 0.5)
        v = rng.uniform(-0.4, 0.4)
        rho = rng.uniform(0.3, 4.0)
        segs.append(straight_segment(x0, start, x0 + v * duration,
                                     start + duration, rho))
    return planted(*segs)


def _criterion_theta_rate(ctx: VerifyContext) -> list:
    c = "09-theta-rate"
    rng = np.random.default_rng(ctx.seed)
    violations = 0
    for _ in range(10):
        mu = _random_network(rng)
        rate = rate_of_measure(mu)
        spec = auto_theta_grid(mu)
        snapped, _moved = snap_measure_to_grid(mu, spec)
        theta = theta_total_from_measure(snapped, spec)
        if theta > 0.75 * rate + 1e-6:
            violations += 1
    rows = [_close(c, "theta > (3/4) rate violations on 10 networks",
                   0.0, violations, 0.0)]
    mu1 = planted(vertical_segment(0.0, 0.0, 1.0, rho=1.0))
    theta1 = theta_total_from_measure(mu1, GridSpec(-1, 1, 0, 1, nx=30, nt=20))
    rows.append(_rel(c, "equality on single vertical segment",
                     0.75 * rate_of_measure(mu1), theta1, 0.01))
    return rows


def _criterion_partition(ctx: VerifyContext) -> list:
    c = "10-partition"
    examples = [
        ("full ride", planted(vertical_segment(0.0, 0.0, 1.0, rho=1.0)),
         polyline((0.0, 0.0), (0.0, 1.0))),
        ("partial ride", planted(vertical_segment(0.0, 77.0 / 256.0,
                                                  179.0 / 256.0, rho=2.0)),
         polyline((0.0, 0.0), (0.0, 1.0))),
        ("zigzag off support", empty_measure(),
         polyline((0.0, 0.0), (0.3, 0.25), (-0.2, 0.5), (0.1, 0.75),
                  (0.0, 1.0))),
    ]
    rows = []
    for name, mu, gamma in examples:
        exact = path_rate(mu, gamma)
        over = 0
        val = math.nan
        for n in (1, 2, 4, 8, 16, 32, 64, 128, 256):
            part = uniform_partition(gamma.t0, gamma.t1, n)
            w = weight_function(mu, gamma, part)
            val = partition_rate(gamma, w, part)
            if val > exact + 1e-12:
                over += 1
        rows.append(_close(c, f"{name}: rows above exact rate", 0.0, over, 0.0))
        if exact > 0.0:
            rows.append(_rel(c, f"{name}: mesh 1/256 value", exact, val, 0.01))
        else:
            rows.append(_close(c, f"{name}: mesh 1/256 value", 0.0, val, 1e-12))
    return rows


def _criterion_gradient(ctx: VerifyContext) -> list:
    c = "11-gradient"
    rows = []
    for rho in (1.0, 4.0):
        mu = planted(vertical_segment(0.0, 0.0, 1.0, rho=rho))
        q = SpaceTimePoint(0.0, 0.5)
        target = 4.0 / 3.0 * rho ** 1.5
        rows.append(_close(c, f"closed-form energy rho={rho}", target,
                           q_energy(gradient_profile(mu, q)), 1e-9))
        fd = q_energy(fd_gradient_profile(mu, q, 1e-2))
        rows.append(_rel(c, f"finite-difference energy rho={rho}", target,
                         fd, 0.02))
    return rows


def _criterion_iota(ctx: VerifyContext) -> list:
    c = "12-iota-pinch"
    target = 8.0 / 27.0
    dev3 = abs(iota_eval(1e-3) * 1e-6 - target)
    dev4 = abs(iota_eval(1e-4) * 1e-8 - target)
    return [
        _at_most(c, "|iota(t) t^2 - 8/27| at t=1e-3", 0.01, dev3),
        _flag(c, "deviation decreases at t=1e-4", dev4 < dev3, computed=dev4),
    ]


def _criterion_symmetry(ctx: VerifyContext) -> list:
    c = "13-symmetry"
    rng = np.random.default_rng(ctx.seed + 1)
    maps = [
        SymmetryMap("time-shift", 0.7),
        SymmetryMap("space-shift", -1.3),
        SymmetryMap("shear", 0.8),
        SymmetryMap("kpz-rescale", 1.7),
    ]
    worst = 0.0
    for _ in range(5):
        mu = _random_network(rng)
        base = rate_of_measure(mu)
        for m in maps:
            mapped = rate_of_measure(apply_symmetry(m, mu))
            worst = max(worst, abs(mapped - base) / base)
    return [_at_most(c, "max relative drift under 4 symmetries", 1e-9, worst)]


def _criterion_geodesic(ctx: VerifyContext) -> list:
    c = "14-geodesic"
    rows = []
    # straight chord in the Dirichlet metric
    spec = GridSpec(-1.0, 1.0, 0.0, 1.0, nx=20, nt=10)
    e = dirichlet_grid_metric(spec)
    cases = [("dirichlet chord", e, pair(-0.5, 0.0, 0.5, 1.0), -1.0)]
    mu1 = planted(vertical_segment(0.0, 0.0, 1.0, rho=1.0))
    spec1 = GridSpec(-1.0, 1.0, 0.0, 1.0, nx=30, nt=20)
    cases.append(("vertical ride", evaluate_emu_grid(mu1, spec1),
                  pair(0.0, 0.0, 0.0, 1.0), 1.0))
    t_j = 0.2
    trunk_rho = 4.0 * (1.0 + 1.0 / (1.0 - t_j)) / (1.0 + 3.0 * t_j)
    branch_rho = 1.25 ** 2 - 0.15625
    mu_y = planted(
        vertical_segment(0.0, 0.0, t_j, trunk_rho),
        straight_segment(0.0, t_j, -1.0, 1.0, branch_rho),
        straight_segment(0.0, t_j, 1.0, 1.0, branch_rho),
    )
    spec_y = GridSpec(-1.0, 1.0, 0.0, 1.0, nx=40, nt=25)
    cases.append(("junction ride", evaluate_emu_grid(mu_y, spec_y),
                  pair(0.0, 0.0, 1.0, 1.0), 1.0))
    for name, metric, u, e_val in cases:
        g = rightmost_geodesic(metric, u)
        part = Partition(tuple(metric.spec.ts()))
        length = path_length_partition(metric, g, part)
        rows.append(_at_most(c, f"{name}: |partition length - e(u)|",
                             metric.spec.tau_comp, abs(length - e_val)))
        rows.append(_flag(c, f"{name}: wander bound", bool(wander_check(metric, g))))
    return rows


CRITERIA: tuple = (
    (1, "01-one-point", _criterion_one_point),
    (2, "02-two-point", _criterion_two_point),
    (3, "03-jrate-tent", _criterion_tent),
    (4, "04-jrate-scaling", _criterion_scaling),
    (5, "05-jrate-sandwich", _criterion_sandwich),
    (6, "06-jrate-trapezoid", _criterion_trapezoid),
    (7, "07-jrate-divergent", _criterion_divergent),
    (8, "08-metric-grid", _criterion_metric_grid),
    (9, "09-theta-rate", _criterion_theta_rate),
    (10, "10-partition", _criterion_partition),
    (11, "11-gradient", _criterion_gradient),
    (12, "12-iota-pinch", _criterion_iota),
    (13, "13-symmetry", _criterion_symmetry),
    (14, "14-geodesic", _criterion_geodesic),
)


def run_criterion(index: int, ctx: Optional[VerifyContext] = None) -> list:
    ctx = ctx or VerifyContext()
    for num, _slug, fn in CRITERIA:
        if num == index:
            return fn(ctx)
    raise ValueError(f"no criterion {index}; valid: 1..{len(CRITERIA)}")


def run_all(filter_name: Optional[str] = None,
            ctx: Optional[VerifyContext] = None) -> list:
    """Rows for every criterion whose slug contains ``filter_name``."""
    ctx = ctx or VerifyContext()
    rows = []
    for _num, slug, fn in CRITERIA:
        if filter_name and filter_name not in slug:
            continue
        rows.extend(fn(ctx))
    if filter_name and not rows:
        raise ValueError(f"filter {filter_name!r} matches no criterion slug")
    return rows


def render_table(rows: Sequence[CheckRow]) -> str:
    headers = ("criterion", "check", "expected", "computed", "tolerance",
               "status")
    table = [headers]
    for r in rows:
        table.append((r.criterion, r.name, f"{r.expected:.9g}",
                      f"{r.computed:.9g}", f"{r.tol:.3g}",
                      "ok" if r.passed else "FAIL"))
    widths = [max(len(row[i]) for row in table) for i in range(len(headers))]
    lines = []
    for i, row in enumerate(table):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    failed = sum(1 for r in rows if not r.passed)
    lines.append("")
    lines.append(f"{len(rows) - failed}/{len(rows)} checks passed"
                 + (f", {failed} FAILED" if failed else ""))
    return "\n".join(lines)
