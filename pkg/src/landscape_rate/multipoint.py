"""Minimal total rate subject to point constraints e(u_i) >= alpha_i.

The optimizer exploits the structure of minimizers: the optimal planted
measure is supported on finitely many straight segments with constant
density, meeting only at junctions of degree >= 3 (or at constraint
endpoints).  Candidate topologies are therefore small Steiner-like forests
over the constraint endpoints; for each one, junction positions are tuned by
coordinate descent with golden-section line searches, and the per-segment
densities by a tiny convex program.

Closed forms for one constraint and for the symmetric two-point instance
(the V/Y transition) are provided separately and double as oracles for the
numerical path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from .geometry import (
    ABS_TOL,
    SpaceTimePoint,
    TemporalPair,
    dirichlet_distance,
    pair,
)
from .measures import (
    NetworkError,
    PlantedMeasure,
    planted,
    rate_of_measure,
    straight_segment,
)

__all__ = [
    "PointConstraint",
    "point_constraint",
    "CandidateTopology",
    "MultipointSolution",
    "TwoPointSolution",
    "StructureReport",
    "one_point_rate",
    "two_point_rate",
    "solve_multipoint",
    "verify_optimizer_structure",
]

# relative margin keeping junction times away from degenerate durations
EPS_T = 1e-6


@dataclass(frozen=True)
class PointConstraint:
    """Require the metric to reach at least ``alpha`` on the pair ``u``."""

    u: TemporalPair
    alpha: float

    @property
    def excess(self) -> float:
        """Constraint level above the Dirichlet value (<= 0 means free)."""
        return self.alpha - dirichlet_distance(self.u)


def point_constraint(x0: float, t0: float, x1: float, t1: float,
                     alpha: float) -> PointConstraint:
    return PointConstraint(pair(x0, t0, x1, t1), float(alpha))


@dataclass(frozen=True)
class CandidateTopology:
    """A solved topology: straight segments with constant full density.

    ``segments`` holds (start, end, rho) triples; ``chains`` maps each
    retained constraint to the segment indices its witness path rides, in
    time order.  ``junctions`` are the optimized free points (possibly
    empty); ``boundary_active`` flags a junction pushed against its duration
    clamp, which is how a collapsing topology (the V regime) shows up.
    """

    name: str
    junctions: tuple
    segments: tuple
    chains: tuple
    boundary_active: bool = False

    def rate(self) -> float:
        total = 0.0
        for a, b, rho in self.segments:
            total += 4.0 / 3.0 * rho ** 1.5 * (b.t - a.t)
        return total


@dataclass(frozen=True)
class MultipointSolution:
    rate: float
    topology: CandidateTopology
    achieved: tuple
    constraints: tuple
    measure: Optional[PlantedMeasure]
    junction_budget: int
    candidates: tuple = field(default=())

    def __post_init__(self):
        for con, got in zip(self.constraints, self.achieved):
            if got < con.alpha - 1e-6 * (1.0 + abs(con.alpha)):
                raise ValueError(
                    f"solution violates constraint at {con.u}: {got} < {con.alpha}")


# ---------------------------------------------------------------------------
# closed forms


def one_point_rate(alpha: float, u: Optional[TemporalPair] = None) -> float:
    """Least rate with e(u) >= alpha; defaults to the unit vertical pair.

    The optimal measure is a single constant-density segment on u itself,
    and the value depends only on the excess over the Dirichlet level and
    the duration.
    """
    if u is None:
        u = pair(0.0, 0.0, 0.0, 1.0)
    excess = alpha - dirichlet_distance(u)
    if excess <= 0.0:
        return 0.0
    return 4.0 / 3.0 * excess ** 1.5 / math.sqrt(u.duration)


@dataclass(frozen=True)
class TwoPointSolution:
    rate: float
    t_star: float
    topology: str  # "V" or "Y"


def two_point_rate(alpha: float) -> TwoPointSolution:
    """Symmetric two-point instance: e(0,0;-1,1) and e(0,0;1,1) >= alpha.

    Below the Dirichlet level (alpha < -1) the constraints are free.  For
    alpha in [-1, 0] two disjoint segments are optimal (V); above 0 a shared
    trunk appears (Y) with junction time t_star.
    """
    if alpha <= 0.0:
        lift = max(1.0 + alpha, 0.0)
        return TwoPointSolution(rate=8.0 / 3.0 * lift ** 1.5, t_star=0.0,
                                topology="V")
    t_star = (math.sqrt(1.0 + 1.0 / alpha) - math.sqrt(1.0 / alpha)) ** 2
    rate = 4.0 / 3.0 + 2.0 * alpha + 4.0 / 3.0 * (1.0 + alpha) ** 1.5
    return TwoPointSolution(rate=rate, t_star=t_star, topology="Y")


# ---------------------------------------------------------------------------
# inner convex program: densities for a fixed geometry


def _chain_penalty(coords: Sequence[tuple], u: TemporalPair) -> float:
    """Extra Dirichlet cost of the bent chain relative to the direct line."""
    bend = 0.0
    for a, b in coords:
        dt = b.t - a.t
        bend += (b.x - a.x) ** 2 / dt
    return bend - u.displacement ** 2 / u.duration


def _solve_densities(durations, chains, levels):
    """min (4/3) sum rho^{3/2} T  s.t.  sum_{m in chain_i} rho_m T_m >= c_i.

    Constraints with c_i <= 0 are dropped.  Returns (rho, objective) or None
    if the geometry cannot support the constraints (it always can while all
    durations are positive, so None only signals solver breakdown).
    """
    T = np.asarray(durations, dtype=float)
    n = T.size
    active = [(ch, c) for ch, c in zip(chains, levels) if c > 0.0]
    if not active:
        return np.zeros(n), 0.0

    def obj(r):
        return 4.0 / 3.0 * float(np.sum(np.maximum(r, 0.0) ** 1.5 * T))

    def jac(r):
        return 2.0 * np.sqrt(np.maximum(r, 0.0)) * T

    cons = []
    for ch, c in active:
        a = np.zeros(n)
        for m in ch:
            a[m] += T[m]
        cons.append({"type": "ineq",
                     "fun": (lambda r, a=a, c=c: float(a @ r - c)),
                     "jac": (lambda r, a=a: a)})
    # feasible start: meet every chain on its own, taking the max per segment
    x0 = np.zeros(n)
    for ch, c in active:
        tot = sum(T[m] for m in ch)
        for m in ch:
            x0[m] = max(x0[m], c / tot)
    res = optimize.minimize(obj, x0, jac=jac, bounds=[(0.0, None)] * n,
                            constraints=cons, method="SLSQP",
                            options={"maxiter": 400, "ftol": 1e-14})
    rho = np.maximum(res.x if res.success else x0, 0.0)
    # repair any residual violation by scaling up (keeps a certified value)
    for ch, c in active:
        got = sum(rho[m] * T[m] for m in ch)
        if got < c:
            lift = (c - got) / sum(T[m] for m in ch)
            for m in ch:
                rho[m] += lift
    return rho, obj(rho)


# ---------------------------------------------------------------------------
# topology templates


class _Template:
    """A combinatorial layout whose junction coordinates remain free.

    ``nodes`` are either fixed terminal points or junction indices; segments
    and chains are expressed over node ids.  Evaluation resolves
    coordinates, merges coinciding segments (this is how a shared trunk
    emerges from two constraints with a common start), and solves the inner
    density program.
    """

    def __init__(self, name, n_junctions, segments, chains, cons):
        self.name = name
        self.n_junctions = n_junctions
        self.segments = segments    # list of (node_a, node_b)
        self.chains = chains        # per constraint: list of segment ids
        self.cons = cons            # retained constraints, template order

    def resolve(self, params, node):
        """node id -> SpaceTimePoint given flat junction params [x0,t0,x1,t1,...]."""
        kind, idx = node
        if kind == "T":
            return idx  # already a SpaceTimePoint
        x = params[2 * idx]
        t = params[2 * idx + 1]
        return SpaceTimePoint(float(x), float(t))

    def evaluate(self, params):
        """Return (objective, detail) for junction coordinates ``params``."""
        pts = [(self.resolve(params, a), self.resolve(params, b))
               for a, b in self.segments]
        # time-degenerate or reversed segments invalidate the layout
        for a, b in pts:
            if b.t - a.t <= EPS_T / 2.0:
                return math.inf, None
        # merge coinciding segments so shared trunks count once
        merged = []
        remap = {}
        for sid, (a, b) in enumerate(pts):
            for mid, (ma, mb) in enumerate(merged):
                if (abs(ma.x - a.x) <= ABS_TOL and abs(ma.t - a.t) <= ABS_TOL
                        and abs(mb.x - b.x) <= ABS_TOL and abs(mb.t - b.t) <= ABS_TOL):
                    remap[sid] = mid
                    break
            else:
                remap[sid] = len(merged)
                merged.append((a, b))
        chains = []
        levels = []
        for ch, con in zip(self.chains, self.cons):
            ids = []
            for sid in ch:
                mid = remap[sid]
                if mid not in ids:
                    ids.append(mid)
            coords = [merged[mid] for mid in ids]
            levels.append(con.excess + _chain_penalty(coords, con.u))
            chains.append(tuple(ids))
        durations = [b.t - a.t for a, b in merged]
        rho, objective = _solve_densities(durations, chains, levels)
        detail = (merged, tuple(rho), tuple(chains), tuple(levels))
        return objective, detail


def _golden_min(fn, lo, hi, tol):
    """Golden-section minimum of a unimodal-ish scalar function."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    return (a + b) / 2.0


def _optimize_template(tpl: _Template, bounds, x0, move_tol=1e-8, max_sweeps=60):
    """Coordinate descent over junction coordinates with golden sections."""
    params = np.array(x0, dtype=float)
    best, _ = tpl.evaluate(params)
    if not params.size:
        return params, best
    span = max(hi - lo for lo, hi in bounds)
    for _ in range(max_sweeps):
        moved = 0.0
        for i in range(params.size):
            lo, hi = bounds[i]

            def fn(v, i=i):
                trial = params.copy()
                trial[i] = v
                return tpl.evaluate(trial)[0]

            v = _golden_min(fn, lo, hi, tol=1e-10 * max(span, 1.0))
            fv = fn(v)
            if fv < best - 1e-15:
                moved = max(moved, abs(v - params[i]))
                params[i] = v
                best = fv
        if moved < move_tol * max(span, 1.0):
            break
    return params, best


# ---------------------------------------------------------------------------
# template construction


def _terminal(p: SpaceTimePoint):
    return ("T", p)


def _templates_for(cons: Sequence[PointConstraint], junction_budget: int):
    """Candidate layouts for the retained constraints."""
    k = len(cons)
    out = []
    # each constraint served by its own straight segment
    segs = [(_terminal(c.u.p), _terminal(c.u.q)) for c in cons]
    out.append(_Template("disjoint", 0, segs, [[i] for i in range(k)], list(cons)))
    if k >= 2 and junction_budget >= 1:
        # one shared junction: p_i -> J -> q_i; coinciding legs merge into
        # shared trunks, which is how the Y topology arises
        segs = []
        chains = []
        for i, c in enumerate(cons):
            segs.append((_terminal(c.u.p), ("J", 0)))
            segs.append((("J", 0), _terminal(c.u.q)))
            chains.append([2 * i, 2 * i + 1])
        out.append(_Template("fan", 1, segs, chains, list(cons)))
    starts = {(round(c.u.p.x, 9), round(c.u.p.t, 9)) for c in cons}
    ends = {(round(c.u.q.x, 9), round(c.u.q.t, 9)) for c in cons}
    if k >= 2 and junction_budget >= 2 and len(starts) == k and len(ends) == k:
        # distinct terminals: collect, ride a shared edge, then fan out
        segs = []
        chains = []
        for i, c in enumerate(cons):
            segs.append((_terminal(c.u.p), ("J", 0)))
            segs.append((("J", 1), _terminal(c.u.q)))
        edge = len(segs)
        segs.append((("J", 0), ("J", 1)))
        for i in range(k):
            chains.append([2 * i, edge, 2 * i + 1])
        out.append(_Template("shared-edge", 2, segs, chains, list(cons)))
    return out


def _junction_box(cons: Sequence[PointConstraint]):
    xs = [c.u.p.x for c in cons] + [c.u.q.x for c in cons]
    ts = [c.u.p.t for c in cons] + [c.u.q.t for c in cons]
    x_lo, x_hi = min(xs), max(xs)
    pad = max(x_hi - x_lo, 1.0)
    t_lo = max(c.u.p.t for c in cons)
    t_hi = min(c.u.q.t for c in cons)
    return (x_lo - pad, x_hi + pad), (t_lo, t_hi)


def solve_multipoint(constraints: Sequence[PointConstraint],
                     junction_budget: int = 2) -> MultipointSolution:
    """Least total rate subject to all point constraints.

    Enumerates candidate topologies up to ``junction_budget`` interior
    junctions, optimizes each, and keeps the best.  Constraints at or below
    their Dirichlet value are satisfied by any directed metric and get no
    segments.  For one or two constraints the result matches the closed
    forms; the enumeration is the device that stands in for the unknown
    general segment count, so the budget is echoed in the solution.
    """
    if not constraints:
        raise ValueError("need at least one constraint")
    cons_all = [PointConstraint(c.u, float(c.alpha)) for c in constraints]
    # deduplicate identical pairs, keeping the binding level
    retained: list[PointConstraint] = []
    for c in cons_all:
        for i, r in enumerate(retained):
            if (abs(r.u.p.x - c.u.p.x) <= ABS_TOL
                    and abs(r.u.p.t - c.u.p.t) <= ABS_TOL
                    and abs(r.u.q.x - c.u.q.x) <= ABS_TOL
                    and abs(r.u.q.t - c.u.q.t) <= ABS_TOL):
                if c.alpha > r.alpha:
                    retained[i] = c
                break
        else:
            retained.append(c)
    binding = [c for c in retained if c.excess > 0.0]

    if not binding:
        topo = CandidateTopology(name="empty", junctions=(), segments=(),
                                 chains=())
        achieved = tuple(dirichlet_distance(c.u) for c in cons_all)
        return MultipointSolution(rate=0.0, topology=topo, achieved=achieved,
                                  constraints=tuple(cons_all), measure=None,
                                  junction_budget=junction_budget)

    (x_lo, x_hi), (t_lo, t_hi) = _junction_box(binding)
    t_span = t_hi - t_lo
    results = []
    for tpl in _templates_for(binding, junction_budget):
        if tpl.n_junctions == 0:
            val, detail = tpl.evaluate(np.empty(0))
            params = np.empty(0)
        else:
            if t_span <= 2 * EPS_T:
                continue
            bounds = []
            x0 = []
            for _ in range(tpl.n_junctions):
                bounds.extend([
                    (x_lo, x_hi),
                    (t_lo + EPS_T * t_span, t_hi - EPS_T * t_span),
                ])
                x0.extend([(x_lo + x_hi) / 2.0, (t_lo + t_hi) / 2.0])
            params, val = _optimize_template(tpl, bounds, x0)
            _, detail = tpl.evaluate(params)
        if detail is None or not math.isfinite(val):
            continue
        merged, rho, chains, _levels = detail
        # a candidate must define a valid (internally disjoint) network
        try:
            measure = _build_measure(merged, rho)
        except NetworkError:
            continue
        boundary = False
        for j in range(tpl.n_junctions):
            tj = params[2 * j + 1]
            if (tj - (t_lo + EPS_T * t_span) < 2 * EPS_T * t_span
                    or (t_hi - EPS_T * t_span) - tj < 2 * EPS_T * t_span):
                boundary = True
        junctions = tuple(SpaceTimePoint(float(params[2 * j]),
                                         float(params[2 * j + 1]))
                          for j in range(tpl.n_junctions))
        segments = tuple((a, b, float(r)) for (a, b), r in zip(merged, rho))
        topo = CandidateTopology(name=tpl.name, junctions=junctions,
                                 segments=segments, chains=chains,
                                 boundary_active=boundary)
        true_rate = rate_of_measure(measure) if measure is not None else topo.rate()
        results.append((true_rate, len(topo.segments), topo, measure, chains))
    if not results:
        raise RuntimeError("no admissible topology found")
    results.sort(key=lambda r: (r[0], r[1]))
    rate, _, topo, measure, chains = results[0]

    chain_value = {}
    for ci, ch in enumerate(chains):
        v = 0.0
        for m in ch:
            a, b, r = topo.segments[m]
            dt = b.t - a.t
            v += r * dt - (b.x - a.x) ** 2 / dt
        chain_value[id(binding[ci])] = v
    achieved = []
    for c in cons_all:
        d = dirichlet_distance(c.u)
        best = d
        for bc in binding:
            same = (abs(bc.u.p.x - c.u.p.x) <= ABS_TOL
                    and abs(bc.u.p.t - c.u.p.t) <= ABS_TOL
                    and abs(bc.u.q.x - c.u.q.x) <= ABS_TOL
                    and abs(bc.u.q.t - c.u.q.t) <= ABS_TOL)
            if same:
                best = max(best, chain_value[id(bc)])
        achieved.append(best)
    return MultipointSolution(rate=rate, topology=topo,
                              achieved=tuple(achieved),
                              constraints=tuple(cons_all), measure=measure,
                              junction_budget=junction_budget,
                              candidates=tuple((r[2].name, r[0]) for r in results))


def _build_measure(merged, rho) -> Optional[PlantedMeasure]:
    segs = []
    for (a, b), r in zip(merged, rho):
        if r <= 1e-12:
            continue
        segs.append(straight_segment(a.x, a.t, b.x, b.t, float(r)))
    if not segs:
        return None
    return planted(*segs)


# ---------------------------------------------------------------------------
# structure verification


@dataclass(frozen=True)
class StructureReport:
    ok: bool
    segments_straight: bool
    density_constant: bool
    junction_degrees: tuple
    degrees_ok: bool
    saturation_ok: bool
    messages: tuple


def verify_optimizer_structure(sol: MultipointSolution,
                               tol: float = 1e-6) -> StructureReport:
    """Check the solved topology against the minimizer structure.

    Straightness and constant density hold by construction and are checked
    on the realized measure; interior junctions (those not sitting on a
    constraint endpoint) must have degree >= 3; every constraint is either
    active or all segments serving only slack constraints carry zero
    density.
    """
    messages = []
    straight = True
    constant = True
    if sol.measure is not None:
        for seg in sol.measure.segments:
            if len(seg.path.breakpoints) != 2:
                straight = False
                messages.append("segment with interior breakpoints")
            if len(seg.density) != 1:
                constant = False
                messages.append("segment with varying density")

    terminals = []
    for c in sol.constraints:
        terminals.append(c.u.p)
        terminals.append(c.u.q)

    def at_terminal(p):
        return any(abs(p.x - q.x) <= ABS_TOL and abs(p.t - q.t) <= ABS_TOL
                   for q in terminals)

    degrees = []
    degrees_ok = True
    for j in sol.topology.junctions:
        deg = 0
        for a, b, _r in sol.topology.segments:
            for end in (a, b):
                if abs(end.x - j.x) <= ABS_TOL and abs(end.t - j.t) <= ABS_TOL:
                    deg += 1
        degrees.append(deg)
        if not at_terminal(j) and deg < 3:
            degrees_ok = False
            messages.append(f"interior junction {j} has degree {deg}")

    saturation_ok = True
    slack_chains = set()
    for ci, (c, got) in enumerate(zip(sol.constraints, sol.achieved)):
        if got > c.alpha + tol * (1.0 + abs(c.alpha)):
            slack_chains.add(ci)
    if slack_chains and sol.topology.chains:
        used_by_active = set()
        for ci, ch in enumerate(sol.topology.chains):
            if ci not in slack_chains:
                used_by_active.update(ch)
        for ci in slack_chains:
            if ci >= len(sol.topology.chains):
                continue
            for m in sol.topology.chains[ci]:
                if m not in used_by_active:
                    _a, _b, r = sol.topology.segments[m]
                    if r > tol:
                        saturation_ok = False
                        messages.append(
                            f"slack constraint {ci} rides segment {m} with rho={r:g}")
    ok = straight and constant and degrees_ok and saturation_ok
    return StructureReport(ok=ok, segments_straight=straight,
                           density_constant=constant,
                           junction_degrees=tuple(degrees),
                           degrees_ok=degrees_ok,
                           saturation_ok=saturation_ok,
                           messages=tuple(messages))
