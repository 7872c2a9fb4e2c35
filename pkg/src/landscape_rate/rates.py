"""Rate functionals at the metric level.

theta_point is the one-pair contribution [e(u)-d(u)]_+^{3/2} / sqrt(t-s);
theta_total is its supremum over collections of pairs with disjoint open time
intervals, computed by weighted-interval dynamic programming over grid times.
Path rates integrate the excess density rho_{gamma,e} = w' + gamma'^2 along a
path; for planted measures every ride interval contributes the segment's full
density and everything else contributes nothing, so path and network rates
are exact finite sums (no grid involved). The grid only enters through theta,
which is a lower bound by construction (pairs restricted to grid nodes).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .geometry import ABS_TOL, Partition, PolylinePath, TemporalPair, dirichlet_distance
from .measures import (
    PlantedMeasure,
    coincidence_intervals,
    kruzhkov_entropy,
    rate_of_measure,
)
from .metric import GridSpec, GridMetric, NEG, _Tables, dirichlet_values, evaluate_emu, require_alignment


def theta_point(
    e: Union[GridMetric, PlantedMeasure], u: TemporalPair, spec: Optional[GridSpec] = None
) -> float:
    """[e(u) - d(u)]_+^{3/2} / (t-s)^{1/2}."""
    if isinstance(e, GridMetric):
        val = e.value(u)
    elif isinstance(e, PlantedMeasure):
        if spec is None:
            raise ValueError("theta_point from a measure needs a GridSpec")
        val = evaluate_emu(e, u, spec)
    else:
        raise TypeError("e must be a GridMetric or a PlantedMeasure")
    excess = val - dirichlet_distance(u)
    return max(excess, 0.0) ** 1.5 / math.sqrt(u.duration)


def _theta_dp(m: np.ndarray, lt: int) -> float:
    """Weighted-interval scheduling over time layers: intervals [t_j, t_l]
    may share endpoint times (their interiors stay disjoint)."""
    val = np.zeros(lt)
    for l in range(1, lt):
        best = val[l - 1]
        cand = val[:l] + m[:l, l]
        finite = np.isfinite(cand)
        if finite.any():
            best = max(best, float(cand[finite].max()))
        val[l] = best
    return float(val[-1])


def theta_total(e: GridMetric) -> float:
    """Best sum of theta_point over pairs with temporally disjoint intervals."""
    v4 = e.values
    lt, lx = v4.shape[0], v4.shape[1]
    with np.errstate(invalid="ignore"):
        excess = v4 - dirichlet_values(e.spec)
    excess = np.where(np.isfinite(excess), np.maximum(excess, 0.0), 0.0)
    ts = e.spec.ts()
    dt = ts[None, :] - ts[:, None]
    m = np.full((lt, lt), NEG)
    valid = dt > 0
    peak = excess.max(axis=(1, 3))  # (j, l)
    m[valid] = peak[valid] ** 1.5 / np.sqrt(dt[valid])
    return _theta_dp(m, lt)


def theta_total_from_measure(mu: PlantedMeasure, spec: GridSpec) -> float:
    """theta_total without materializing the all-pairs array: one batched DP
    sweep per source layer, keeping only the per-(j,l) peak excess."""
    require_alignment(mu, spec)
    tab = _Tables(mu, spec)
    lt, lx = spec.nt + 1, spec.nx + 1
    nn = tab.n_nodes
    xs, ts = tab.xs, tab.ts
    dx2 = (xs[None, :] - xs[:, None]) ** 2
    m = np.full((lt, lt), NEG)
    costs = [tab.cost(j) for j in range(spec.nt)]
    for j0 in range(lt - 1):
        v = np.full((lx, tab.n_states), NEG)
        v[np.arange(lx), np.arange(lx)] = 0.0
        tab.merge(j0, v)
        for j in range(j0, lt - 1):
            v = tab.step_forward(j, v, costs[j])
            dt = ts[j + 1] - ts[j0]
            excess = np.maximum(v[:, :nn] + dx2 / dt, 0.0)
            m[j0, j + 1] = float(excess.max()) ** 1.5 / math.sqrt(dt)
    return _theta_dp(m, lt)


# ---------------------------------------------------------------------------
# weight functions and partition rates
# ---------------------------------------------------------------------------


def _dirichlet_up_to(gamma: PolylinePath, r: float) -> float:
    """Exact -int gamma'^2 over [t0, r]."""
    total = 0.0
    bs = gamma.breakpoints
    for a, b in zip(bs, bs[1:]):
        if r <= a.t + 0.0:
            break
        hi = min(r, b.t)
        sl = (b.x - a.x) / (b.t - a.t)
        total -= sl * sl * (hi - a.t)
        if r <= b.t:
            break
    return total


@dataclass(frozen=True)
class WeightFunction:
    """w(r) = e-length of gamma restricted to [a, r], sampled at partition
    times, with w(a) = 0. Increments can never fall below the Dirichlet
    increments of the path (the measure only adds mass)."""

    path: PolylinePath
    partition: Partition
    samples: tuple[float, ...]

    def __post_init__(self):
        times = self.partition.times
        if len(self.samples) != len(times):
            raise ValueError("one sample per partition time required")
        if abs(self.samples[0]) > ABS_TOL:
            raise ValueError("w must start at 0")
        for (r0, r1), (w0, w1) in zip(
            zip(times, times[1:]), zip(self.samples, self.samples[1:])
        ):
            d_inc = _dirichlet_up_to(self.path, r1) - _dirichlet_up_to(self.path, r0)
            if w1 - w0 < d_inc - 1e-9:
                raise ValueError(
                    f"weight increment {w1 - w0} below Dirichlet increment {d_inc} "
                    f"on [{r0}, {r1}]"
                )


@dataclass(frozen=True)
class ExcessDensity:
    """Cell values of (dw/dr + (mean slope)^2)_+ on a partition."""

    path: PolylinePath
    partition: Partition
    values: tuple[float, ...]

    def __post_init__(self):
        if any(v < 0 for v in self.values):
            raise ValueError("excess density must be nonnegative")


def weight_function(mu: PlantedMeasure, gamma: PolylinePath, part: Partition) -> WeightFunction:
    if not part.matches(gamma.t0, gamma.t1):
        raise ValueError("partition must span the path domain")
    rides = coincidence_intervals(mu, gamma)

    def mass_up_to(r: float) -> float:
        total = 0.0
        for t0, t1, rho in rides:
            if r <= t0:
                break
            total += rho * (min(r, t1) - t0)
        return total

    a = part.times[0]
    base = _dirichlet_up_to(gamma, a)  # zero, but keeps the formula honest
    samples = tuple(
        mass_up_to(r) - mass_up_to(a) + _dirichlet_up_to(gamma, r) - base for r in part.times
    )
    return WeightFunction(gamma, part, samples)


def excess_density(w: WeightFunction) -> ExcessDensity:
    times = w.partition.times
    vals = []
    for (r0, r1), (w0, w1) in zip(zip(times, times[1:]), zip(w.samples, w.samples[1:])):
        slope = (w.path.value_at(r1) - w.path.value_at(r0)) / (r1 - r0)
        vals.append(max((w1 - w0) / (r1 - r0) + slope * slope, 0.0))
    return ExcessDensity(w.path, w.partition, tuple(vals))


def partition_rate(gamma: PolylinePath, w: WeightFunction, part: Partition) -> float:
    """(4/3) sum of cell excess-density^{3/2} * cell length. The partition may
    be the weight function's own, or any sub-partition of its times."""
    wt = {round(t / ABS_TOL): s for t, s in zip(w.partition.times, w.samples)}

    def sample_at(r: float) -> float:
        key = round(r / ABS_TOL)
        for k in (key, key - 1, key + 1):
            if k in wt:
                return wt[k]
        raise ValueError(f"partition time {r} not among the weight samples")

    total = 0.0
    for r0, r1 in zip(part.times, part.times[1:]):
        dw = sample_at(r1) - sample_at(r0)
        slope = (gamma.value_at(r1) - gamma.value_at(r0)) / (r1 - r0)
        dens = max(dw / (r1 - r0) + slope * slope, 0.0)
        total += dens ** 1.5 * (r1 - r0)
    return (4.0 / 3.0) * total


def path_rate(mu: PlantedMeasure, gamma: PolylinePath) -> float:
    """(4/3) int rho_{gamma,e}^{3/2}: the full segment density on ride
    intervals, zero elsewhere. Exact interval arithmetic."""
    return (4.0 / 3.0) * sum(
        rho ** 1.5 * (t1 - t0) for t0, t1, rho in coincidence_intervals(mu, gamma)
    )


# ---------------------------------------------------------------------------
# network rate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateReport:
    rate: float
    theta: float
    measure: PlantedMeasure
    per_segment: tuple[float, ...]
    grid: Optional[GridSpec]
    snapped: bool = False

    def __post_init__(self):
        if self.theta > 0.75 * self.rate + 1e-6 * (1.0 + abs(self.rate)):
            raise ValueError(
                f"theta {self.theta} exceeds 3/4 of the rate {self.rate}: "
                "grid theta must lower-bound 3I/4"
            )


def snap_measure_to_grid(mu: PlantedMeasure, spec: GridSpec) -> tuple[PlantedMeasure, float]:
    """Move every breakpoint time to its nearest grid time (positions kept).
    Returns the snapped measure and the largest time moved."""
    from .measures import DensityPiece, SegmentNetwork, WeightedSegment
    from .geometry import SpaceTimePoint

    ts = spec.ts()
    moved = 0.0

    def snap(t: float) -> float:
        j = min(max(round((t - spec.t_min) / spec.dt), 0), spec.nt)
        return float(ts[j])

    segs = []
    for seg in mu.segments:
        pts = []
        for b in seg.path.breakpoints:
            t = snap(b.t)
            moved = max(moved, abs(t - b.t))
            if pts and t <= pts[-1].t + ABS_TOL:
                continue
            pts.append(SpaceTimePoint(b.x, t))
        if len(pts) < 2:
            continue
        pieces = []
        for p in seg.density:
            t0, t1 = snap(p.t0), snap(p.t1)
            moved = max(moved, abs(t0 - p.t0), abs(t1 - p.t1))
            if t1 - t0 > ABS_TOL:
                pieces.append(DensityPiece(t0, t1, p.rho))
        segs.append(WeightedSegment(PolylinePath(tuple(pts)), tuple(pieces)))
    return PlantedMeasure(SegmentNetwork(tuple(segs))), moved


def auto_theta_grid(mu: PlantedMeasure, max_nt: int = 96, nx: int = 32) -> GridSpec:
    """A modest grid whose times come as close as possible to the measure's
    breakpoints: the smallest nt that hits every normalized breakpoint within
    1e-9, else the best-fitting nt (the measure is then snapped onto it)."""
    times = sorted({t for seg in mu.segments for t in seg.breakpoint_times()})
    t0, t1 = times[0], times[-1]
    span = t1 - t0
    fracs = [(t - t0) / span for t in times[1:-1]]
    best_nt, best_err = max_nt, math.inf
    for nt in range(2, max_nt + 1):
        err = max((abs(f * nt - round(f * nt)) / nt for f in fracs), default=0.0)
        if err < best_err - 1e-15:
            best_nt, best_err = nt, err
        if err <= 1e-9 / span:
            break
    xs = [b.x for seg in mu.segments for b in seg.path.breakpoints]
    xlo, xhi = min(xs), max(xs)
    if xhi - xlo <= ABS_TOL:
        x_min, x_max = xlo - 1.0, xlo + 1.0
    else:
        pad = 0.3 * (xhi - xlo)
        x_min, x_max = xlo - pad, xhi + pad
    return GridSpec(x_min, x_max, t0, t1, nx=nx, nt=best_nt)


def network_rate(
    mu: PlantedMeasure, spec: Optional[GridSpec] = None, with_theta: bool = True
) -> RateReport:
    """Rate of the planted network: the supremum over networks is attained by
    the planted segments themselves, so the rate is the exact sum of the
    per-segment path rates (= 4/3 K). theta is evaluated on a grid — supplied,
    or an automatic one with the measure snapped onto its times if needed."""
    per_segment = tuple(path_rate(mu, seg.path) for seg in mu.segments)
    rate = float(sum(per_segment))
    if not with_theta or not mu.segments:
        return RateReport(rate, 0.0, mu, per_segment, None, False)
    if spec is None:
        spec = auto_theta_grid(mu)
    snapped_mu, moved = snap_measure_to_grid(mu, spec)
    theta = theta_total_from_measure(snapped_mu, spec)
    return RateReport(rate, theta, mu, per_segment, spec, moved > ABS_TOL)
