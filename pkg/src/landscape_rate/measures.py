"""Planted network measures: weighted, internally disjoint segment systems.

A measure is carried by the graphs of finitely many polyline segments, each
with a piecewise-constant temporal density rho >= 0 (the *full* density, i.e.
including the slope^2 share; the net excess over Dirichlet is rho - slope^2
and may be negative). The entropy of a measure is sum over segments of
int rho^{3/2} dt, and the upper-tail rate it induces is 4/3 times that.

Internal disjointness: two segments whose time domains overlap on an open
interval may touch only at the endpoints of that overlap; any interior
coincidence or crossing invalidates the network.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

from .geometry import ABS_TOL, PolylinePath, SpaceTimePoint, SymmetryMap


class NetworkError(ValueError):
    """Raised when a segment system is not internally disjoint."""


@dataclass(frozen=True)
class DensityPiece:
    t0: float
    t1: float
    rho: float

    def __post_init__(self):
        if not self.t0 < self.t1:
            raise ValueError("density piece needs t0 < t1")
        if not (self.rho >= 0 and math.isfinite(self.rho)):
            raise ValueError("density must be finite and >= 0")


@dataclass(frozen=True)
class WeightedSegment:
    """A polyline path carrying a piecewise-constant temporal density.

    Density pieces must be disjoint, sorted, and inside the path's time
    domain. Times not covered by a piece carry density zero.
    """

    path: PolylinePath
    density: tuple[DensityPiece, ...]

    def __post_init__(self):
        lo, hi = self.path.t0, self.path.t1
        prev_end = lo
        for piece in self.density:
            if piece.t0 < prev_end - ABS_TOL or piece.t1 > hi + ABS_TOL:
                raise ValueError(
                    f"density piece [{piece.t0}, {piece.t1}] outside/overlapping "
                    f"path domain [{lo}, {hi}]"
                )
            prev_end = piece.t1

    def density_at(self, t: float) -> float:
        for piece in self.density:
            if piece.t0 - ABS_TOL <= t <= piece.t1 + ABS_TOL:
                return piece.rho
        return 0.0

    def entropy(self) -> float:
        return sum(p.rho ** 1.5 * (p.t1 - p.t0) for p in self.density)

    def mass(self) -> float:
        return sum(p.rho * (p.t1 - p.t0) for p in self.density)

    def clip(self, ta: float, tb: float) -> Optional["WeightedSegment"]:
        """The part of the segment inside [ta, tb], or None if empty."""
        lo = max(ta, self.path.t0)
        hi = min(tb, self.path.t1)
        if hi - lo <= ABS_TOL:
            return None
        pieces = []
        for p in self.density:
            a, b = max(p.t0, lo), min(p.t1, hi)
            if b - a > ABS_TOL:
                pieces.append(DensityPiece(a, b, p.rho))
        return WeightedSegment(self.path.clip(lo, hi), tuple(pieces))

    def breakpoint_times(self) -> list[float]:
        ts = [b.t for b in self.path.breakpoints]
        for p in self.density:
            ts.extend((p.t0, p.t1))
        return sorted(set(ts))


def constant_density(path: PolylinePath, rho: float) -> WeightedSegment:
    return WeightedSegment(path, (DensityPiece(path.t0, path.t1, rho),))


def vertical_segment(x: float, t0: float, t1: float, rho: float) -> WeightedSegment:
    path = PolylinePath((SpaceTimePoint(x, t0), SpaceTimePoint(x, t1)))
    return constant_density(path, rho)


def straight_segment(x0: float, t0: float, x1: float, t1: float, rho: float) -> WeightedSegment:
    path = PolylinePath((SpaceTimePoint(x0, t0), SpaceTimePoint(x1, t1)))
    return constant_density(path, rho)


@dataclass(frozen=True)
class SegmentNetwork:
    segments: tuple[WeightedSegment, ...]


@dataclass(frozen=True)
class NetworkCheck:
    ok: bool
    separation: Optional[float]  # None when no two domains overlap
    violation: Optional[tuple[int, int, float]]  # (i, j, time) of first failure


def _pair_gap(a: WeightedSegment, b: WeightedSegment):
    """Exact min gap and interior-coincidence detection for two polylines.

    Returns (gap, violation_time). On each common-linearity interval the
    difference is linear, so the minimum of |diff| sits at an endpoint or a
    sign change, and coincidence on a subinterval means diff vanishes at both
    of its ends.
    """
    lo = max(a.path.t0, b.path.t0)
    hi = min(a.path.t1, b.path.t1)
    if hi - lo <= ABS_TOL:
        return None, None  # domains overlap in at most a point: no constraint
    knots = sorted(
        {lo, hi}
        | {p.t for p in a.path.breakpoints if lo < p.t < hi}
        | {p.t for p in b.path.breakpoints if lo < p.t < hi}
    )
    gap = math.inf
    for c, e in zip(knots, knots[1:]):
        gc = a.path.value_at(c) - b.path.value_at(c)
        ge = a.path.value_at(e) - b.path.value_at(e)
        zc, ze = abs(gc) <= ABS_TOL, abs(ge) <= ABS_TOL
        if zc and ze:
            # coincide on all of [c, e]: its interior is interior to the overlap
            return 0.0, 0.5 * (c + e)
        if zc and c > lo + ABS_TOL:
            return 0.0, c
        if ze and e < hi - ABS_TOL:
            return 0.0, e
        if not zc and not ze and gc * ge < 0:
            t_cross = c - gc * (e - c) / (ge - gc)
            if lo + ABS_TOL < t_cross < hi - ABS_TOL:
                return 0.0, t_cross
            gap = 0.0
        gap = min(gap, abs(gc), abs(ge))
    return gap, None


def validate_network(network: SegmentNetwork) -> NetworkCheck:
    """Minimal pointwise gap over overlapping pairs, or the first violation."""
    separation = None
    segs = network.segments
    for i in range(len(segs)):
        for j in range(i + 1, len(segs)):
            gap, bad_time = _pair_gap(segs[i], segs[j])
            if bad_time is not None:
                return NetworkCheck(False, 0.0, (i, j, bad_time))
            if gap is not None:
                separation = gap if separation is None else min(separation, gap)
    return NetworkCheck(True, separation, None)


@dataclass(frozen=True)
class PlantedMeasure:
    network: SegmentNetwork

    def __post_init__(self):
        check = validate_network(self.network)
        if not check.ok:
            i, j, t = check.violation
            raise NetworkError(
                f"segments {i} and {j} coincide/cross at interior time {t:.9g}"
            )

    @property
    def segments(self) -> tuple[WeightedSegment, ...]:
        return self.network.segments

    def _apply_symmetry(self, m: SymmetryMap) -> "PlantedMeasure":
        # Temporal densities survive every map that fixes the time axis
        # (space-shift, shear) or translates it (time-shift).  Under the
        # parabolic rescale t -> q^3 t, metric values scale by q, so the
        # measure's mass does too, and the density picks up q/q^3 = q^{-2}:
        # (rho/q^2)^{3/2} * q^3 dt = rho^{3/2} dt keeps the rate invariant.
        segs = []
        for seg in self.segments:
            new_path = PolylinePath(tuple(m.map_point(b) for b in seg.path.breakpoints))
            pieces = tuple(
                DensityPiece(
                    m.map_point(SpaceTimePoint(0.0, p.t0)).t,
                    m.map_point(SpaceTimePoint(0.0, p.t1)).t,
                    m.map_density(p.rho),
                )
                for p in seg.density
            )
            segs.append(WeightedSegment(new_path, pieces))
        return PlantedMeasure(SegmentNetwork(tuple(segs)))


def planted(*segments: WeightedSegment) -> PlantedMeasure:
    return PlantedMeasure(SegmentNetwork(tuple(segments)))


def empty_measure() -> PlantedMeasure:
    return PlantedMeasure(SegmentNetwork(()))


def coincidence_intervals(
    mu: PlantedMeasure, gamma: PolylinePath
) -> list[tuple[float, float, float]]:
    """Maximal intervals where gamma rides a segment, as (t0, t1, rho) with
    constant density. Sorted by time; exact interval arithmetic on polylines.

    Isolated touching points have measure zero and are dropped.
    """
    out = []
    for seg in mu.segments:
        lo = max(gamma.t0, seg.path.t0)
        hi = min(gamma.t1, seg.path.t1)
        if hi - lo <= ABS_TOL:
            continue
        knots = sorted(
            {lo, hi}
            | {b.t for b in gamma.breakpoints if lo < b.t < hi}
            | {t for t in seg.breakpoint_times() if lo < t < hi}
        )
        for c, e in zip(knots, knots[1:]):
            gc = gamma.value_at(c) - seg.path.value_at(c)
            ge = gamma.value_at(e) - seg.path.value_at(e)
            if abs(gc) <= ABS_TOL and abs(ge) <= ABS_TOL:
                out.append((c, e, seg.density_at(0.5 * (c + e))))
    out.sort()
    return out


def measure_of_path_graph(mu: PlantedMeasure, gamma: PolylinePath) -> float:
    """mu-mass collected along gamma's graph: sum of rho * (ride duration)."""
    return sum(rho * (t1 - t0) for t0, t1, rho in coincidence_intervals(mu, gamma))


def kruzhkov_entropy(mu: PlantedMeasure) -> float:
    return sum(seg.entropy() for seg in mu.segments)


def rate_of_measure(mu: PlantedMeasure) -> float:
    return (4.0 / 3.0) * kruzhkov_entropy(mu)


def restrict(mu: PlantedMeasure, region) -> PlantedMeasure:
    """Restrict to a time window or to a subset of segment indices.

    A *tuple* (ta, tb) means the time window [ta, tb]; any other iterable
    (list, set, range, ...) is read as segment indices — the tuple/list
    distinction disambiguates restrict(mu, (0, 1)) from restrict(mu, [0, 1]).
    Clipping never increases the entropy. Segments reduced to a point vanish.
    """
    if isinstance(region, tuple) and len(region) == 2:
        ta, tb = float(region[0]), float(region[1])
        kept = [s for s in (seg.clip(ta, tb) for seg in mu.segments) if s is not None]
    elif isinstance(region, Iterable):
        idx = sorted(set(int(i) for i in region))
        kept = [mu.segments[i] for i in idx]
    else:
        raise TypeError("region must be a (ta, tb) tuple or segment indices")
    return PlantedMeasure(SegmentNetwork(tuple(kept)))
