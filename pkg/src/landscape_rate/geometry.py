"""Space-time points, ordered pairs, polyline paths, and the parabolic
reference metric.

Everything here is exact arithmetic on piecewise-linear data: no quadrature,
no grids. The reference ("Dirichlet") metric between two points is the
negative of the squared displacement over the elapsed time; the matching path
functional is the negative Dirichlet energy. Straight lines are the unique
paths achieving the point-pair value.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

ABS_TOL = 1e-9


@dataclass(frozen=True)
class SpaceTimePoint:
    x: float
    t: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.t)):
            raise ValueError("coordinates must be finite")


@dataclass(frozen=True)
class TemporalPair:
    """An ordered pair of points with strictly increasing time."""

    p: SpaceTimePoint
    q: SpaceTimePoint

    def __post_init__(self):
        if not self.p.t < self.q.t:
            raise ValueError("pair requires p.t < q.t")

    @property
    def duration(self) -> float:
        return self.q.t - self.p.t

    @property
    def displacement(self) -> float:
        return self.q.x - self.p.x

    @property
    def slope(self) -> float:
        return self.displacement / self.duration


def pair(x0: float, t0: float, x1: float, t1: float) -> TemporalPair:
    """Shorthand constructor: pair(0, 0, 1, 1) == ((0,0); (1,1))."""
    return TemporalPair(SpaceTimePoint(x0, t0), SpaceTimePoint(x1, t1))


def dirichlet_distance(u: TemporalPair) -> float:
    """-(displacement)^2 / duration; zero iff the pair is vertical."""
    return -u.displacement ** 2 / u.duration


@dataclass(frozen=True)
class PolylinePath:
    """Continuous piecewise-linear path, stored by its breakpoints.

    Breakpoint times are strictly increasing; the value at any time in the
    domain is linear interpolation between the surrounding breakpoints.
    """

    breakpoints: tuple[SpaceTimePoint, ...]

    def __post_init__(self):
        if len(self.breakpoints) < 2:
            raise ValueError("a path needs at least two breakpoints")
        ts = [b.t for b in self.breakpoints]
        if any(b >= a for b, a in zip(ts, ts[1:])):
            raise ValueError("breakpoint times must be strictly increasing")

    @property
    def t0(self) -> float:
        return self.breakpoints[0].t

    @property
    def t1(self) -> float:
        return self.breakpoints[-1].t

    def value_at(self, r: float) -> float:
        return path_value_at(self, r)

    def slope_at(self, r: float) -> float:
        """Slope of the piece containing r (right-continuous at breakpoints)."""
        bs = self.breakpoints
        if not (self.t0 - ABS_TOL <= r <= self.t1 + ABS_TOL):
            raise ValueError(f"time {r} outside path domain [{self.t0}, {self.t1}]")
        for a, b in zip(bs, bs[1:]):
            if r < b.t or b is bs[-1]:
                return (b.x - a.x) / (b.t - a.t)
        raise AssertionError("unreachable")

    def clip(self, ta: float, tb: float) -> "PolylinePath":
        """The sub-path on [ta, tb] (must be inside the domain, ta < tb)."""
        if ta >= tb:
            raise ValueError("empty clip interval")
        ta = max(ta, self.t0)
        tb = min(tb, self.t1)
        pts = [SpaceTimePoint(self.value_at(ta), ta)]
        for b in self.breakpoints:
            if ta + ABS_TOL < b.t < tb - ABS_TOL:
                pts.append(b)
        pts.append(SpaceTimePoint(self.value_at(tb), tb))
        return PolylinePath(tuple(pts))


def polyline(*coords: tuple[float, float]) -> PolylinePath:
    """Build a path from (x, t) tuples: polyline((0,0), (1,0.5), (0,1))."""
    return PolylinePath(tuple(SpaceTimePoint(x, t) for x, t in coords))


def path_value_at(path: PolylinePath, r: float) -> float:
    bs = path.breakpoints
    if not (path.t0 - ABS_TOL <= r <= path.t1 + ABS_TOL):
        raise ValueError(f"time {r} outside path domain [{path.t0}, {path.t1}]")
    r = min(max(r, path.t0), path.t1)
    for a, b in zip(bs, bs[1:]):
        if r <= b.t:
            lam = (r - a.t) / (b.t - a.t)
            return a.x + lam * (b.x - a.x)
    raise AssertionError("unreachable")


def dirichlet_energy(path: PolylinePath) -> float:
    """Negative Dirichlet energy, -sum slope^2 * duration over the pieces."""
    total = 0.0
    bs = path.breakpoints
    for a, b in zip(bs, bs[1:]):
        dt = b.t - a.t
        total -= ((b.x - a.x) / dt) ** 2 * dt
    return total


@dataclass(frozen=True)
class Partition:
    """Strictly increasing times r_0 < ... < r_k; mesh is the largest gap."""

    times: tuple[float, ...]

    def __post_init__(self):
        ts = self.times
        if len(ts) < 2:
            raise ValueError("partition needs at least two times")
        if any(b >= a for b, a in zip(ts, ts[1:])):
            raise ValueError("partition times must be strictly increasing")

    @property
    def mesh(self) -> float:
        ts = self.times
        return max(a - b for b, a in zip(ts, ts[1:]))

    def matches(self, ta: float, tb: float) -> bool:
        return abs(self.times[0] - ta) <= ABS_TOL and abs(self.times[-1] - tb) <= ABS_TOL


def uniform_partition(ta: float, tb: float, n: int) -> Partition:
    return Partition(tuple(ta + (tb - ta) * k / n for k in range(n + 1)))


# ---------------------------------------------------------------------------
# symmetry transforms
#
# Four maps leave every rate computed here invariant: translation in time,
# translation in space, shear (adds a constant to every slope), and the
# parabolic rescaling (x, t) -> (q^2 x, q^3 t) with densities divided by q^2.
# The rescaling convention is fixed by invariance: a density patch rho over
# duration dt contributes rho^{3/2} dt, and (rho/q^2)^{3/2} * q^3 dt restores
# it exactly.  Only the invariance is contract-tested, not the convention.
# ---------------------------------------------------------------------------

SYMMETRY_KINDS = ("time-shift", "space-shift", "shear", "kpz-rescale")


@dataclass(frozen=True)
class SymmetryMap:
    kind: str
    parameter: float

    def __post_init__(self):
        if self.kind not in SYMMETRY_KINDS:
            raise ValueError(f"unknown symmetry kind {self.kind!r}")
        if self.kind == "kpz-rescale" and not self.parameter > 0:
            raise ValueError("rescale factor must be positive")
        if not math.isfinite(self.parameter):
            raise ValueError("parameter must be finite")

    def inverse(self) -> "SymmetryMap":
        if self.kind == "kpz-rescale":
            return SymmetryMap(self.kind, 1.0 / self.parameter)
        return SymmetryMap(self.kind, -self.parameter)

    def map_point(self, p: SpaceTimePoint) -> SpaceTimePoint:
        c = self.parameter
        if self.kind == "time-shift":
            return SpaceTimePoint(p.x, p.t + c)
        if self.kind == "space-shift":
            return SpaceTimePoint(p.x + c, p.t)
        if self.kind == "shear":
            return SpaceTimePoint(p.x + c * p.t, p.t)
        return SpaceTimePoint(c * c * p.x, c * c * c * p.t)

    def map_density(self, rho: float) -> float:
        if self.kind == "kpz-rescale":
            return rho / self.parameter ** 2
        return rho


def apply_symmetry(m: SymmetryMap, obj):
    """Transform a point, pair, or path; measures are handled in measures.py."""
    if isinstance(obj, SpaceTimePoint):
        return m.map_point(obj)
    if isinstance(obj, TemporalPair):
        return TemporalPair(m.map_point(obj.p), m.map_point(obj.q))
    if isinstance(obj, PolylinePath):
        return PolylinePath(tuple(m.map_point(b) for b in obj.breakpoints))
    # planted measures register themselves to avoid a circular import
    transform = getattr(obj, "_apply_symmetry", None)
    if transform is not None:
        return transform(m)
    raise TypeError(f"cannot apply symmetry to {type(obj).__name__}")
