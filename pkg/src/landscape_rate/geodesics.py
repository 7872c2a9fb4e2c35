"""Rightmost geodesics of grid metrics and the wander bound.

A geodesic between grid points p, q is reconstructed layer by layer from
the all-pairs table: at each intermediate grid time r the profile

    S_r(x) = e(p; x, r) + e(x, r; q)

attains its maximum e(p; q) along every geodesic, and taking the largest
maximizing x per layer traces the rightmost one.  Discrete ties go to the
largest grid x, the grid surrogate of the rightmost maximizer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import PolylinePath, SpaceTimePoint, TemporalPair
from .metric import GridMetric
from .rates import theta_total

__all__ = [
    "rightmost_geodesic",
    "WanderReport",
    "wander_check",
]


def rightmost_geodesic(e: GridMetric, u: TemporalPair) -> PolylinePath:
    """Rightmost maximizing path for the pair ``u`` (endpoints on grid).

    The returned polyline has one breakpoint per grid layer between the
    endpoints; its partition length over the grid times reproduces e(u)
    up to the composition tolerance of the grid.
    """
    spec = e.spec
    j0 = spec.t_index(u.p.t)
    i0 = spec.x_index(u.p.x)
    j1 = spec.t_index(u.q.t)
    i1 = spec.x_index(u.q.x)
    if j1 <= j0:
        raise ValueError("pair must span at least one grid step")
    xs = spec.xs()
    ts = spec.ts()
    points = [SpaceTimePoint(float(xs[i0]), float(ts[j0]))]
    for r in range(j0 + 1, j1):
        fwd = e.values[j0, i0, r, :]
        bwd = e.values[r, :, j1, i1]
        s = fwd + bwd
        if not np.any(np.isfinite(s)):
            raise ValueError("no admissible midpoint at an intermediate layer")
        # rightmost argmax: scan the reversed array
        s = np.where(np.isfinite(s), s, -np.inf)
        idx = s.size - 1 - int(np.argmax(s[::-1]))
        points.append(SpaceTimePoint(float(xs[idx]), float(ts[r])))
    points.append(SpaceTimePoint(float(xs[i1]), float(ts[j1])))
    return PolylinePath(tuple(points))


@dataclass(frozen=True)
class WanderReport:
    """Outcome of the wander bound on one extracted path."""

    ok: bool
    m: float
    max_deviation: float
    min_margin: float
    witness_time: Optional[float]

    def __bool__(self) -> bool:  # pragma: no cover - convenience
        return self.ok


def wander_check(e: GridMetric, pi: PolylinePath,
                 m: Optional[float] = None) -> WanderReport:
    """Check the modulus-of-continuity bound for a path in the metric ``e``.

    At every grid time r strictly between the endpoints (s, t) the path may
    deviate from the straight line by at most

        2^{1/3} (t-s)^{1/6} sqrt(m * min(r-s, t-r)),

    with m the total one-point rate content of the metric (computed via
    theta_total when not supplied).  The report carries the tightest margin
    and, on failure, the first witnessing time.
    """
    if m is None:
        m = theta_total(e)
    p = pi.breakpoints[0]
    q = pi.breakpoints[-1]
    s, t = p.t, q.t
    span = t - s
    ts = e.spec.ts()
    inside = ts[(ts > s + 1e-12) & (ts < t - 1e-12)]
    max_dev = 0.0
    min_margin = np.inf
    witness = None
    ok = True
    for r in inside:
        chord = p.x + (q.x - p.x) * (r - s) / span
        dev = abs(pi.value_at(float(r)) - chord)
        bound = 2.0 ** (1.0 / 3.0) * span ** (1.0 / 6.0) * np.sqrt(
            max(m, 0.0) * min(r - s, t - r))
        margin = bound - dev
        max_dev = max(max_dev, dev)
        if margin < min_margin:
            min_margin = margin
        if dev > bound + 1e-9 and ok:
            ok = False
            witness = float(r)
    if not np.isfinite(min_margin):
        min_margin = 0.0
    return WanderReport(ok=ok, m=float(m), max_deviation=float(max_dev),
                        min_margin=float(min_margin), witness_time=witness)
