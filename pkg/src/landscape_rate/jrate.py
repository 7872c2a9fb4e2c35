"""Geodesic-rate convex program for continuous profiles on the unit window.

For a piecewise-linear profile f with f(0) = f(1) = 0 the rate is

    J(f) = min (4/3) * sum_k rho_k^{3/2} h_k

over cell densities rho >= 0 subject to one mass constraint per window
[t_i, t_j] of the grid:

    sum_{k in [i,j)} rho_k h_k  >=  V_ij,
    V_ij = sum_{k in [i,j)} f'_k^2 h_k - (f(t_j) - f(t_i))^2 / (t_j - t_i).

V_ij is the variance of the slope over the window (times the duration), so
it is nonnegative and vanishes exactly on windows where f is straight.
The program is solved by projected dual ascent with Barzilai-Borwein steps;
every iterate is repaired to a feasible primal point, so the reported
objective is a certified upper bound and the duality gap a certified error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import ABS_TOL

__all__ = [
    "ProfileFunction",
    "JSolution",
    "profile_from_breaks",
    "profile_from_values",
    "two_piece_profile",
    "jrate_solve",
    "jrate_two_piece",
    "jrate_bounds",
    "jrate_scaling_check",
    "jrate_superadditivity_check",
    "window_map",
    "divergent_block_profile",
    "divergent_block_rate",
    "divergent_block_l2_tail",
    "iota_eval",
]


# ---------------------------------------------------------------------------
# profiles


@dataclass(frozen=True)
class ProfileFunction:
    """Continuous piecewise-linear profile on [0, 1] with pinned endpoints.

    Stored as grid times 0 = t_0 < ... < t_n = 1 and one slope per cell.
    The endpoint values f(0) = f(1) = 0 are enforced at construction.
    """

    times: tuple
    slopes: tuple

    def __post_init__(self):
        ts = np.asarray(self.times, dtype=float)
        sl = np.asarray(self.slopes, dtype=float)
        if ts.ndim != 1 or ts.size < 2:
            raise ValueError("profile needs at least two grid times")
        if sl.shape != (ts.size - 1,):
            raise ValueError("need exactly one slope per grid cell")
        if abs(ts[0]) > ABS_TOL or abs(ts[-1] - 1.0) > ABS_TOL:
            raise ValueError("profile domain must be [0, 1]")
        h = np.diff(ts)
        if np.any(h <= 0):
            raise ValueError("grid times must be strictly increasing")
        if not (np.all(np.isfinite(ts)) and np.all(np.isfinite(sl))):
            raise ValueError("profile data must be finite")
        closure = float(np.sum(sl * h))
        if abs(closure) > 1e-7 * (1.0 + float(np.abs(sl).max(initial=0.0))):
            raise ValueError(f"profile does not close: f(1) = {closure:g} != 0")

    @property
    def cell_lengths(self) -> np.ndarray:
        return np.diff(np.asarray(self.times, dtype=float))

    @property
    def slope_array(self) -> np.ndarray:
        return np.asarray(self.slopes, dtype=float)

    def values(self) -> np.ndarray:
        """Profile values at the grid times (first and last are 0)."""
        v = np.concatenate([[0.0], np.cumsum(self.slope_array * self.cell_lengths)])
        v[-1] = 0.0
        return v

    def value_at(self, t: float) -> float:
        ts = np.asarray(self.times, dtype=float)
        t = float(min(max(t, 0.0), 1.0))
        k = int(np.searchsorted(ts, t, side="right") - 1)
        k = min(max(k, 0), ts.size - 2)
        vals = self.values()
        return float(vals[k] + self.slope_array[k] * (t - ts[k]))

    def scaled(self, a: float) -> "ProfileFunction":
        """The profile a*f on the same grid."""
        return ProfileFunction(self.times, tuple(a * s for s in self.slopes))

    def subdivided(self, m: int) -> "ProfileFunction":
        """Split every cell into m equal cells (same function, finer grid)."""
        if m < 1:
            raise ValueError("subdivision factor must be >= 1")
        ts = np.asarray(self.times, dtype=float)
        new_t = [0.0]
        new_s = []
        for k in range(ts.size - 1):
            for i in range(1, m + 1):
                new_t.append(ts[k] + (ts[k + 1] - ts[k]) * i / m)
                new_s.append(self.slopes[k])
        new_t[-1] = 1.0
        return ProfileFunction(tuple(new_t), tuple(new_s))


def profile_from_breaks(ts: Sequence[float], xs: Sequence[float],
                        cells_per_piece: int = 1) -> ProfileFunction:
    """Piecewise-linear profile through the breakpoints (ts, xs).

    Endpoint values must be 0.  Each linear piece may be subdivided into
    ``cells_per_piece`` equal cells; that refines the constraint grid of the
    convex program without changing the function.
    """
    ts = np.asarray(ts, dtype=float)
    xs = np.asarray(xs, dtype=float)
    if ts.shape != xs.shape or ts.ndim != 1 or ts.size < 2:
        raise ValueError("breakpoints need matching 1-d time/value arrays")
    if abs(xs[0]) > ABS_TOL or abs(xs[-1]) > ABS_TOL:
        raise ValueError("profile endpoints must be 0")
    grid = [float(ts[0])]
    slopes = []
    for k in range(ts.size - 1):
        dt = ts[k + 1] - ts[k]
        if dt <= 0:
            raise ValueError("breakpoint times must be strictly increasing")
        s = (xs[k + 1] - xs[k]) / dt
        for i in range(1, cells_per_piece + 1):
            grid.append(float(ts[k] + dt * i / cells_per_piece))
            slopes.append(float(s))
    return ProfileFunction(tuple(grid), tuple(slopes))


def profile_from_values(ts: Sequence[float], values: Sequence[float]) -> ProfileFunction:
    """Profile interpolating (ts, values) with one cell per interval."""
    return profile_from_breaks(ts, values, cells_per_piece=1)


def two_piece_profile(a: float, cells_per_piece: int = 1) -> ProfileFunction:
    """Tent profile: 0 -> 1 over [0, a], back to 0 over [a, 1]."""
    if not 0.0 < a < 1.0:
        raise ValueError("apex must lie strictly inside (0, 1)")
    return profile_from_breaks([0.0, a, 1.0], [0.0, 1.0, 0.0], cells_per_piece)


# ---------------------------------------------------------------------------
# solver


@dataclass(frozen=True)
class JSolution:
    """Certified output of the rate program.

    ``objective`` always belongs to the feasible ``rho`` (repair happens
    before reporting), ``residual`` is the duality gap bounding the distance
    to the true minimum, and ``max_violation`` is recomputed from scratch on
    the returned densities.
    """

    times: tuple
    rho: tuple
    objective: float
    dual_objective: float
    residual: float
    max_violation: float
    iterations: int
    converged: bool

    def rho_array(self) -> np.ndarray:
        return np.asarray(self.rho, dtype=float)


def _interval_data(h: np.ndarray, fp: np.ndarray):
    T = np.concatenate([[0.0], np.cumsum(h)])
    F2 = np.concatenate([[0.0], np.cumsum(fp ** 2 * h)])
    F1 = np.concatenate([[0.0], np.cumsum(fp * h)])
    dT = T[None, :] - T[:, None]
    valid = dT > 0
    safe = np.where(valid, dT, 1.0)
    V = (F2[None, :] - F2[:, None]) - (F1[None, :] - F1[:, None]) ** 2 / safe
    V = np.where(valid, np.maximum(V, 0.0), 0.0)
    return dT, valid, V


def _sigma_from_lam(lam: np.ndarray, n: int) -> np.ndarray:
    # sigma_k = sum over windows [i, j) containing cell k of lam[i, j]
    C = np.cumsum(lam, axis=0)
    R = np.cumsum(C[:, ::-1], axis=1)[:, ::-1]
    return R[np.arange(n), np.arange(1, n + 1)]


def _violation_field(rho, h, V, valid):
    cum = np.concatenate([[0.0], np.cumsum(rho * h)])
    A = cum[None, :] - cum[:, None]
    return np.where(valid, V - A, 0.0)


def jrate_solve(f: ProfileFunction, tol: float = 1e-6,
                max_cell_updates: float = 1e6,
                lam0: np.ndarray | None = None) -> JSolution:
    """Solve the rate program for ``f`` by projected dual ascent.

    Stops when the duality gap drops below ``tol * (1 + objective)``.  The
    iteration budget is expressed in cell updates, so finer grids get fewer
    sweeps; on exhaustion the best feasible iterate is returned with
    ``converged=False`` rather than raising.  ``lam0`` warm-starts the dual
    multipliers (restart consistency is a correctness check: the program is
    convex, so the optimal value cannot depend on the starting point).

    The ride density rho = f'^2 is feasible for every window constraint, so
    it seeds the incumbent; the reported objective never exceeds the cubic
    upper bound of :func:`jrate_bounds`.
    """
    h = f.cell_lengths
    fp = f.slope_array
    n = h.size
    dT, valid, V = _interval_data(h, fp)
    scale = float(V.max()) if V.size else 0.0
    max_iters = max(int(math.ceil(max_cell_updates / max(n, 1))), 64)

    if lam0 is not None:
        lam = np.where(valid, np.maximum(np.asarray(lam0, dtype=float), 0.0), 0.0)
        if lam.shape != V.shape:
            raise ValueError("warm-start multipliers must be one per window")
    else:
        lam = np.zeros_like(V)
    sig = _sigma_from_lam(lam, n)
    rho = (sig / 2.0) ** 2
    G = _violation_field(rho, h, V, valid)
    step = 1.0 / max(scale, 1e-12)
    lam_prev = None
    G_prev = None
    best_rho = fp ** 2
    best_obj = float(4.0 / 3.0 * np.sum(np.abs(fp) ** 3 * h))
    dual_best = -math.inf
    it = 0
    safe_dT = np.where(valid, dT, 1.0)
    for it in range(max_iters):
        # repair: lifting every density by the worst per-time violation is
        # always feasible, giving a certified primal value for this iterate
        delta = max(0.0, float((G / safe_dT).max()))
        rho_feas = rho + delta
        obj = float(4.0 / 3.0 * np.sum(rho_feas ** 1.5 * h))
        if obj < best_obj:
            best_obj = obj
            best_rho = rho_feas.copy()
        dual = float(np.sum(lam * V) - np.sum(sig ** 3 * h) / 12.0)
        dual_best = max(dual_best, dual)
        if best_obj - dual_best <= tol * (1.0 + abs(best_obj)):
            break
        if lam_prev is not None:
            s = lam - lam_prev
            y = G_prev - G
            sy = float(np.sum(s * y))
            ss = float(np.sum(s * s))
            if sy > 1e-18 and ss > 0.0:
                step = ss / sy
            step = min(max(step, 1e-12), 1e12)
        lam_prev = lam
        G_prev = G
        lam = np.where(valid, np.maximum(lam + step * G, 0.0), 0.0)
        sig = _sigma_from_lam(lam, n)
        rho = (sig / 2.0) ** 2
        G = _violation_field(rho, h, V, valid)

    gap = best_obj - dual_best
    converged = gap <= tol * (1.0 + abs(best_obj))
    viol = float(_violation_field(best_rho, h, V, valid).max())
    return JSolution(
        times=tuple(float(t) for t in f.times),
        rho=tuple(float(r) for r in best_rho),
        objective=best_obj,
        dual_objective=dual_best,
        residual=gap,
        max_violation=max(viol, 0.0),
        iterations=it + 1,
        converged=converged,
    )


# ---------------------------------------------------------------------------
# closed forms and sandwich bounds


def jrate_two_piece(a: float) -> float:
    """Exact rate of the tent with apex at ``a`` (height 1).

    The rate is symmetric under a -> 1-a, so the steep side may be taken
    second without loss.
    """
    if not 0.0 < a < 1.0:
        raise ValueError("apex must lie strictly inside (0, 1)")
    a = min(a, 1.0 - a)
    return (3.0 - 4.0 * a ** 2) / (6.0 * (1.0 - a) ** 3 * a ** 2)


def jrate_bounds(f: ProfileFunction) -> tuple:
    """(lower, upper) sandwich for J(f).

    Lower: single full-window constraint, (4/3) (int f'^2)^{3/2} for closing
    profiles.  Upper: ride at local density |f'|^2, (4/3) int |f'|^3.
    """
    h = f.cell_lengths
    fp = f.slope_array
    lower = 4.0 / 3.0 * float(np.sum(fp ** 2 * h)) ** 1.5
    upper = 4.0 / 3.0 * float(np.sum(np.abs(fp) ** 3 * h))
    return lower, upper


@dataclass(frozen=True)
class ScalingCheck:
    amplitude: float
    j_base: float
    j_scaled: float
    expected_ratio: float
    ratio_error: float
    ok: bool


def jrate_scaling_check(f: ProfileFunction, a: float, tol: float = 1e-6,
                        rel: float = 5e-3) -> ScalingCheck:
    """Verify the cubic amplitude law J(a f) = |a|^3 J(f) on the solver."""
    base = jrate_solve(f, tol=tol)
    scaled = jrate_solve(f.scaled(a), tol=tol)
    expected = abs(a) ** 3
    if base.objective <= 0.0:
        err = abs(scaled.objective - expected * base.objective)
    else:
        err = abs(scaled.objective / base.objective - expected) / max(expected, 1e-300)
    return ScalingCheck(
        amplitude=float(a),
        j_base=base.objective,
        j_scaled=scaled.objective,
        expected_ratio=expected,
        ratio_error=float(err),
        ok=bool(err <= rel),
    )


# ---------------------------------------------------------------------------
# window map and superadditivity


def window_map(f: ProfileFunction, s: float, t: float) -> ProfileFunction:
    """Renormalized restriction of ``f`` to the window [s, t].

    The window is mapped to [0, 1], the chord of f over the window is
    subtracted (so the result closes), and the amplitude is rescaled by
    T^{-2/3} with T = t - s; on slopes that is a factor T^{1/3}.  Window
    endpoints must be grid times of ``f``.
    """
    ts = np.asarray(f.times, dtype=float)
    i = int(np.argmin(np.abs(ts - s)))
    j = int(np.argmin(np.abs(ts - t)))
    if abs(ts[i] - s) > ABS_TOL or abs(ts[j] - t) > ABS_TOL:
        raise ValueError("window endpoints must be grid times of the profile")
    if j <= i:
        raise ValueError("window must have positive duration")
    T = ts[j] - ts[i]
    sub_t = (ts[i:j + 1] - ts[i]) / T
    sub_t[0], sub_t[-1] = 0.0, 1.0
    vals = f.values()
    chord = (vals[j] - vals[i]) / T
    sub_s = (f.slope_array[i:j] - chord) * T ** (1.0 / 3.0)
    return ProfileFunction(tuple(sub_t), tuple(sub_s))


@dataclass(frozen=True)
class SuperadditivityCheck:
    windows: tuple
    window_rates: tuple
    total: float
    j_full: float
    slack: float
    ok: bool


def jrate_superadditivity_check(f: ProfileFunction, windows: Sequence[tuple],
                                tol: float = 1e-6) -> SuperadditivityCheck:
    """Check sum of window rates <= J(f) for disjoint windows.

    Each window (s, t) is renormalized with :func:`window_map` before being
    solved, which is exactly the normalization under which the rates of
    disjoint windows add up below the full rate.
    """
    wins = sorted((float(s), float(t)) for s, t in windows)
    for (s0, t0), (s1, t1) in zip(wins, wins[1:]):
        if s1 < t0 - ABS_TOL:
            raise ValueError("windows must have disjoint interiors")
    rates = tuple(jrate_solve(window_map(f, s, t), tol=tol).objective
                  for s, t in wins)
    full = jrate_solve(f, tol=tol).objective
    total = float(sum(rates))
    slack = full - total
    ok = bool(total <= full + 2.0 * tol * (1.0 + abs(full)))
    return SuperadditivityCheck(
        windows=tuple(wins),
        window_rates=rates,
        total=total,
        j_full=full,
        slack=float(slack),
        ok=ok,
    )


# ---------------------------------------------------------------------------
# divergent block family


def divergent_block_profile(n_blocks: int, cells_per_piece: int = 4) -> ProfileFunction:
    """Truncated block profile with summable cubic but heavy quadratic slope mass.

    Block j occupies [1/(j+1), 1/j] as a tent with apex at the midpoint and
    slope magnitude j^{1/3}; the remainder [0, 1/(n+1)] is flat zero.  The
    rate of the truncation is exactly (4/3) sum_{j<=n} 1/(j+1) because each
    block attains its upper bound, while the quadratic slope mass grows like
    the truncation's harmonic tail.
    """
    if n_blocks < 1:
        raise ValueError("need at least one block")
    bt = [1.0]
    bx = [0.0]
    for j in range(1, n_blocks + 1):
        a, b = 1.0 / (j + 1), 1.0 / j
        amp = j ** (1.0 / 3.0) * (b - a) / 2.0
        bt.extend([(a + b) / 2.0, a])
        bx.extend([amp, 0.0])
    bt.append(0.0)
    bx.append(0.0)
    bt.reverse()
    bx.reverse()
    return profile_from_breaks(bt, bx, cells_per_piece=cells_per_piece)


def divergent_block_rate(j: int) -> float:
    """Exact rate contribution of block j: (4/3) / (j + 1)."""
    if j < 1:
        raise ValueError("blocks are numbered from 1")
    return 4.0 / 3.0 / (j + 1)


def divergent_block_l2_tail(j_from: int = 51, j_to: int = 10 ** 6) -> float:
    """Partial sum of the quadratic slope mass over blocks j_from..j_to.

    Per block the mass is f'^2 * length = j^{2/3} / (j (j+1)).  The partial
    sum is a certified lower bound on the tail (all terms are positive); the
    series converges like j^{-1/3} so the tail past 50 is order 0.8, not
    small.
    """
    if j_from < 1 or j_to < j_from:
        raise ValueError("bad block range")
    total = 0.0
    lo = j_from
    while lo <= j_to:
        hi = min(lo + 10 ** 6 - 1, j_to)
        j = np.arange(lo, hi + 1, dtype=float)
        total += float(np.sum(j ** (2.0 / 3.0) / (j * (j + 1.0))))
        lo = hi + 1
    return total


# ---------------------------------------------------------------------------
# small-time expansion coefficient


def iota_eval(t: float) -> float:
    """Sharp constant of the two-sided pinch at separation ``t``.

    Defined for 0 < t <= 1/2.  The auxiliary square root can have a negative
    radicand through floating-point underflow near the domain edge; that is
    reported as a ValueError rather than silently clamped.
    """
    if not 0.0 < t <= 0.5:
        raise ValueError("separation must lie in (0, 1/2]")
    s2t = math.sqrt(2.0 * t)
    radicand = 72.0 * t ** 2 + 6.0 * (2.0 * t) ** 1.5 - 143.0 * t - 12.0 * s2t + 72.0
    if radicand < 0.0:
        raise ValueError(f"negative radicand {radicand:g} at t={t:g}")
    b = math.sqrt(radicand) / ((9.0 - 8.0 * t) * math.sqrt(t))
    num = (-(2.0 * t) ** 2.5 * (9.0 * b + 4.0)
           + 6.0 * t ** 2 * (25.0 * b + 13.0)
           - 2.0 * (2.0 * t) ** 1.5 * (26.0 * b + 19.0)
           - 48.0 * s2t + 24.0)
    den = 3.0 * (3.0 - math.sqrt(8.0 * t)) ** 3 * (1.0 - t) ** 2 * t ** 2
    return num / den
