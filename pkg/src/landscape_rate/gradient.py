"""Metric gradient at a point, its energy, and the density identity.

For a planted metric the directional derivative D_q e(theta) of e(q; q +
(t*theta, t)) / t as t -> 0+ has an explicit shape: off the support it is
the Dirichlet parabola -theta^2; at an interior point of a segment with
local slope v and full density rho it is the concave majorant of the
parabola and a spike of height w' = rho - v^2 at theta = v.  The majorant's
tangency points sit at theta = v +- sqrt(rho), which makes the energy

    Q(D) = (1/4) * integral (D'^2 - 4 theta^2) d theta = (4/3) rho^{3/2}

exactly computable and equal to (4/3) density^{3/2} — the pointwise
tangent-space version of the rate.

Two numerical surrogates back the closed form: a local Bellman profile
(ride the segment for a sub-grid time, then one exact straight move) and a
single-ride density estimate through the grid evaluator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import ABS_TOL, SpaceTimePoint, pair
from .measures import PlantedMeasure, planted, restrict
from .metric import GridSpec, evaluate_emu

__all__ = [
    "GradientProfile",
    "locate_on_support",
    "gradient_profile",
    "q_energy",
    "density_from_gradient",
    "fd_gradient_profile",
    "fd_density",
]


@dataclass(frozen=True)
class GradientProfile:
    """Sampled directional derivative theta -> D_q e(theta).

    ``v``/``rho``/``w_prime`` carry the local segment data when the base
    point sits on the support (None off support); ``origin`` records whether
    the values came from the closed form or a finite-difference surrogate.
    """

    thetas: tuple
    values: tuple
    v: Optional[float]
    rho: Optional[float]
    w_prime: Optional[float]
    origin: str = "closed-form"

    def arrays(self):
        return (np.asarray(self.thetas, dtype=float),
                np.asarray(self.values, dtype=float))


def locate_on_support(mu: PlantedMeasure, q: SpaceTimePoint):
    """Segment containing ``q`` in its interior, or None off support.

    Raises when q sits at a segment-domain endpoint or at an interior
    breakpoint of the path: there the local slope is undefined and the
    point belongs to the excluded (measure-zero) set of the tangent
    description.
    """
    for seg in mu.segments:
        path = seg.path
        if not path.t0 - ABS_TOL <= q.t <= path.t1 + ABS_TOL:
            continue
        if abs(path.value_at(q.t) - q.x) > ABS_TOL:
            continue
        if abs(q.t - path.t0) <= ABS_TOL or abs(q.t - path.t1) <= ABS_TOL:
            raise ValueError("base point at a segment-domain endpoint")
        for bp in path.breakpoints[1:-1]:
            if abs(q.t - bp.t) <= ABS_TOL:
                raise ValueError("base point at an interior path breakpoint")
        for piece in seg.density:
            if abs(q.t - piece.t0) <= ABS_TOL or abs(q.t - piece.t1) <= ABS_TOL:
                if not (abs(q.t - path.t0) <= ABS_TOL
                        or abs(q.t - path.t1) <= ABS_TOL):
                    raise ValueError("base point at a density breakpoint")
        v = path.slope_at(q.t)
        rho = seg.density_at(q.t)
        return seg, float(v), float(rho)
    return None


def _default_thetas(v: float, rho: float, n: int = 241) -> np.ndarray:
    half = 1.5 * math.sqrt(max(rho, 0.0)) + 0.5
    return np.linspace(v - half, v + half, n)


def _majorant(thetas: np.ndarray, v: float, rho: float) -> np.ndarray:
    """Concave majorant of -theta^2 and the spike (v, rho - v^2)."""
    w = rho - v ** 2
    off = np.abs(thetas - v) >= math.sqrt(max(rho, 0.0)) - 1e-15
    spike = w - 2.0 * math.sqrt(max(rho, 0.0)) * np.abs(thetas - v) \
        - 2.0 * v * (thetas - v)
    return np.where(off, -thetas ** 2, np.maximum(spike, -thetas ** 2))


def gradient_profile(mu: PlantedMeasure, q: SpaceTimePoint,
                     thetas: Optional[Sequence[float]] = None) -> GradientProfile:
    """Closed-form gradient profile of the planted metric at ``q``.

    The sampling grid is augmented with the kink locations v and
    v +- sqrt(rho) so that the profile is exactly piecewise linear between
    samples; q_energy is then exact rather than quadrature-approximate.
    """
    hit = locate_on_support(mu, q)
    if hit is None:
        grid = np.linspace(-2.0, 2.0, 241) if thetas is None \
            else np.asarray(thetas, dtype=float)
        return GradientProfile(thetas=tuple(grid),
                               values=tuple(-grid ** 2),
                               v=None, rho=None, w_prime=None)
    _seg, v, rho = hit
    grid = _default_thetas(v, rho) if thetas is None \
        else np.asarray(thetas, dtype=float)
    kinks = [v]
    if rho > 0.0:
        kinks += [v - math.sqrt(rho), v + math.sqrt(rho)]
    extra = [k for k in kinks if grid.min() <= k <= grid.max()
             and np.abs(grid - k).min() > 1e-12]
    if extra:
        grid = np.sort(np.concatenate([grid, extra]))
    vals = _majorant(grid, v, rho)
    return GradientProfile(thetas=tuple(grid), values=tuple(vals),
                           v=v, rho=rho, w_prime=rho - v ** 2)


def q_energy(profile: GradientProfile) -> float:
    """Energy (1/4) * integral (D'^2 - 4 theta^2) over the departing window.

    The integrand is evaluated exactly per grid cell (piecewise-linear D,
    exact cubic term), restricted to cells where the profile departs from
    the parabola; the tails must match -theta^2 or the profile was cut too
    narrow to contain its window.
    """
    thetas, vals = profile.arrays()
    if thetas.size < 2:
        raise ValueError("profile needs at least two samples")
    depart = np.abs(vals + thetas ** 2) > 1e-12 * (1.0 + thetas ** 2)
    if depart[0] or depart[-1]:
        raise ValueError("profile tails do not match the parabola")
    cells = depart[:-1] | depart[1:]
    if not np.any(cells):
        return 0.0
    dth = np.diff(thetas)
    slopes = np.diff(vals) / dth
    cubic = np.diff(thetas ** 3)
    contrib = (slopes ** 2 * dth - 4.0 * cubic / 3.0) / 4.0
    return float(np.sum(contrib[cells]))


def density_from_gradient(mu: PlantedMeasure, q: SpaceTimePoint,
                          thetas: Optional[Sequence[float]] = None) -> float:
    """Recover the planted density at ``q`` as sup_theta D(theta) + theta^2."""
    prof = gradient_profile(mu, q, thetas)
    th, vals = prof.arrays()
    return float(np.max(vals + th ** 2))


# ---------------------------------------------------------------------------
# finite-difference surrogates


def fd_gradient_profile(mu: PlantedMeasure, q: SpaceTimePoint, t_h: float,
                        thetas: Optional[Sequence[float]] = None,
                        n_sub: int = 200) -> GradientProfile:
    """Finite-difference profile e(q; q+(t_h*theta, t_h)) / t_h.

    The value for each direction is the local Bellman optimum over the
    sub-grid of ``n_sub`` exit times: ride the segment through q for k
    sub-steps (exact measure gain), then take one exact straight move to
    the target.  The k=0 candidate is the pure Dirichlet chord, so the
    tails agree with -theta^2 exactly and q_energy applies unchanged.
    """
    if t_h <= 0.0:
        raise ValueError("step must be positive")
    hit = locate_on_support(mu, q)
    if hit is None:
        grid = np.linspace(-2.0, 2.0, 241) if thetas is None \
            else np.asarray(thetas, dtype=float)
        return GradientProfile(thetas=tuple(grid), values=tuple(-grid ** 2),
                               v=None, rho=None, w_prime=None,
                               origin="finite-difference")
    seg, v, rho = hit
    if thetas is None:
        grid = _default_thetas(v, rho, n=601)
    else:
        grid = np.asarray(thetas, dtype=float)
    if np.abs(grid - v).min() > 1e-12:
        grid = np.sort(np.append(grid, v))

    taus = np.linspace(0.0, t_h, n_sub + 1)
    t_stop = min(t_h, seg.path.t1 - q.t)
    usable = taus <= t_stop + 1e-15
    clamped = q.t + np.minimum(taus, t_stop)             # stay on the path
    ride_x = np.array([seg.path.value_at(t) for t in clamped])
    mids = np.minimum(q.t + (taus[:-1] + taus[1:]) / 2.0, q.t + t_stop)
    step_gain = np.array([
        (seg.density_at(tm) - seg.path.slope_at(tm) ** 2) for tm in mids
    ]) * np.diff(taus)
    gains = np.concatenate([[0.0], np.cumsum(step_gain)])

    targets = q.x + t_h * grid
    rem = t_h - taus                                     # remaining duration
    pos = rem > 1e-15
    disp = targets[:, None] - ride_x[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        chord = -disp ** 2 / np.where(pos, rem, 1.0)[None, :]
    vals = np.where(usable[None, :] & pos[None, :],
                    gains[None, :] + chord, -np.inf)
    if usable[-1]:  # full ride: admissible only onto the graph itself
        on_graph = np.abs(disp[:, -1]) <= 1e-12
        vals[:, -1] = np.where(on_graph, gains[-1], -np.inf)
    best = vals.max(axis=1) / t_h
    return GradientProfile(thetas=tuple(grid), values=tuple(best),
                           v=v, rho=rho, w_prime=rho - v ** 2,
                           origin="finite-difference")


def fd_density(mu: PlantedMeasure, q: SpaceTimePoint, t_h: float,
               nx: int = 16, nt: int = 8) -> float:
    """Density estimate through the grid evaluator at step ``t_h``.

    Evaluates e(q; q + (v*t_h, t_h)) on a small grid aligned with the ride
    direction v — the supremum direction of the gradient — and returns
    e / t_h + v^2, the finite-t surrogate of density_from_gradient.
    """
    hit = locate_on_support(mu, q)
    if hit is None:
        return 0.0
    seg, v, _rho = hit
    window = restrict(planted(seg), (q.t, q.t + t_h))
    target_x = q.x + v * t_h
    if abs(v) > ABS_TOL:
        dx = abs(v) * t_h / 8.0
        lo = min(q.x, target_x) - 4.0 * dx
        hi = max(q.x, target_x) + 4.0 * dx
        n_cells = int(round((hi - lo) / dx))
    else:
        lo, hi = q.x - 0.5, q.x + 0.5
        n_cells = nx
    spec = GridSpec(lo, hi, q.t, q.t + t_h, nx=n_cells, nt=nt)
    e = evaluate_emu(window, pair(q.x, q.t, target_x, q.t + t_h), spec)
    return e / t_h + v ** 2
