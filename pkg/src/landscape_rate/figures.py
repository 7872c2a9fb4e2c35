"""Matplotlib renderings of networks, rate profiles, and pair tables.

The CLI calls these when --figures DIR is passed; the library never needs
them.  Everything is drawn in the space-time plane with time upward, the
convention used throughout the package.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = [
    "save_network_figure",
    "save_profile_figure",
    "save_pairs_figure",
]

_CMAP = plt.get_cmap("viridis")


def save_network_figure(mu, path, constraints=None, title=None):
    """Planted network: segment graphs weighted and colored by density."""
    fig, ax = plt.subplots(figsize=(6.0, 6.0))
    rho_max = max((p.rho for seg in mu.segments for p in seg.density),
                  default=1.0) or 1.0
    for seg in mu.segments:
        xs = [b.x for b in seg.path.breakpoints]
        ts = [b.t for b in seg.path.breakpoints]
        ax.plot(xs, ts, lw=0.6, color="0.75", zorder=1)
        for piece in seg.density:
            sub = seg.path.clip(piece.t0, piece.t1)
            ax.plot([b.x for b in sub.breakpoints],
                    [b.t for b in sub.breakpoints],
                    lw=0.8 + 3.0 * math.sqrt(piece.rho / rho_max),
                    color=_CMAP(piece.rho / rho_max),
                    solid_capstyle="round", zorder=2)
    for con in constraints or ():
        u = con.u
        ax.plot([u.p.x, u.q.x], [u.p.t, u.q.t], ls="--", lw=0.9,
                color="crimson", zorder=3)
        ax.plot([u.p.x, u.q.x], [u.p.t, u.q.t], "o", ms=4,
                color="crimson", zorder=3)
        ax.annotate(f"α={con.alpha:g}", (u.q.x, u.q.t),
                    textcoords="offset points", xytext=(4, 2), fontsize=8)
    sm = plt.cm.ScalarMappable(cmap=_CMAP,
                               norm=plt.Normalize(0.0, rho_max))
    fig.colorbar(sm, ax=ax, label="density ρ")
    ax.set_xlabel("x")
    ax.set_ylabel("t")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_profile_figure(f, sol, path, title=None):
    """Geodesic profile f and the optimal excess density below it."""
    fig, (ax_f, ax_r) = plt.subplots(
        2, 1, figsize=(6.5, 5.5), sharex=True,
        gridspec_kw={"height_ratios": [2, 1]})
    ts = np.asarray(f.times)
    ax_f.plot(ts, f.values(), color="tab:blue", lw=1.5)
    ax_f.set_ylabel("f(t)")
    label = f"objective {sol.objective:.6g}"
    if not sol.converged:
        label += " (budget hit)"
    ax_r.stairs(sol.rho_array(), np.asarray(sol.times),
                fill=True, color="tab:orange", alpha=0.8, label=label)
    ax_r.set_xlabel("t")
    ax_r.set_ylabel("ρ(t)")
    ax_r.legend(loc="best", fontsize=8)
    if title:
        ax_f.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_pairs_figure(rows, path, title=None):
    """Evaluated pairs as chords colored by excess e - d."""
    fig, ax = plt.subplots(figsize=(6.0, 6.0))
    excesses = [r["e"] - r["d"] for r in rows]
    hi = max((abs(v) for v in excesses), default=1.0) or 1.0
    for r, exc in zip(rows, excesses):
        ax.plot([r["x0"], r["x1"]], [r["t0"], r["t1"]], "-o", ms=3,
                lw=1.2, color=_CMAP(0.5 + 0.5 * exc / hi))
    sm = plt.cm.ScalarMappable(cmap=_CMAP, norm=plt.Normalize(-hi, hi))
    fig.colorbar(sm, ax=ax, label="excess e − d")
    ax.set_xlabel("x")
    ax.set_ylabel("t")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
