"""Static SVG plots of a run: surface profile with marked inflection points,
v along selected streamlines, per-level triptychs, and the displacement-decay
profile.

Figures are built with the object API (no pyplot global state), so plot
emission is safe from concurrent sweep cells.
"""

from __future__ import annotations

import numpy as np

from .analysis import DisplacementProfile, displacement_profile, find_inflection_points
from .errors import DegenerateStreamlineError
from .fields import VelocityField, all_streamlines


def _new_figure(figsize):
    from matplotlib.figure import Figure

    fig = Figure(figsize=figsize)
    return fig


def _save(fig, path: str):
    fig.savefig(path, format="svg", metadata={"Date": None})


def plot_surface_profile(vf: VelocityField, path: str):
    """Free surface with its detected inflection points marked."""
    fig = _new_figure((6.0, 3.2))
    ax = fig.add_subplot()
    surface = all_streamlines(vf)[-1]
    ax.plot(surface.x, surface.y, lw=1.4, label="free surface")
    try:
        infl = find_inflection_points(surface, depth_scale=vf.depth)
        for x0 in infl.positions:
            y0 = float(np.interp(x0, surface.x, surface.y))
            ax.plot([x0], [y0], marker="o", ms=5, mfc="none", mec="firebrick")
            ax.axvline(x0, color="firebrick", lw=0.5, ls=":")
    except DegenerateStreamlineError:
        pass
    ax.set_xlabel("x")
    ax.set_ylabel("surface elevation")
    ax.set_xlim(0.0, np.pi)
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def plot_v_along_streamlines(vf: VelocityField, path: str, levels: int = 4):
    """Vertical velocity along a spread of streamlines from bed to surface."""
    fig = _new_figure((6.0, 3.2))
    ax = fig.add_subplot()
    rows = np.unique(np.linspace(1, vf.grid.n_p - 1, levels).astype(int))
    lines = all_streamlines(vf)
    for r in rows:
        s = lines[r]
        ax.plot(s.x, s.v, lw=1.1, label=f"p = {s.p_level:.3f}")
    ax.axhline(0.0, color="k", lw=0.5)
    ax.set_xlabel("x")
    ax.set_ylabel("vertical velocity v")
    ax.set_xlim(0.0, np.pi)
    ax.legend(loc="upper right", fontsize=7)
    fig.tight_layout()
    _save(fig, path)


def plot_displacement_decay(profile: DisplacementProfile, path: str):
    """Crest-to-trough streamline displacement against mean depth."""
    fig = _new_figure((4.2, 3.4))
    ax = fig.add_subplot()
    ax.plot(profile.displacement, profile.mean_depth, lw=1.3)
    ax.set_xlabel("vertical displacement H")
    ax.set_ylabel("mean streamline height")
    fig.tight_layout()
    _save(fig, path)


def plot_streamline_triptychs(vf: VelocityField, path: str, levels: int = 3):
    """Per-level triptych: the streamline, v along it, and its curvature."""
    rows = np.unique(np.linspace(vf.grid.n_p // 3, vf.grid.n_p - 1, levels).astype(int))
    fig = _new_figure((8.4, 2.2 * len(rows)))
    axes = fig.subplots(len(rows), 3, squeeze=False)
    lines = all_streamlines(vf)
    for k, r in enumerate(rows):
        s = lines[r]
        axes[k][0].plot(s.x, s.y, lw=1.0)
        axes[k][0].set_ylabel(f"p = {s.p_level:.3f}", fontsize=7)
        axes[k][1].plot(s.x, s.v, lw=1.0, color="seagreen")
        axes[k][1].axhline(0.0, color="k", lw=0.4)
        axes[k][2].plot(s.x, s.y_xx, lw=1.0, color="firebrick")
        axes[k][2].axhline(0.0, color="k", lw=0.4)
        for ax in axes[k]:
            ax.set_xlim(0.0, np.pi)
            ax.tick_params(labelsize=6)
    axes[0][0].set_title("streamline", fontsize=8)
    axes[0][1].set_title("v", fontsize=8)
    axes[0][2].set_title("curvature", fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def emit_plots(vf: VelocityField, out_dir: str, report=None):
    """Write the full plot set; the displacement profile is taken from an
    analysis report when one is supplied, otherwise recomputed."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    plot_surface_profile(vf, os.path.join(out_dir, "surface_profile.svg"))
    plot_v_along_streamlines(vf, os.path.join(out_dir, "v_streamlines.svg"))
    profile = report.displacement if report is not None else None
    if profile is None:
        profile, _ = displacement_profile(vf.source)
    plot_displacement_decay(profile, os.path.join(out_dir, "displacement_decay.svg"))
    plot_streamline_triptychs(vf, os.path.join(out_dir, "streamline_triptychs.svg"))
