"""Static SVG plots rendered from a run bundle's tables.

Five figures per bundle: a trajectory overlay (agent paths, target region,
obstacles, formation edges at final time), formation error vs t, minimum
distances vs t, per-axis velocities vs t and per-axis controls vs t.  The
tables are the source of truth; nothing is recomputed from the dynamics.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib import patches

from .geometry import Circle, ConvexPolygon
from .scenario_io import load_scenario
from .world import Scenario, reference_velocity

PLOT_NAMES = (
    "trajectory.svg",
    "formation_error.svg",
    "min_distance.svg",
    "velocity.svg",
    "control.svg",
)

_SAVE = {"format": "svg", "metadata": {"Date": None}}


def _style(scenario: Scenario) -> None:
    # Stable ids inside the SVG so reruns produce comparable files.
    plt.rcParams["svg.hashsalt"] = scenario.name


def _marker(n_steps: int) -> dict:
    # A one- or two-point series is invisible without markers.
    return {"marker": "."} if n_steps < 3 else {}


def _draw_region(ax: plt.Axes, region, **kw) -> None:
    if isinstance(region, Circle):
        ax.add_patch(patches.Circle(region.center, region.radius, **kw))
    elif isinstance(region, ConvexPolygon):
        ax.add_patch(patches.Polygon(np.asarray(region.vertices), closed=True, **kw))


def _plot_trajectory(out: Path, scenario: Scenario, t, pos) -> None:
    fig, ax = plt.subplots(figsize=(7.0, 6.0))
    _draw_region(ax, scenario.target, fill=False, edgecolor="seagreen",
                 linestyle="--", linewidth=1.4, label="target region")
    for k, obs in enumerate(scenario.obstacles):
        _draw_region(ax, obs, facecolor="0.82", edgecolor="0.25", linewidth=1.2,
                     label="obstacle" if k == 0 else None)
        if isinstance(obs, Circle):
            ax.add_patch(patches.Circle(obs.center,
                                        obs.radius + scenario.params.delta_ex,
                                        fill=False, edgecolor="0.25",
                                        linestyle=":", linewidth=0.8))
    n = scenario.n_agents
    mk = _marker(len(t))
    for i in range(n):
        color = f"C{i}"
        ax.plot(pos[:, i, 0], pos[:, i, 1], color=color, linewidth=0.9,
                label=f"agent {i}" + (" (leader)" if scenario.agents[i].is_leader else ""),
                **mk)
        ax.plot(pos[0, i, 0], pos[0, i, 1], color=color, marker="o",
                markerfacecolor="none", markersize=6)
        end = "*" if scenario.agents[i].is_leader else "s"
        ax.plot(pos[-1, i, 0], pos[-1, i, 1], color=color, marker=end, markersize=8)
    # Sensing-graph edges at final time (gain threshold, no hysteresis state).
    gain = scenario.radius - scenario.margin
    for i in range(n):
        for j in range(i + 1, n):
            d = np.hypot(*(pos[-1, i] - pos[-1, j]))
            if d < gain:
                ax.plot([pos[-1, i, 0], pos[-1, j, 0]],
                        [pos[-1, i, 1], pos[-1, j, 1]],
                        color="0.5", linewidth=0.7, zorder=1)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(f"{scenario.name}: trajectories")
    ax.set_aspect("equal", adjustable="datalim")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    fig.savefig(out, **_SAVE)
    plt.close(fig)


def _plot_formation_error(out: Path, scenario: Scenario, t, e_f) -> None:
    fig, ax = plt.subplots(figsize=(7.0, 3.5))
    ax.plot(t, e_f, color="C0", linewidth=1.2, **_marker(len(t)))
    ax.set_xlabel("t [s]")
    ax.set_ylabel("formation error")
    ax.set_title(f"{scenario.name}: formation error")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out, **_SAVE)
    plt.close(fig)


def _plot_min_distance(out: Path, scenario: Scenario, t, min_pair, min_hext) -> None:
    fig, ax = plt.subplots(figsize=(7.0, 3.5))
    mk = _marker(len(t))
    ax.plot(t, min_pair, color="C0", linewidth=1.2,
            label="min inter-agent distance", **mk)
    ax.axhline(scenario.params.delta_in, color="C3", linestyle="--", linewidth=1.0,
               label="internal safety radius")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("distance [m]")
    ax.grid(True, alpha=0.3)
    finite = np.isfinite(min_hext)
    if finite.any():
        ax2 = ax.twinx()
        ax2.plot(t[finite], min_hext[finite], color="C1", linewidth=1.0,
                 label="min external barrier h", **mk)
        ax2.axhline(0.0, color="C1", linestyle=":", linewidth=0.8)
        ax2.set_ylabel("barrier value")
        lines = ax.get_lines()[:1] + ax2.get_lines()[:1]
        ax.legend(lines, [ln.get_label() for ln in lines], fontsize=8)
    else:
        ax.legend(fontsize=8)
    ax.set_title(f"{scenario.name}: safety margins")
    fig.tight_layout()
    fig.savefig(out, **_SAVE)
    plt.close(fig)


def _plot_per_axis(out: Path, scenario: Scenario, t, series, ylabel: str,
                   title: str, reference: bool, bound: float | None) -> None:
    fig, axes = plt.subplots(2, 1, figsize=(7.0, 5.0), sharex=True)
    n = series.shape[1]
    mk = _marker(len(t))
    for axis, ax in enumerate(axes):
        for i in range(n):
            ax.plot(t, series[:, i, axis], color=f"C{i}", linewidth=0.8,
                    label=f"agent {i}", **mk)
        if reference:
            vd = np.array([reference_velocity(scenario.reference, tk)[0][axis]
                           for tk in t])
            ax.plot(t, vd, color="k", linestyle="--", linewidth=1.0,
                    label="reference")
        if bound is not None:
            ax.axhline(bound, color="0.4", linestyle=":", linewidth=0.8)
            ax.axhline(-bound, color="0.4", linestyle=":", linewidth=0.8)
        ax.set_ylabel(f"{ylabel}{'xy'[axis]}")
        ax.grid(True, alpha=0.3)
    axes[0].legend(loc="best", fontsize=7, ncol=2)
    axes[0].set_title(title)
    axes[1].set_xlabel("t [s]")
    fig.tight_layout()
    fig.savefig(out, **_SAVE)
    plt.close(fig)


def render_bundle(bundle: Path) -> list[Path]:
    """Render the five standard figures next to the bundle's tables."""
    bundle = Path(bundle)
    scenario = load_scenario(bundle / "scenario.yaml")
    _style(scenario)
    n = scenario.n_agents

    traj = np.loadtxt(bundle / "trajectory.csv", delimiter=",", skiprows=1,
                      usecols=(0, 2, 3, 4, 5, 6, 7), ndmin=2)
    steps = traj.shape[0] // n
    t = traj[::n, 0]
    pos = traj[:, 1:3].reshape(steps, n, 2)
    vel = traj[:, 3:5].reshape(steps, n, 2)
    ctl = traj[:, 5:7].reshape(steps, n, 2)

    met = np.loadtxt(bundle / "metrics.csv", delimiter=",", skiprows=1, ndmin=2)
    e_f = met[:, 1]
    min_pair = met[:, 2]
    min_hext = met[:, 3]

    out = [bundle / name for name in PLOT_NAMES]
    _plot_trajectory(out[0], scenario, t, pos)
    _plot_formation_error(out[1], scenario, t, e_f)
    _plot_min_distance(out[2], scenario, t, min_pair, min_hext)
    _plot_per_axis(out[3], scenario, t, vel, "v", f"{scenario.name}: velocities",
                   reference=True, bound=None)
    _plot_per_axis(out[4], scenario, t, ctl, "u", f"{scenario.name}: controls",
                   reference=False, bound=scenario.params.u_max)
    return out
