"""Backend plumbing for the per-step simulation kernels.

Two interchangeable implementations exist: ``safeform._core`` (compiled) and
``safeform._pycore`` (pure Python).  They are written operation-for-operation
identical — same formulas, same accumulation order, same libm calls — so a
scenario produces bit-identical trajectories on either backend.  Selection
happens here, honouring the ``SAFEFORM_BACKEND`` environment variable
(``auto`` | ``cython`` | ``python``).

This module also lowers a :class:`~safeform.world.Scenario` into the flat
arrays the kernels consume and owns the reusable integration scratch buffers.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from .geometry import Circle, ConvexPolygon, Region
from .world import Scenario

# out_scalars layout shared by both kernel implementations.
S_MIN_PAIR = 0   # min pairwise distance
S_MIN_HEXT = 1   # min external barrier value over sensed obstacles
S_MIN_HINT = 2   # min internal barrier value over all pairs
S_EF = 3         # formation error (ordered pairs)
S_POT = 4        # total pair potential (1/2 sum over directed live edges)
S_FLOW = 5       # sum of v_i . grad_i(potential) over directed live edges
S_ESTERR = 6     # max velocity-estimate error norm over directed live edges
N_SCALARS = 7

# compute_controls return flags.
F_NEEDS_RELAX = 1
F_OBSTACLE_HIT = 2
F_RANGE = 4

# out_status codes.
STATUS_OPTIMAL = 0
STATUS_RELAXED = 1

#: Hard cap on QP rows per agent: (n-1) internal + n_obs external + 4 box
#: faces must fit the kernels' fixed-size row buffers.
MAX_ROWS = 64

ENV_VAR = "SAFEFORM_BACKEND"


def get_backend(name: str | None = None):
    """Resolve a kernel module by name, or per ``SAFEFORM_BACKEND``/auto."""
    choice = name or os.environ.get(ENV_VAR) or "auto"
    if choice in ("cython", "auto"):
        try:
            from . import _core
            return _core
        except ImportError:
            if choice == "cython":
                raise
            warnings.warn(
                "compiled simulation core unavailable; using the pure-Python kernels",
                RuntimeWarning,
                stacklevel=2,
            )
    elif choice != "python":
        raise ValueError(f"unknown backend {choice!r}; expected auto, cython or python")
    from . import _pycore
    return _pycore


def backend_name(module) -> str:
    return "cython" if module.__name__.rsplit(".", 1)[-1] == "_core" else "python"


def _lower_region(region: Region) -> tuple[int, np.ndarray, np.ndarray]:
    """(kind, circle params, polygon vertices); kind 0 = circle, 1 = polygon."""
    if isinstance(region, Circle):
        circ = np.array([region.center[0], region.center[1], region.radius])
        return 0, circ, np.zeros((1, 2))
    verts = np.array(region.vertices, dtype=np.float64)
    return 1, np.zeros(3), verts


@dataclass
class KernelData:
    """Scenario constants lowered to flat arrays for the hot loop."""

    n: int
    leader: np.ndarray       # (n,) uint8
    ddisp: np.ndarray        # (n, n, 2) desired displacement targets[i]-targets[j]
    radius: float
    mu: float
    c1: float
    c2: float
    c3: float
    c4: float
    c5: float
    eta: float
    k0: float
    k1: float
    delta_in: float
    delta_ex: float
    u_max: float
    include_tracking: int
    tgt_kind: int
    tgt_circ: np.ndarray     # (3,)
    tgt_verts: np.ndarray    # (v, 2)
    n_obs: int
    obs_kind: np.ndarray     # (n_obs,) int64
    obs_circ: np.ndarray     # (max(n_obs,1), 3)
    obs_voff: np.ndarray     # (n_obs+1,) int64 offsets into obs_verts
    obs_verts: np.ndarray    # (total_verts or 1, 2)


def make_kernel_data(scenario: Scenario) -> KernelData:
    n = scenario.n_agents
    if (n - 1) + len(scenario.obstacles) + 4 > MAX_ROWS:
        raise ValueError(
            f"{n} agents with {len(scenario.obstacles)} obstacles exceeds the "
            f"kernel constraint-row budget ({MAX_ROWS})"
        )
    leader = np.array([1 if a.is_leader else 0 for a in scenario.agents], dtype=np.uint8)
    targets = np.array(scenario.formation.targets, dtype=np.float64)
    ddisp = targets[:, None, :] - targets[None, :, :]
    tgt_kind, tgt_circ, tgt_verts = _lower_region(scenario.target)
    kinds = []
    circs = []
    voff = [0]
    all_verts: list[np.ndarray] = []
    total = 0
    for obs in scenario.obstacles:
        kind, circ, verts = _lower_region(obs)
        kinds.append(kind)
        circs.append(circ)
        if kind == 1:
            all_verts.append(verts)
            total += len(verts)
        voff.append(total)
    p = scenario.params
    return KernelData(
        n=n,
        leader=leader,
        ddisp=np.ascontiguousarray(ddisp),
        radius=scenario.radius,
        mu=p.mu,
        c1=p.c1, c2=p.c2, c3=p.c3, c4=p.c4, c5=p.c5,
        eta=p.eta, k0=p.k0, k1=p.k1,
        delta_in=p.delta_in, delta_ex=p.delta_ex, u_max=p.u_max,
        include_tracking=0 if scenario.controller == "no_tracking" else 1,
        tgt_kind=tgt_kind,
        tgt_circ=tgt_circ,
        tgt_verts=np.ascontiguousarray(tgt_verts),
        n_obs=len(scenario.obstacles),
        obs_kind=np.array(kinds, dtype=np.int64) if kinds else np.zeros(0, dtype=np.int64),
        obs_circ=np.ascontiguousarray(np.stack(circs)) if circs else np.zeros((1, 3)),
        obs_voff=np.array(voff, dtype=np.int64),
        obs_verts=np.ascontiguousarray(np.concatenate(all_verts)) if all_verts else np.zeros((1, 2)),
    )


@dataclass
class Workspace:
    """Reusable integration buffers: stage state t*, derivatives k*, accumulators a*."""

    tp: np.ndarray
    tv: np.ndarray
    tg: np.ndarray
    tphi: np.ndarray
    kp: np.ndarray
    kv: np.ndarray
    kg: np.ndarray
    kphi: np.ndarray
    ap: np.ndarray
    av: np.ndarray
    ag: np.ndarray
    aphi: np.ndarray
    dpos: np.ndarray
    amask: np.ndarray  # (n, n, 1) float adjacency mask


def make_workspace(n: int) -> Workspace:
    v2 = lambda: np.zeros((n, 2))
    m2 = lambda: np.zeros((n, n, 2))
    return Workspace(
        tp=v2(), tv=v2(), tg=v2(), tphi=m2(),
        kp=v2(), kv=v2(), kg=v2(), kphi=m2(),
        ap=v2(), av=v2(), ag=v2(), aphi=m2(),
        dpos=m2(), amask=np.zeros((n, n, 1)),
    )


def set_adjacency(ws: Workspace, adj: np.ndarray) -> None:
    ws.amask[:, :, 0] = adj
