"""Exponential control-barrier-function constraints, one half-plane per hazard.

Each constraint is affine in the control: offset + normal . u >= 0.  Keeping
it satisfied enforces hddot + k1 hdot + k0 h >= 0 for the squared-clearance
barrier h, which with two negative real poles (k1^2 >= 4 k0) renders the safe
set forward invariant.

The obstacle constraint uses the agent's own velocity.  The inter-agent
constraint only has the *estimated* relative velocity, so its offset is
tightened by the worst-case estimator error (see :func:`error_bound`) before
being halved — each endpoint of a pair carries half the shared condition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import CollisionError
from .geometry import Region, Vec2, closest_boundary_point, contains
from .world import ControllerParams

__all__ = [
    "CbfConstraint",
    "error_bound",
    "external_constraint",
    "internal_constraint",
    "sensed_obstacles",
]


@dataclass(frozen=True)
class CbfConstraint:
    """Affine control constraint offset + normal . u >= 0 for one agent."""

    offset: float
    normal: Vec2
    kind: str  # "external" | "internal"
    agent: int
    other: int  # obstacle index or neighbor id


def error_bound(u_max: float, eta: float) -> float:
    """Worst-case norm of the velocity-estimate error, 2 u_max / eta.

    The estimate error decays at rate eta while relative acceleration, at most
    2 u_max per axis pair, feeds it; the ratio bounds the steady error.
    """
    return 2.0 * u_max / eta


def external_constraint(
    p_i: Vec2,
    v_i: Vec2,
    s_ik: Vec2,
    params: ControllerParams,
    agent: int = -1,
    obstacle: int = -1,
) -> CbfConstraint:
    """Obstacle-avoidance constraint against boundary point ``s_ik``.

    Barrier h = ||p_i - s_ik||^2 - delta_ex^2; offset collects the terms of
    hddot + k1 hdot + k0 h that do not involve u, normal multiplies u.
    """
    dx = p_i[0] - s_ik[0]
    dy = p_i[1] - s_ik[1]
    vx, vy = v_i
    offset = (
        2.0 * (vx * vx + vy * vy)
        + 2.0 * params.k1 * (dx * vx + dy * vy)
        + params.k0 * (dx * dx + dy * dy - params.delta_ex * params.delta_ex)
    )
    return CbfConstraint(
        offset=offset, normal=(2.0 * dx, 2.0 * dy), kind="external",
        agent=agent, other=obstacle,
    )


def internal_constraint(
    p_i: Vec2,
    p_j: Vec2,
    v_hat_ij: Vec2,
    params: ControllerParams,
    agent: int = -1,
    neighbor: int = -1,
) -> CbfConstraint:
    """Inter-agent constraint for the pair (i, j), written for agent i.

    Barrier h = ||p_i - p_j||^2 - delta_in^2.  The squared-speed term uses the
    estimated relative velocity lowered by the estimator error bound and
    clamped at zero (a negative lower bound on a norm carries no information),
    and the hdot term is tightened by the same worst case.  The resulting
    condition is shared by the pair, so each endpoint takes half.
    """
    dx = p_i[0] - p_j[0]
    dy = p_i[1] - p_j[1]
    dist2 = dx * dx + dy * dy
    dist = math.sqrt(dist2)
    vx, vy = v_hat_ij
    e = error_bound(params.u_max, params.eta)
    rel = math.sqrt(vx * vx + vy * vy) - e
    if rel < 0.0:
        rel = 0.0
    a_tilde = (
        2.0 * rel * rel
        + 2.0 * params.k1 * (dx * vx + dy * vy)
        - 4.0 * params.k1 * dist * params.u_max / params.eta
        + params.k0 * (dist2 - params.delta_in * params.delta_in)
    )
    return CbfConstraint(
        offset=0.5 * a_tilde, normal=(2.0 * dx, 2.0 * dy), kind="internal",
        agent=agent, other=neighbor,
    )


def sensed_obstacles(
    p_i: Vec2, obstacles: list[Region], radius: float
) -> list[tuple[int, Vec2]]:
    """(index, closest boundary point) for obstacles strictly within sensing range.

    Raises :class:`CollisionError` if ``p_i`` lies inside an obstacle — the
    barrier is already violated and the run must abort.
    """
    out: list[tuple[int, Vec2]] = []
    for k, obs in enumerate(obstacles):
        if contains(obs, p_i):
            raise CollisionError(math.nan, f"agent position {p_i!r} is inside obstacle {k}")
        s = closest_boundary_point(obs, p_i)
        dx = p_i[0] - s[0]
        dy = p_i[1] - s[1]
        if math.sqrt(dx * dx + dy * dy) < radius:
            out.append((k, s))
    return out
