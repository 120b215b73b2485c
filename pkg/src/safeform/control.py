"""Nominal formation / region / tracking controller for double-integrator agents.

The control is a sum of four weighted terms plus a feedforward:

  u1  formation shaping: negative gradient of a pairwise potential that is
      zero at the desired displacement and blows up as a pair approaches the
      sensing radius (which is what keeps live edges alive);
  u2  velocity consensus against filtered relative-velocity estimates;
  u3  unit pull toward the target region, leaders only, active outside it;
  u4  saturated tracking of an auxiliary reference position, leaders only,
      active inside the region;
  feedforward: the reference acceleration, applied inside the region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import SensingRangeError
from .geometry import Region, Vec2, contains, project
from .world import AgentState, ControllerParams

__all__ = [
    "NominalBreakdown",
    "potential",
    "potential_gradient",
    "velocity_estimate",
    "gamma_derivative",
    "region_term",
    "tracking_term",
    "nominal_control",
]


@dataclass(frozen=True)
class NominalBreakdown:
    """Nominal control split into its unweighted terms.

    total = feedforward + c1*u1 + c2*u2 + c3*u3 + c4*u4 (each u already
    carries its sign, so the gains here are the positive c's).
    """

    u1: Vec2
    u2: Vec2
    u3: Vec2
    u4: Vec2
    feedforward: Vec2
    total: Vec2


def _pair_terms(
    p_i: Vec2, p_j: Vec2, d_ij: Vec2, radius: float, mu: float
) -> tuple[float, float, float, float, float, float]:
    """Shared intermediates (dx, dy, ex, ey, l1, l2) for the pair potential.

    l1 is the denominator radius^2 - ||p_i-p_j||^2 + mu, l2 the squared
    displacement error ||p_i - p_j - d_ij||^2.
    """
    dx = p_i[0] - p_j[0]
    dy = p_i[1] - p_j[1]
    d2 = dx * dx + dy * dy
    if d2 >= radius * radius:
        raise SensingRangeError(
            f"pair separation {math.sqrt(d2):.6f} reached sensing radius {radius}"
        )
    ex = dx - d_ij[0]
    ey = dy - d_ij[1]
    l1 = radius * radius - d2 + mu
    l2 = ex * ex + ey * ey
    return dx, dy, ex, ey, l1, l2


def potential(p_i: Vec2, p_j: Vec2, d_ij: Vec2, radius: float, mu: float) -> float:
    """Pair potential ||p_i - p_j - d_ij||^2 / (radius^2 - ||p_i - p_j||^2 + mu).

    Defined for pairs strictly inside sensing range; raises
    :class:`ConnectivityLostError` otherwise.
    """
    _, _, _, _, l1, l2 = _pair_terms(p_i, p_j, d_ij, radius, mu)
    return l2 / l1


def potential_gradient(p_i: Vec2, p_j: Vec2, d_ij: Vec2, radius: float, mu: float) -> Vec2:
    """Gradient of :func:`potential` with respect to ``p_i``.

    (2 l1 (dp - d_ij) + 2 l2 dp) / l1^2 with dp = p_i - p_j; the second term
    is what stiffens the potential as the pair nears the sensing radius.
    """
    dx, dy, ex, ey, l1, l2 = _pair_terms(p_i, p_j, d_ij, radius, mu)
    denom = l1 * l1
    gx = (2.0 * l1 * ex + 2.0 * l2 * dx) / denom
    gy = (2.0 * l1 * ey + 2.0 * l2 * dy) / denom
    return (gx, gy)


def velocity_estimate(phi_ij: Vec2, p_i: Vec2, p_j: Vec2, eta: float) -> Vec2:
    """Relative velocity estimate -eta (phi_ij - (p_i - p_j)).

    ``phi_ij`` relaxes toward the live relative position at rate ``eta``; its
    lag times -eta is a first-order estimate of d/dt (p_i - p_j).
    """
    return (
        -eta * (phi_ij[0] - (p_i[0] - p_j[0])),
        -eta * (phi_ij[1] - (p_i[1] - p_j[1])),
    )


def gamma_derivative(gamma_i: Vec2, p_i: Vec2, v_d: Vec2, c5: float) -> Vec2:
    """Tracking reference dynamics d(gamma)/dt = v_d + c5 (p_i - gamma_i)."""
    return (
        v_d[0] + c5 * (p_i[0] - gamma_i[0]),
        v_d[1] + c5 * (p_i[1] - gamma_i[1]),
    )


def region_term(p_i: Vec2, target: Region, is_leader: bool) -> Vec2:
    """Unit vector from the nearest target-region point toward the agent, negated.

    Zero for followers and for agents inside the region (boundary counts as
    inside, so the unit vector is never formed from a zero offset).
    """
    if not is_leader or contains(target, p_i):
        return (0.0, 0.0)
    qx, qy = project(target, p_i)
    dx = p_i[0] - qx
    dy = p_i[1] - qy
    d = math.sqrt(dx * dx + dy * dy)
    return (-dx / d, -dy / d)


def tracking_term(
    p_i: Vec2, gamma_i: Vec2, c5: float, in_region: bool, is_leader: bool
) -> Vec2:
    """Component-wise -tanh(c5 (p_i - gamma_i)); leaders inside the region only."""
    if not (is_leader and in_region):
        return (0.0, 0.0)
    return (
        -math.tanh(c5 * (p_i[0] - gamma_i[0])),
        -math.tanh(c5 * (p_i[1] - gamma_i[1])),
    )


def nominal_control(
    agent: AgentState,
    neighbor_data: list[tuple[Vec2, Vec2, Vec2]],
    target: Region,
    params: ControllerParams,
    v_d: Vec2,
    v_d_dot: Vec2,
    radius: float,
    include_tracking: bool = True,
) -> NominalBreakdown:
    """Full nominal control for one agent.

    ``neighbor_data`` holds one ``(p_j, phi_ij, d_ij)`` triple per current
    neighbor.  With ``include_tracking`` false the feedforward and u4 are
    dropped (velocity-free variant of the controller); u1..u3 are unchanged.
    """
    p_i = agent.position
    in_region = contains(target, p_i)
    s1x = s1y = 0.0
    s2x = s2y = 0.0
    for p_j, phi_ij, d_ij in neighbor_data:
        gx, gy = potential_gradient(p_i, p_j, d_ij, radius, params.mu)
        s1x += gx
        s1y += gy
        vx, vy = velocity_estimate(phi_ij, p_i, p_j, params.eta)
        s2x += vx
        s2y += vy
    u1 = (-s1x, -s1y)
    u2 = (-s2x, -s2y)
    u3 = region_term(p_i, target, agent.is_leader)
    if include_tracking:
        u4 = tracking_term(p_i, agent.gamma, params.c5, in_region, agent.is_leader)
        ff = v_d_dot if in_region else (0.0, 0.0)
    else:
        u4 = (0.0, 0.0)
        ff = (0.0, 0.0)
    total = (
        ff[0] + params.c1 * u1[0] + params.c2 * u2[0] + params.c3 * u3[0] + params.c4 * u4[0],
        ff[1] + params.c1 * u1[1] + params.c2 * u2[1] + params.c3 * u3[1] + params.c4 * u4[1],
    )
    return NominalBreakdown(u1=u1, u2=u2, u3=u3, u4=u4, feedforward=ff, total=total)
