"""Safety constraint assembly: obstacle rows, inter-agent rows, sensing filter."""

import math

import numpy as np
import pytest

from safeform.cbf import error_bound, external_constraint, internal_constraint, sensed_obstacles
from safeform.errors import CollisionError
from safeform.geometry import Circle, ConvexPolygon
from safeform.world import ControllerParams

PARAMS = ControllerParams()  # k1=5, k0=1, delta_ex=0.5, delta_in=0.1, u_max=5, eta=100


def test_error_bound_pinned():
    assert error_bound(5.0, 100.0) == 0.1


def test_error_bound_scaling():
    assert error_bound(5.0, 50.0) == 2.0 * error_bound(5.0, 100.0)
    assert error_bound(0.0, 100.0) == 0.0


# ---------------------------------------------------------------------------
# external (obstacle) constraint


def test_external_constraint_pinned_value():
    c = external_constraint((0.0, 0.0), (1.0, 0.0), (2.0, 0.0), PARAMS)
    # 2|v|^2 + 2 k1 (dp.v) + k0 h = 2 - 20 + 3.75
    assert abs(c.offset + 14.25) < 1e-12
    assert c.normal == (-4.0, 0.0)
    assert c.kind == "external"


def test_external_constraint_at_rest_on_margin():
    # at distance delta_ex with zero velocity: h = 0, offset = 0, and the
    # constraint reduces to "accelerate away from the obstacle"
    c = external_constraint((0.5, 0.0), (0.0, 0.0), (0.0, 0.0), PARAMS)
    assert c.offset == 0.0
    assert c.normal == (1.0, 0.0)


def test_external_constraint_slack_far_away():
    # far from the obstacle at rest the row is satisfied by u = 0
    c = external_constraint((10.0, 0.0), (0.0, 0.0), (0.0, 0.0), PARAMS)
    assert c.offset > 0.0


# ---------------------------------------------------------------------------
# internal (inter-agent) constraint


def test_internal_constraint_pinned_value():
    c = internal_constraint((1.0, 0.0), (0.0, 0.0), (0.0, 0.0), PARAMS)
    # estimated speed clamps to zero, cushion 4 k1 d u_max / eta = 1,
    # k0 h = 0.99; the pair shares the row, each side takes half
    assert abs(c.offset + 0.005) < 1e-15
    assert c.normal == (2.0, 0.0)
    assert c.kind == "internal"


def test_internal_constraint_mirror_pair():
    rng = np.random.default_rng(31)
    for _ in range(100):
        p_i = tuple(rng.uniform(-2, 2, size=2))
        p_j = tuple(rng.uniform(-2, 2, size=2))
        if math.hypot(p_i[0] - p_j[0], p_i[1] - p_j[1]) < 0.2:
            continue
        v = tuple(rng.uniform(-1, 1, size=2))
        ci = internal_constraint(p_i, p_j, v, PARAMS)
        cj = internal_constraint(p_j, p_i, (-v[0], -v[1]), PARAMS)
        assert ci.offset == cj.offset
        assert ci.normal == (-cj.normal[0], -cj.normal[1])


def test_internal_constraint_is_conservative():
    # Whenever the estimate error is within the bound, the implemented offset
    # is at most the one computed from the true relative velocity without the
    # cushion: satisfying the implemented row implies the true condition.
    rng = np.random.default_rng(37)
    e = error_bound(PARAMS.u_max, PARAMS.eta)
    for _ in range(10_000):
        p_i = tuple(rng.uniform(-3, 3, size=2))
        p_j = tuple(rng.uniform(-3, 3, size=2))
        dx = p_i[0] - p_j[0]
        dy = p_i[1] - p_j[1]
        dist = math.hypot(dx, dy)
        if dist < PARAMS.delta_in or dist > 5.0:
            continue
        dv = rng.uniform(-2, 2, size=2)
        ang = rng.uniform(0, 2 * math.pi)
        mag = rng.uniform(0, e)
        v_hat = (dv[0] + mag * math.cos(ang), dv[1] + mag * math.sin(ang))
        c = internal_constraint(p_i, p_j, v_hat, PARAMS)
        h = dist * dist - PARAMS.delta_in**2
        true_half = 0.5 * (
            2.0 * float(dv @ dv)
            + 2.0 * PARAMS.k1 * (dx * dv[0] + dy * dv[1])
            + PARAMS.k0 * h
        )
        assert c.offset <= true_half + 1e-9


def test_internal_constraint_speed_term_clamps():
    # |v_hat| below the error bound contributes nothing
    slow = internal_constraint((1.0, 0.0), (0.0, 0.0), (0.05, 0.0), PARAMS)
    rest = internal_constraint((1.0, 0.0), (0.0, 0.0), (0.0, 0.0), PARAMS)
    # only the hdot term differs between the two
    assert abs((slow.offset - rest.offset) - 0.5 * 2.0 * PARAMS.k1 * 0.05) < 1e-12


# ---------------------------------------------------------------------------
# obstacle sensing


def test_sensed_obstacles_within_range():
    out = sensed_obstacles((0.0, 0.0), [Circle((3.0, 0.0), 1.0)], 2.5)
    assert len(out) == 1
    idx, s = out[0]
    assert idx == 0
    assert abs(s[0] - 2.0) < 1e-12 and abs(s[1]) < 1e-12


def test_sensed_obstacles_strictly_inside_range():
    # boundary point exactly at sensing distance does not count
    out = sensed_obstacles((0.0, 0.0), [Circle((3.0, 0.0), 1.0)], 2.0)
    assert out == []


def test_sensed_obstacles_multiple_kinds():
    obstacles = [
        Circle((3.0, 0.0), 1.0),
        ConvexPolygon(((-2.0, -0.5), (-1.0, -0.5), (-1.0, 0.5), (-2.0, 0.5))),
        Circle((0.0, 40.0), 1.0),
    ]
    out = sensed_obstacles((0.0, 0.0), obstacles, 2.5)
    assert [idx for idx, _ in out] == [0, 1]
    assert out[1][1] == (-1.0, 0.0)


def test_agent_inside_obstacle_is_a_collision():
    with pytest.raises(CollisionError):
        sensed_obstacles((3.0, 0.0), [Circle((3.0, 0.0), 1.0)], 2.5)
