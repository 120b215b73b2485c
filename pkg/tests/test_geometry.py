"""Convex region primitives: membership, projection, boundary queries, shrinking."""

import math

import numpy as np
import pytest

from safeform.geometry import (
    Circle,
    ConvexPolygon,
    DegenerateInputError,
    EmptyRegionError,
    closest_boundary_point,
    contains,
    project,
    shrink,
)

UNIT_CIRCLE = Circle((0.0, 0.0), 1.0)
UNIT_SQUARE = ConvexPolygon(((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)))


def _boundary_samples(region, n=720):
    """Dense boundary sampling, used as a brute-force projection oracle."""
    if isinstance(region, Circle):
        cx, cy = region.center
        ts = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
        return [(cx + region.radius * math.cos(t), cy + region.radius * math.sin(t)) for t in ts]
    pts = []
    verts = region.vertices
    for i in range(len(verts)):
        ax, ay = verts[i]
        bx, by = verts[(i + 1) % len(verts)]
        for t in np.linspace(0.0, 1.0, n // len(verts), endpoint=False):
            pts.append((ax + t * (bx - ax), ay + t * (by - ay)))
    return pts


def _dist(a, b):
    return math.hypot(a[0] - b[0], a[1] - b[1])


# ---------------------------------------------------------------------------
# construction


def test_circle_rejects_nonpositive_radius():
    with pytest.raises(ValueError):
        Circle((0.0, 0.0), 0.0)
    with pytest.raises(ValueError):
        Circle((0.0, 0.0), -1.0)


def test_circle_rejects_nonfinite():
    with pytest.raises(ValueError):
        Circle((math.nan, 0.0), 1.0)
    with pytest.raises(ValueError):
        Circle((0.0, 0.0), math.inf)


def test_polygon_needs_three_vertices():
    with pytest.raises(ValueError):
        ConvexPolygon(((0.0, 0.0), (1.0, 0.0)))


def test_polygon_rejects_clockwise_order():
    with pytest.raises(ValueError):
        ConvexPolygon(((0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.0)))


def test_polygon_rejects_collinear_vertices():
    with pytest.raises(ValueError):
        ConvexPolygon(((0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (1.0, 1.0)))


# ---------------------------------------------------------------------------
# contains


def test_contains_circle_center():
    assert contains(UNIT_CIRCLE, (0.0, 0.0))


def test_contains_circle_outside():
    assert not contains(UNIT_CIRCLE, (2.0, 0.0))


def test_contains_square_interior():
    assert contains(UNIT_SQUARE, (0.5, 0.5))


def test_contains_boundary_counts_as_inside():
    assert contains(UNIT_CIRCLE, (1.0, 0.0))
    assert contains(UNIT_SQUARE, (1.0, 0.5))
    assert contains(UNIT_SQUARE, (0.0, 0.0))


def test_contains_matches_projection_distance():
    # contains(R, p) iff p is its own projection.
    rng = np.random.default_rng(7)
    for _ in range(200):
        p = tuple(rng.uniform(-3.0, 3.0, size=2))
        for region in (UNIT_CIRCLE, UNIT_SQUARE):
            q = project(region, p)
            assert contains(region, p) == (_dist(p, q) <= 1e-12)


# ---------------------------------------------------------------------------
# project


def test_project_circle_radial():
    assert project(UNIT_CIRCLE, (3.0, 0.0)) == (1.0, 0.0)


def test_project_interior_point_is_identity():
    for region in (UNIT_CIRCLE, UNIT_SQUARE):
        p = (0.25, 0.5)
        assert project(region, p) == p


def test_project_square_corner():
    q = project(UNIT_SQUARE, (2.0, 2.0))
    assert _dist(q, (1.0, 1.0)) < 1e-12


def test_project_matches_boundary_oracle():
    rng = np.random.default_rng(11)
    for region in (UNIT_CIRCLE, UNIT_SQUARE, Circle((5.0, -3.0), 2.5)):
        samples = _boundary_samples(region)
        for _ in range(50):
            p = tuple(rng.uniform(-6.0, 8.0, size=2))
            if contains(region, p):
                continue
            q = project(region, p)
            best = min(_dist(p, s) for s in samples)
            # The sampled oracle is only accurate to the sample spacing.
            assert _dist(p, q) <= best + 1e-3

def test_project_idempotent():
    rng = np.random.default_rng(13)
    for region in (UNIT_CIRCLE, UNIT_SQUARE):
        for _ in range(100):
            p = tuple(rng.uniform(-4.0, 4.0, size=2))
            q = project(region, p)
            qq = project(region, q)
            assert _dist(q, qq) <= 1e-12


def test_project_obtuse_angle_inequality():
    # For closed convex sets, (proj(p) - w) . (p - proj(p)) >= 0 for all w in
    # the set; sampled over interior points with a small tolerance.
    rng = np.random.default_rng(17)
    for region in (UNIT_CIRCLE, UNIT_SQUARE):
        interior = []
        while len(interior) < 40:
            w = tuple(rng.uniform(-1.5, 2.5, size=2))
            if contains(region, w):
                interior.append(w)
        for _ in range(60):
            p = tuple(rng.uniform(-4.0, 4.0, size=2))
            q = project(region, p)
            for w in interior:
                dot = (q[0] - w[0]) * (p[0] - q[0]) + (q[1] - w[1]) * (p[1] - q[1])
                assert dot >= -1e-9


# ---------------------------------------------------------------------------
# closest_boundary_point


def test_closest_boundary_circle_center_line():
    s = closest_boundary_point(Circle((5.0, 0.0), 1.0), (0.0, 0.0))
    assert _dist(s, (4.0, 0.0)) < 1e-12


def test_closest_boundary_square_top_edge():
    s = closest_boundary_point(UNIT_SQUARE, (0.5, 3.0))
    assert _dist(s, (0.5, 1.0)) < 1e-12


def test_closest_boundary_square_corner():
    s = closest_boundary_point(UNIT_SQUARE, (-1.0, -1.0))
    assert _dist(s, (0.0, 0.0)) < 1e-12


def test_closest_boundary_rejects_interior_point():
    with pytest.raises(DegenerateInputError):
        closest_boundary_point(UNIT_CIRCLE, (0.0, 0.0))
    with pytest.raises(DegenerateInputError):
        closest_boundary_point(UNIT_SQUARE, (1.0, 0.5))  # boundary counts as inside


def test_closest_boundary_agrees_with_project_outside():
    rng = np.random.default_rng(19)
    for region in (UNIT_CIRCLE, UNIT_SQUARE):
        for _ in range(100):
            p = tuple(rng.uniform(-4.0, 4.0, size=2))
            if contains(region, p):
                continue
            assert closest_boundary_point(region, p) == project(region, p)


def test_closest_boundary_result_lies_on_boundary():
    rng = np.random.default_rng(23)
    for region in (UNIT_CIRCLE, UNIT_SQUARE):
        for _ in range(100):
            p = tuple(rng.uniform(-4.0, 4.0, size=2))
            if contains(region, p):
                continue
            s = closest_boundary_point(region, p)
            assert _dist(s, project(region, s)) <= 1e-12
            # Membership flips across a small normal perturbation.
            nx = (p[0] - s[0]) / _dist(p, s)
            ny = (p[1] - s[1]) / _dist(p, s)
            assert not contains(region, (s[0] + 1e-6 * nx, s[1] + 1e-6 * ny))
            assert contains(region, (s[0] - 1e-6 * nx, s[1] - 1e-6 * ny))


# ---------------------------------------------------------------------------
# shrink


def test_shrink_zero_is_identity():
    c = Circle((0.0, 0.0), 2.0)
    assert shrink(c, 0.0) is c
    assert shrink(UNIT_SQUARE, 0.0) is UNIT_SQUARE


def test_shrink_circle_radius_arithmetic():
    out = shrink(Circle((0.0, 0.0), 2.0), 0.5)
    assert isinstance(out, Circle)
    assert out.center == (0.0, 0.0)
    assert out.radius == 1.5


def test_shrink_square_offsets_edges():
    out = shrink(UNIT_SQUARE, 0.25)
    assert isinstance(out, ConvexPolygon)
    expect = {(0.25, 0.25), (0.75, 0.25), (0.75, 0.75), (0.25, 0.75)}
    got = {(round(x, 12), round(y, 12)) for x, y in out.vertices}
    assert got == expect


def test_shrink_membership_oracle():
    # A grid point is in the shrunk region iff its depth in the original one
    # is at least delta (distance to the complement >= delta).
    delta = 0.2
    for region in (UNIT_SQUARE, Circle((0.0, 0.0), 1.0)):
        small = shrink(region, delta)
        for x in np.linspace(-1.2, 1.4, 40):
            for y in np.linspace(-1.2, 1.4, 40):
                p = (float(x), float(y))
                if not contains(region, p):
                    assert not contains(small, p)
                    continue
                depth = min(_dist(p, s) for s in _boundary_samples(region))
                if abs(depth - delta) < 5e-3:
                    continue  # too close to call with a sampled oracle
                assert contains(small, p) == (depth > delta)


def test_shrink_empty_region_errors():
    with pytest.raises(EmptyRegionError):
        shrink(Circle((0.0, 0.0), 1.0), 1.0)
    with pytest.raises(EmptyRegionError):
        shrink(UNIT_SQUARE, 0.5)  # inradius of the unit square


def test_shrink_negative_delta_rejected():
    with pytest.raises(ValueError):
        shrink(UNIT_CIRCLE, -0.1)
