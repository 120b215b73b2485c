"""2-D vectors and convex regions: membership, projection, boundary queries, inward offsets.

Points are plain ``(x, y)`` tuples in world units.  Regions are immutable
values; every operation is a pure function.  Membership includes the boundary,
with a small distance tolerance so that points within ``BOUNDARY_TOL`` of the
boundary are classified deterministically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

Vec2 = tuple[float, float]

#: Distance below which a point counts as lying on a region boundary.
BOUNDARY_TOL = 1e-9


class DegenerateInputError(ValueError):
    """A boundary query was made from inside (or on) the region."""


class EmptyRegionError(ValueError):
    """An inward offset left nothing of the region."""


def _require_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {values!r}")


@dataclass(frozen=True)
class Circle:
    """Disc with positive radius; the boundary belongs to the region."""

    center: Vec2
    radius: float

    def __post_init__(self) -> None:
        cx, cy = self.center
        object.__setattr__(self, "center", (float(cx), float(cy)))
        object.__setattr__(self, "radius", float(self.radius))
        _require_finite("circle center", *self.center)
        _require_finite("circle radius", self.radius)
        if self.radius <= 0.0:
            raise ValueError(f"circle radius must be > 0, got {self.radius}")


@dataclass(frozen=True)
class ConvexPolygon:
    """Strictly convex polygon with vertices in counter-clockwise order."""

    vertices: tuple[Vec2, ...]

    def __post_init__(self) -> None:
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        object.__setattr__(self, "vertices", verts)
        if len(verts) < 3:
            raise ValueError(f"polygon needs >= 3 vertices, got {len(verts)}")
        for x, y in verts:
            _require_finite("polygon vertex", x, y)
        n = len(verts)
        for i in range(n):
            ax, ay = verts[i]
            bx, by = verts[(i + 1) % n]
            cx, cy = verts[(i + 2) % n]
            turn = (bx - ax) * (cy - by) - (by - ay) * (cx - bx)
            if turn <= 0.0:
                raise ValueError(
                    "polygon vertices must be strictly convex in counter-clockwise order"
                )


Region = Circle | ConvexPolygon


def contains(region: Region, p: Vec2) -> bool:
    """True iff ``p`` lies in the region; boundary points count as inside."""
    px, py = p
    if isinstance(region, Circle):
        cx, cy = region.center
        dx = px - cx
        dy = py - cy
        return math.sqrt(dx * dx + dy * dy) <= region.radius + BOUNDARY_TOL
    verts = region.vertices
    n = len(verts)
    for i in range(n):
        ax, ay = verts[i]
        bx, by = verts[(i + 1) % n]
        ex = bx - ax
        ey = by - ay
        # Signed area of (edge, p): negative means p is right of the CCW edge,
        # i.e. outside.  Scale the tolerance by edge length to keep it a distance.
        cross = ex * (py - ay) - ey * (px - ax)
        if cross < -BOUNDARY_TOL * math.sqrt(ex * ex + ey * ey):
            return False
    return True


def _exterior_closest(region: Region, p: Vec2) -> Vec2:
    """Closest boundary point for an exterior ``p`` (no membership check)."""
    px, py = p
    if isinstance(region, Circle):
        cx, cy = region.center
        dx = px - cx
        dy = py - cy
        d = math.sqrt(dx * dx + dy * dy)
        scale = region.radius / d
        return (cx + dx * scale, cy + dy * scale)
    verts = region.vertices
    n = len(verts)
    best_d2 = math.inf
    best = verts[0]
    for i in range(n):
        ax, ay = verts[i]
        bx, by = verts[(i + 1) % n]
        ex = bx - ax
        ey = by - ay
        t = ((px - ax) * ex + (py - ay) * ey) / (ex * ex + ey * ey)
        if t < 0.0:
            qx, qy = ax, ay
        elif t > 1.0:
            qx, qy = bx, by
        else:
            qx = ax + t * ex
            qy = ay + t * ey
        ddx = px - qx
        ddy = py - qy
        d2 = ddx * ddx + ddy * ddy
        if d2 < best_d2:  # strict: ties go to the lowest-index edge
            best_d2 = d2
            best = (qx, qy)
    return best


def project(region: Region, p: Vec2) -> Vec2:
    """Closest point of the region to ``p``; ``p`` itself when already contained."""
    if contains(region, p):
        return p
    return _exterior_closest(region, p)


def closest_boundary_point(region: Region, p: Vec2) -> Vec2:
    """Closest boundary point seen from strictly outside the region.

    Raises :class:`DegenerateInputError` for interior (or boundary) points,
    where the query has no use in this codebase and ties would be ambiguous.
    """
    if contains(region, p):
        raise DegenerateInputError(
            f"closest_boundary_point needs an exterior point, got {p!r} inside {region!r}"
        )
    return _exterior_closest(region, p)


def shrink(region: Region, delta: float) -> Region:
    """Region offset inward by ``delta`` (the set of points at depth >= delta).

    Raises :class:`EmptyRegionError` when the offset annihilates the region
    and ``ValueError`` for negative ``delta``.
    """
    if delta < 0.0:
        raise ValueError(f"shrink distance must be >= 0, got {delta}")
    if delta == 0.0:
        return region
    if isinstance(region, Circle):
        new_radius = region.radius - delta
        if new_radius <= 0.0:
            raise EmptyRegionError(
                f"shrinking radius {region.radius} by {delta} leaves no region"
            )
        return Circle(region.center, new_radius)

    verts = region.vertices
    n = len(verts)
    # Each edge contributes the half-plane n.x >= n.v_i + delta with inward
    # unit normal n; the shrunk polygon's vertex i is the intersection of the
    # offset lines of edges i-1 and i.
    lines: list[tuple[float, float, float]] = []
    for i in range(n):
        ax, ay = verts[i]
        bx, by = verts[(i + 1) % n]
        ex = bx - ax
        ey = by - ay
        elen = math.sqrt(ex * ex + ey * ey)
        nx = -ey / elen
        ny = ex / elen
        lines.append((nx, ny, nx * ax + ny * ay + delta))
    new_verts: list[Vec2] = []
    for i in range(n):
        n1x, n1y, c1 = lines[i - 1]
        n2x, n2y, c2 = lines[i]
        det = n1x * n2y - n1y * n2x
        if abs(det) < 1e-12:
            raise EmptyRegionError("offset collapses nearly parallel edges")
        new_verts.append(
            ((c1 * n2y - c2 * n1y) / det, (n1x * c2 - n2x * c1) / det)
        )
    try:
        out = ConvexPolygon(tuple(new_verts))
    except ValueError as exc:
        raise EmptyRegionError(f"offset by {delta} annihilates the polygon") from exc
    # Large offsets can also cross corners over without breaking convexity;
    # every new vertex must still satisfy every offset half-plane.
    for x, y in new_verts:
        for nx, ny, c in lines:
            if nx * x + ny * y < c - 1e-9:
                raise EmptyRegionError(f"offset by {delta} annihilates the polygon")
    return out
