"""Planar geometry for room and doorway contours."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from spath.gridmap import CellMask, OccupancyGrid, rasterize

CONVEX_TOL = 1e-7
CONTAINS_TOL = 1e-9
_BIG = 1e6


class GeometryError(ValueError):
    def __init__(self, message: str, entity: str | None = None):
        super().__init__(message)
        self.entity = entity


@dataclass(frozen=True)
class Line2D:
    """Points with ``normal . p + offset = 0``; the interior side is positive."""

    normal: tuple[float, float]
    offset: float

    def value(self, p) -> float:
        return self.normal[0] * p[0] + self.normal[1] * p[1] + self.offset


@dataclass(frozen=True, eq=False)
class ConvexPolygon:
    vertices: np.ndarray
    height: float = 3.0
    label: str = ""

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        if len(v) < 3:
            raise GeometryError("polygon needs at least 3 vertices", self.label or None)
        if _signed_area(v) < 0:
            v = v[::-1]
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def __eq__(self, other):
        if not isinstance(other, ConvexPolygon):
            return NotImplemented
        return (
            self.label == other.label
            and self.height == other.height
            and self.vertices.shape == other.vertices.shape
            and np.allclose(self.vertices, other.vertices, atol=1e-12)
        )

    __hash__ = object.__hash__

    def edges(self):
        v = self.vertices
        return zip(v, np.roll(v, -1, axis=0))

    def contains(self, p, tol: float = CONTAINS_TOL) -> bool:
        return contains(self, p, tol)

    @property
    def area(self) -> float:
        return polygon_area(self)

    @property
    def perimeter(self) -> float:
        v = self.vertices
        return float(np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1).sum())

    def bounds(self) -> tuple[float, float, float, float]:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    def boundary_distance(self, p) -> float:
        """Distance from ``p`` to the closest boundary segment."""
        return min(_point_segment_distance(p, a, b) for a, b in self.edges())

    def halfplanes(self) -> np.ndarray:
        """Rows ``(nx, ny, c)`` with ``nx*x + ny*y + c >= 0`` inside."""
        v = self.vertices
        d = np.roll(v, -1, axis=0) - v
        lengths = np.linalg.norm(d, axis=1)
        n = np.stack([-d[:, 1], d[:, 0]], axis=1) / lengths[:, None]
        c = -(n * v).sum(axis=1)
        return np.column_stack([n, c])


def _signed_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _point_segment_distance(p, a, b) -> float:
    p = np.asarray(p[:2], dtype=float)
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0 else min(1.0, max(0.0, float((p - a) @ ab) / denom))
    return float(np.linalg.norm(p - (a + t * ab)))


def project_wall(wall) -> Line2D:
    nx, ny, nz = wall.normal
    if abs(nz) > 1e-9:
        raise GeometryError("wall plane is not vertical (normal has a z component)")
    norm = math.hypot(nx, ny)
    return Line2D((nx / norm, ny / norm), wall.offset / norm)


def polygon_area(poly: ConvexPolygon) -> float:
    return abs(_signed_area(poly.vertices))


def contains(poly: ConvexPolygon, p, tol: float = CONTAINS_TOL) -> bool:
    hp = poly.halfplanes()
    return bool(np.all(hp[:, 0] * p[0] + hp[:, 1] * p[1] + hp[:, 2] >= -tol))


def _clip(poly: list, line: Line2D) -> list:
    # Sutherland-Hodgman against one half-plane.
    out = []
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        va, vb = line.value(a), line.value(b)
        if va >= 0:
            out.append(a)
        if (va >= 0) != (vb >= 0):
            t = va / (va - vb)
            out.append((a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])))
    return out


def _cleanup(points: list, tol: float = CONVEX_TOL) -> np.ndarray:
    pts = [p for i, p in enumerate(points) if math.dist(p, points[i - 1]) > tol] if len(points) > 1 else points
    changed = True
    while changed and len(pts) >= 3:
        changed = False
        for i in range(len(pts)):
            a, b, c = pts[i - 1], pts[i], pts[(i + 1) % len(pts)]
            cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
            if abs(cross) <= tol * max(math.dist(a, c), 1.0):
                del pts[i]
                changed = True
                break
    return np.asarray(pts, dtype=float)


def halfplane_intersection(lines: list[Line2D], label: str = "") -> np.ndarray:
    poly = [(-_BIG, -_BIG), (_BIG, -_BIG), (_BIG, _BIG), (-_BIG, _BIG)]
    for line in lines:
        poly = _clip(poly, line)
        if not poly:
            break
    pts = _cleanup(poly) if poly else np.zeros((0, 2))
    if len(pts) < 3 or abs(_signed_area(pts)) <= CONVEX_TOL:
        raise GeometryError(f"empty wall intersection for {label!r}", label or None)
    if np.abs(pts).max() >= _BIG / 2:
        raise GeometryError(f"unbounded wall intersection for {label!r}", label or None)
    return pts


def room_contour(room) -> ConvexPolygon:
    try:
        lines = [project_wall(w) for w in room.walls]
    except GeometryError as exc:
        raise GeometryError(f"room {room.id!r}: {exc}", room.id) from exc
    pts = halfplane_intersection(lines, room.id)
    return ConvexPolygon(pts, height=room.height, label=room.id)


def _line_hits(poly: ConvexPolygon, origin: np.ndarray, direction: np.ndarray):
    """Parameter interval where ``origin + t*direction`` lies inside ``poly``."""
    lo, hi = -math.inf, math.inf
    for nx, ny, c in poly.halfplanes():
        num = nx * origin[0] + ny * origin[1] + c
        den = nx * direction[0] + ny * direction[1]
        if abs(den) < 1e-12:
            if num < -CONTAINS_TOL:
                return None
            continue
        t = -num / den
        if den > 0:
            lo = max(lo, t)
        else:
            hi = min(hi, t)
    if lo > hi + 1e-12:
        return None
    return lo, hi


def doorway_contour(door, room_a: ConvexPolygon, room_b: ConvexPolygon, min_depth: float = 0.1) -> ConvexPolygon:
    """Quadrilateral bridging the gap between two room polygons at a doorway.

    The crossing direction is the outward normal of the boundary segment
    closest to the doorway centroid (ties go to ``room_a``). Two lines offset
    by half the width on either side are intersected with both polygons; the
    facing hit points form the quad. Quads thinner than ``min_depth`` (rooms
    sharing a wall line) are widened symmetrically to ``min_depth``.
    """
    c = np.asarray(door.centroid[:2], dtype=float)
    best = None
    for which, poly in ((0, room_a), (1, room_b)):
        for a, b in poly.edges():
            dist = _point_segment_distance(c, a, b)
            if best is None or dist < best[0] - 1e-12:
                best = (dist, which, a, b)
    _, which, a, b = best
    edge = (b - a) / np.linalg.norm(b - a)
    outward = np.array([edge[1], -edge[0]])
    # u points from room_a's side towards room_b's side.
    u = outward if which == 0 else -outward
    lateral = np.array([-u[1], u[0]])
    max_ray = 10.0 * door.width
    hits = []
    for s in (-0.5, 0.5):
        origin = c + s * door.width * lateral
        ia = _line_hits(room_a, origin, u)
        ib = _line_hits(room_b, origin, u)
        if ia is None or ib is None:
            raise GeometryError(f"doorway {door.id!r}: offset ray misses a room boundary", door.id)
        ta, tb = ia[1], ib[0]
        if abs(ta) > max_ray or abs(tb) > max_ray:
            raise GeometryError(f"doorway {door.id!r}: ray hit beyond maximum length", door.id)
        hits.append((origin, ta, tb))
    quad = []
    for origin, ta, tb in hits:
        if tb - ta < min_depth:
            mid = 0.5 * (ta + tb)
            ta, tb = mid - 0.5 * min_depth, mid + 0.5 * min_depth
        quad.append(origin + ta * u)
        quad.append(origin + tb * u)
    pts = np.asarray([quad[0], quad[1], quad[3], quad[2]])
    return ConvexPolygon(pts, height=min(room_a.height, room_b.height), label=door.id)


@dataclass(frozen=True, eq=False)
class ComposedContour:
    """Union of convex polygons, realised as a cell mask on the planning grid."""

    members: tuple[ConvexPolygon, ...]
    mask: CellMask
    labels: tuple[str, ...] = field(default=())

    @property
    def area(self) -> float:
        return self.mask.area

    def contains(self, p) -> bool:
        return any(m.contains(p) for m in self.members)

    @property
    def cells(self) -> CellMask:
        return self.mask


def compose(polys, grid: OccupancyGrid, mask: CellMask | None = None) -> ComposedContour:
    polys = tuple(polys)
    if not polys:
        raise GeometryError("cannot compose an empty polygon list")
    if mask is None:
        mask = rasterize(polys, grid)
    labels = tuple(dict.fromkeys(p.label for p in polys))
    return ComposedContour(polys, mask, labels)
