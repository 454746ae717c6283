"""High-level search over the semantic graph and the coarse geometric path."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from spath.geometry import ComposedContour, compose
from spath.scenegraph import BLOCKED, SceneGraph, SemanticGraph


class SemanticError(ValueError):
    pass


class LocateError(SemanticError):
    pass


class UnreachableError(SemanticError):
    pass


@dataclass(frozen=True)
class SemanticPath:
    nodes: tuple[str, ...]
    total_weight: float

    @property
    def rooms(self) -> tuple[str, ...]:
        return self.nodes[0::2]

    @property
    def doorways(self) -> tuple[str, ...]:
        return self.nodes[1::2]

    @property
    def n(self) -> int:
        """Doorway count minus one (``-1`` for a single-room path)."""
        return len(self.doorways) - 1

    def edges(self):
        return [frozenset(p) for p in zip(self.nodes, self.nodes[1:])]


@dataclass(frozen=True, eq=False)
class CoarsePath:
    waypoints: tuple[tuple[float, float], ...]
    region: ComposedContour
    legs: tuple[ComposedContour, ...]
    semantic: SemanticPath


def locate(p, sg: SceneGraph, room_polys: dict, door_polys: dict) -> str:
    """Room containing ``p``; points inside only a doorway quad map to the nearer connected room."""
    p = (float(p[0]), float(p[1]))
    for rid in sg.rooms:
        if room_polys[rid].contains(p):
            return rid
    for did, door in sg.doorways.items():
        if door_polys[did].contains(p):
            a, b = door.connects
            da = math.dist(p, sg.rooms[a].centroid[:2])
            db = math.dist(p, sg.rooms[b].centroid[:2])
            return a if (da, a) <= (db, b) else b
    raise LocateError(f"point {p} lies in no room or doorway contour")


def astar(g: SemanticGraph, start: str, goal: str) -> SemanticPath:
    """Shortest room-to-room path; ties go to fewer hops, then lexicographic node ids."""
    for node in (start, goal):
        if g.kinds.get(node) != "room":
            raise SemanticError(f"unknown room {node!r}")
    goal_pos = g.positions[goal]
    h = {v: float(np.linalg.norm(pos - goal_pos)) for v, pos in g.positions.items()}
    best = {start: (0.0, 0, (start,))}
    heap = [(h[start], 0, (start,), 0.0)]
    closed = set()
    while heap:
        _, hops, path, cost = heapq.heappop(heap)
        v = path[-1]
        if v in closed:
            continue
        closed.add(v)
        if v == goal:
            return SemanticPath(path, cost)
        for u, w in sorted(g.adjacency[v].items()):
            if w == BLOCKED or u in closed:
                continue
            label = (cost + w, hops + 1, path + (u,))
            if u not in best or label < best[u]:
                best[u] = label
                heapq.heappush(heap, (label[0] + h[u], label[1], label[2], label[0]))
    raise UnreachableError(f"no traversable route from {start!r} to {goal!r}")


def leg_labels(sp: SemanticPath) -> list[tuple[str, ...]]:
    """Contour labels per leg: consecutive legs overlap in exactly one doorway quad."""
    rooms, doors = sp.rooms, sp.doorways
    if not doors:
        return [(rooms[0],)]
    legs = [(rooms[0], doors[0])]
    for i in range(1, len(doors)):
        legs.append((doors[i - 1], rooms[i], doors[i]))
    legs.append((doors[-1], rooms[-1]))
    return legs


def coarse_path(sp: SemanticPath, p_s, p_g, sg: SceneGraph, contours: dict, masks: dict | None = None, grid=None) -> CoarsePath:
    """Waypoints through doorway centroids plus per-leg and overall sample regions.

    ``contours`` maps labels to polygons; ``masks`` optionally maps labels to
    precomputed cell masks so legs are unions of boolean arrays.
    """
    pts = [(float(p_s[0]), float(p_s[1]))]
    pts += [tuple(map(float, sg.doorways[d].centroid[:2])) for d in sp.doorways]
    pts.append((float(p_g[0]), float(p_g[1])))
    legs = [_compose(labels, contours, masks, grid) for labels in leg_labels(sp)]
    region = _compose(sp.nodes, contours, masks, grid)
    return CoarsePath(tuple(pts), region, tuple(legs), sp)


def _compose(labels, contours, masks, grid) -> ComposedContour:
    labels = tuple(dict.fromkeys(labels))
    polys = [contours[k] for k in labels]
    if masks is None:
        return compose(polys, grid)
    mask = masks[labels[0]]
    for k in labels[1:]:
        mask = mask.union(masks[k])
    return compose(polys, mask.grid, mask)


def render_instructions(sp: SemanticPath) -> list[str]:
    """One human-readable line per doorway hop."""
    if len(sp.nodes) == 1:
        return [f"stay in {sp.nodes[0]}"]
    nodes = sp.nodes
    return [f"go from {nodes[i]} through {nodes[i + 1]} to {nodes[i + 2]}" for i in range(0, len(nodes) - 2, 2)]
