"""Indoor scene graph: walls, rooms, doorways, and the weighted semantic graph."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

SCHEMA = "spath-sg/1"

# Edge weight for connections through untraversable doorways. A* skips these
# edges outright instead of adding them to path costs.
BLOCKED = math.inf

DOOR_EPS = 0.5


class SceneGraphError(ValueError):
    """Raised for malformed documents or violated scene-graph invariants."""

    def __init__(self, message: str, entity: str | None = None):
        super().__init__(message)
        self.entity = entity


@dataclass(frozen=True)
class WallPlane:
    normal: tuple[float, float, float]
    offset: float

    def __post_init__(self):
        n = tuple(float(v) for v in self.normal)
        if len(n) != 3:
            raise SceneGraphError("wall normal must be a 3-vector")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    def signed_distance(self, p) -> float:
        return sum(a * b for a, b in zip(self.normal, p)) + self.offset


@dataclass(frozen=True)
class Room:
    id: str
    centroid: tuple[float, float, float]
    walls: tuple[WallPlane, ...]
    height: float = 3.0

    def __post_init__(self):
        object.__setattr__(self, "centroid", tuple(float(v) for v in self.centroid))
        object.__setattr__(self, "walls", tuple(self.walls))
        object.__setattr__(self, "height", float(self.height))


@dataclass(frozen=True)
class Doorway:
    id: str
    centroid: tuple[float, float, float]
    width: float
    connects: tuple[str, str]
    traversable: bool = True

    def __post_init__(self):
        object.__setattr__(self, "centroid", tuple(float(v) for v in self.centroid))
        object.__setattr__(self, "width", float(self.width))
        object.__setattr__(self, "connects", tuple(self.connects))
        object.__setattr__(self, "traversable", bool(self.traversable))


@dataclass(frozen=True)
class SceneGraph:
    rooms: dict[str, Room] = field(default_factory=dict)
    doorways: dict[str, Doorway] = field(default_factory=dict)

    @classmethod
    def from_lists(cls, rooms: Iterable[Room], doorways: Iterable[Doorway], validate=True) -> "SceneGraph":
        room_map: dict[str, Room] = {}
        for r in rooms:
            if r.id in room_map:
                raise SceneGraphError(f"duplicate room id {r.id!r}", r.id)
            room_map[r.id] = r
        door_map: dict[str, Doorway] = {}
        for d in doorways:
            if d.id in door_map or d.id in room_map:
                raise SceneGraphError(f"duplicate doorway id {d.id!r}", d.id)
            door_map[d.id] = d
        sg = cls(room_map, door_map)
        if validate:
            sg.validate()
        return sg

    @property
    def n_walls(self) -> int:
        return sum(len(r.walls) for r in self.rooms.values())

    def doorways_of(self, room_id: str) -> list[Doorway]:
        return [d for d in self.doorways.values() if room_id in d.connects]

    def doorway_states(self) -> dict[str, bool]:
        return {k: d.traversable for k, d in self.doorways.items()}

    def validate(self, door_eps: float = DOOR_EPS) -> None:
        # Local import: geometry depends on this module's types.
        from spath.geometry import GeometryError, room_contour

        polys = {}
        for rid, room in self.rooms.items():
            if len(room.walls) < 3:
                raise SceneGraphError(f"room {rid!r} has fewer than 3 walls", rid)
            for w in room.walls:
                if abs(math.sqrt(sum(v * v for v in w.normal)) - 1.0) > 1e-9:
                    raise SceneGraphError(f"room {rid!r} has a non-unit wall normal", rid)
            try:
                poly = room_contour(room)
            except GeometryError as exc:
                raise SceneGraphError(str(exc), rid) from exc
            if not poly.contains(room.centroid[:2]):
                raise SceneGraphError(f"centroid of room {rid!r} lies outside its walls", rid)
            polys[rid] = poly
        for did, door in self.doorways.items():
            if door.width <= 0:
                raise SceneGraphError(f"doorway {did!r} has non-positive width", did)
            if len(door.connects) != 2 or door.connects[0] == door.connects[1]:
                raise SceneGraphError(f"doorway {did!r} must connect two distinct rooms", did)
            for rid in door.connects:
                if rid not in self.rooms:
                    raise SceneGraphError(f"doorway {did!r} references unknown room {rid!r}", did)
                if polys[rid].boundary_distance(door.centroid[:2]) > door_eps:
                    raise SceneGraphError(
                        f"doorway {did!r} centroid is farther than {door_eps} m from room {rid!r}", did
                    )


@dataclass(frozen=True)
class SemanticGraph:
    """Undirected weighted room/doorway graph.

    ``adjacency[a][b]`` is the edge weight; untraversable connections carry
    ``BLOCKED``.
    """

    positions: dict[str, np.ndarray]
    kinds: dict[str, str]
    adjacency: dict[str, dict[str, float]]

    @property
    def nodes(self) -> list[str]:
        return list(self.kinds)

    def weight(self, a: str, b: str) -> float:
        return self.adjacency[a][b]

    def edges(self):
        seen = set()
        for a, nbrs in self.adjacency.items():
            for b, w in nbrs.items():
                key = frozenset((a, b))
                if key not in seen:
                    seen.add(key)
                    yield a, b, w

    def with_weights(self, updates: dict[frozenset, float]) -> "SemanticGraph":
        adj = {a: dict(n) for a, n in self.adjacency.items()}
        for key, w in updates.items():
            a, b = tuple(key)
            adj[a][b] = w
            adj[b][a] = w
        return SemanticGraph(self.positions, self.kinds, adj)


def build_semantic_graph(sg: SceneGraph) -> SemanticGraph:
    positions: dict[str, np.ndarray] = {}
    kinds: dict[str, str] = {}
    adjacency: dict[str, dict[str, float]] = {}
    for rid, room in sg.rooms.items():
        positions[rid] = np.asarray(room.centroid, dtype=float)
        kinds[rid] = "room"
        adjacency[rid] = {}
    for did, door in sg.doorways.items():
        positions[did] = np.asarray(door.centroid, dtype=float)
        kinds[did] = "doorway"
        adjacency[did] = {}
        for rid in door.connects:
            w = float(np.linalg.norm(positions[rid] - positions[did])) if door.traversable else BLOCKED
            adjacency[did][rid] = w
            adjacency[rid][did] = w
    return SemanticGraph(positions, kinds, adjacency)


def set_doorway_state(sg: SceneGraph, doorway_id: str, traversable: bool) -> SceneGraph:
    if doorway_id not in sg.doorways:
        raise KeyError(f"unknown doorway {doorway_id!r}")
    doors = dict(sg.doorways)
    doors[doorway_id] = replace(doors[doorway_id], traversable=bool(traversable))
    return SceneGraph(dict(sg.rooms), doors)


def scene_graph_to_dict(sg: SceneGraph) -> dict:
    return {
        "schema": SCHEMA,
        "rooms": [
            {
                "id": r.id,
                "centroid": list(r.centroid),
                "height": r.height,
                "walls": [{"normal": list(w.normal), "offset": w.offset} for w in r.walls],
            }
            for r in sg.rooms.values()
        ],
        "doorways": [
            {
                "id": d.id,
                "centroid": list(d.centroid),
                "width": d.width,
                "traversable": d.traversable,
                "connects": list(d.connects),
            }
            for d in sg.doorways.values()
        ],
    }


def scene_graph_from_dict(doc: dict) -> SceneGraph:
    if not isinstance(doc, dict):
        raise SceneGraphError("scene graph document must be a JSON object")
    schema = doc.get("schema", SCHEMA)
    if schema != SCHEMA:
        raise SceneGraphError(f"unsupported schema {schema!r}")
    try:
        rooms = [
            Room(
                id=str(r["id"]),
                centroid=r["centroid"],
                height=r.get("height", 3.0),
                walls=tuple(WallPlane(w["normal"], w["offset"]) for w in r["walls"]),
            )
            for r in doc["rooms"]
        ]
        doors = [
            Doorway(
                id=str(d["id"]),
                centroid=d["centroid"],
                width=d["width"],
                traversable=d.get("traversable", True),
                connects=tuple(str(c) for c in d["connects"]),
            )
            for d in doc.get("doorways", [])
        ]
    except (KeyError, TypeError) as exc:
        raise SceneGraphError(f"malformed scene graph document: {exc}") from exc
    for r in rooms:
        if len(r.centroid) != 3:
            raise SceneGraphError(f"room {r.id!r} centroid must have 3 components", r.id)
    for d in doors:
        if len(d.centroid) != 3:
            raise SceneGraphError(f"doorway {d.id!r} centroid must have 3 components", d.id)
    return SceneGraph.from_lists(rooms, doors)


def load_scene_graph(data: bytes | str) -> SceneGraph:
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SceneGraphError(f"invalid JSON: {exc}") from exc
    return scene_graph_from_dict(doc)


def dump_scene_graph(sg: SceneGraph) -> str:
    return json.dumps(scene_graph_to_dict(sg), indent=1)
