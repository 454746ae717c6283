"""Synthetic multi-room floors: scene graph plus a consistent occupancy grid."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from spath.gridmap import OccupancyGrid, distance_field, read_pgm, write_pgm
from spath.rng import XorShift64Star
from spath.scenegraph import Doorway, Room, SceneGraph, WallPlane, build_semantic_graph, load_scene_graph, dump_scene_graph

SCENE_FILE = "scene_graph.json"
GRID_FILE = "grid.pgm"
SPEC_FILE = "floor_spec.json"


class InfeasibleSpec(ValueError):
    pass


@dataclass(frozen=True)
class FloorSpec:
    rows: int = 2
    cols: int = 3
    room_size: tuple[float, float] = (7.5, 8.5)
    corridor_width: float = 3.0
    doorway_width: tuple[float, float] = (1.2, 1.6)
    obstacles_per_room: tuple[int, int] = (2, 5)
    obstacle_size: tuple[float, float] = (0.4, 1.4)
    open_doorway_prob: float = 0.0
    door_placement: str = "random"
    wall_thickness: float = 0.2
    resolution: float = 0.05
    robot_radius: float = 0.3
    room_height: float = 3.0
    seed: int = 0

    def __post_init__(self):
        for name in ("room_size", "doorway_width", "obstacles_per_room", "obstacle_size"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    @classmethod
    def from_dict(cls, doc: dict) -> "FloorSpec":
        known = {k: v for k, v in doc.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class _Rect:
    id: str
    x0: float
    y0: float
    x1: float
    y1: float
    kind: str  # "office" | "corridor"
    cell: tuple[int, int] = (0, 0)

    @property
    def centroid(self):
        return (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))

    def walls(self):
        return (
            WallPlane((1.0, 0.0, 0.0), -self.x0),
            WallPlane((-1.0, 0.0, 0.0), self.x1),
            WallPlane((0.0, 1.0, 0.0), -self.y0),
            WallPlane((0.0, -1.0, 0.0), self.y1),
        )


@dataclass
class _Door:
    a: str
    b: str
    center: tuple[float, float]
    width: float
    axis: str  # "x": passage crosses a vertical wall; "y": a horizontal one
    gap: tuple[float, float]  # extent of the wall gap along the crossing axis
    essential: bool = False


def _layout(spec: FloorSpec, rng: XorShift64Star):
    t = spec.wall_thickness
    widths = [rng.uniform(*spec.room_size) for _ in range(spec.cols)]
    depths = [rng.uniform(*spec.room_size) for _ in range(spec.rows)]
    xs = []
    x = t
    for w in widths:
        xs.append((x, x + w))
        x += w + t
    width = x
    bands = []  # (kind, row or corridor index, y0, y1)
    y = t
    n_corr = 0
    for r in range(spec.rows):
        bands.append(("office", r, y, y + depths[r]))
        y += depths[r] + t
        if spec.corridor_width > 0 and r % 2 == 0 and r + 1 < spec.rows:
            bands.append(("corridor", n_corr, y, y + spec.corridor_width))
            y += spec.corridor_width + t
            n_corr += 1
    height = y
    return xs, bands, width, height


def _door_pos(lo: float, hi: float, w: float, spec: FloorSpec, rng) -> float:
    margin = 0.5 * w + 0.6
    if hi - lo < 2 * margin:
        raise InfeasibleSpec("room too small for its doorways")
    if spec.door_placement == "center":
        return 0.5 * (lo + hi)
    return rng.uniform(lo + margin, hi - margin)


def generate(spec: FloorSpec) -> tuple[SceneGraph, OccupancyGrid]:
    """Axis-aligned rooms on a grid with optional corridors, doorways, and obstacles."""
    if spec.rows < 1 or spec.cols < 1:
        raise InfeasibleSpec("rows and cols must be >= 1")
    if spec.doorway_width[0] < 4 * spec.robot_radius:
        raise InfeasibleSpec("doorway width must be at least twice the robot diameter")
    if spec.room_size[0] < spec.doorway_width[1] + 2.0:
        raise InfeasibleSpec("rooms too small for doorways")
    rng = XorShift64Star(spec.seed)
    xs, bands, width, height = _layout(spec, rng)
    t = spec.wall_thickness

    rects: dict[str, _Rect] = {}
    office_at: dict[tuple[int, int], _Rect] = {}
    band_index = {}
    for bi, (kind, idx, y0, y1) in enumerate(bands):
        band_index[(kind, idx)] = bi
        for c, (x0, x1) in enumerate(xs):
            if kind == "office":
                r = _Rect(f"R{idx}_{c}", x0, y0, x1, y1, "office", (idx, c))
                office_at[(idx, c)] = r
            else:
                cx0 = x0 - (0.5 * t if c > 0 else 0.0)
                cx1 = x1 + (0.5 * t if c < spec.cols - 1 else 0.0)
                r = _Rect(f"C{idx}_{c}", cx0, y0, cx1, y1, "corridor", (idx, c))
            rects[r.id] = r

    doors: list[_Door] = []
    dw = spec.doorway_width
    for bi, (kind, idx, y0, y1) in enumerate(bands):
        for c in range(spec.cols):
            here = rects[f"R{idx}_{c}" if kind == "office" else f"C{idx}_{c}"]
            if c + 1 < spec.cols:
                right = rects[f"R{idx}_{c + 1}" if kind == "office" else f"C{idx}_{c + 1}"]
                if kind == "corridor":
                    w = 0.8 * spec.corridor_width
                    xm = here.x1
                    doors.append(_Door(here.id, right.id, (xm, 0.5 * (y0 + y1)), w, "x", (xm, xm), True))
                else:
                    w = rng.uniform(*dw)
                    yc = _door_pos(y0, y1, w, spec, rng)
                    doors.append(_Door(here.id, right.id, (here.x1 + 0.5 * t, yc), w, "x", (here.x1, right.x0)))
            if bi + 1 < len(bands):
                nkind, nidx, ny0, _ = bands[bi + 1]
                above = rects[f"R{nidx}_{c}" if nkind == "office" else f"C{nidx}_{c}"]
                w = rng.uniform(*dw)
                xc = _door_pos(xs[c][0], xs[c][1], w, spec, rng)
                essential = kind == "corridor" or nkind == "corridor"
                doors.append(_Door(here.id, above.id, (xc, y1 + 0.5 * t), w, "y", (y1, ny0), essential))

    # Essential doors first, then a random spanning completion, then optional extras.
    parent = {k: k for k in rects}

    def find(k):
        while parent[k] != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    chosen = []
    optional = []
    for d in doors:
        if d.essential:
            chosen.append(d)
            parent[find(d.a)] = find(d.b)
        else:
            optional.append(d)
    order = list(range(len(optional)))
    for i in range(len(order) - 1, 0, -1):
        j = rng.randbelow(i + 1)
        order[i], order[j] = order[j], order[i]
    for i in order:
        d = optional[i]
        ra, rb = find(d.a), find(d.b)
        if ra != rb:
            parent[ra] = rb
            chosen.append(d)
        elif rng.random() < spec.open_doorway_prob:
            chosen.append(d)
    chosen.sort(key=lambda d: (d.a, d.b))

    # Occupancy: everything is wall except room interiors and doorway gaps.
    res = spec.resolution
    W = math.ceil(width / res - 1e-9)
    H = math.ceil(height / res - 1e-9)
    cx = (np.arange(W) + 0.5) * res
    cy = (np.arange(H) + 0.5) * res
    occ = np.ones((H, W), dtype=bool)

    def carve(x0, y0, x1, y1, value=False):
        cols = np.flatnonzero((cx >= x0) & (cx <= x1))
        rows = np.flatnonzero((cy >= y0) & (cy <= y1))
        if len(cols) and len(rows):
            occ[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1] = value

    for r in rects.values():
        carve(r.x0, r.y0, r.x1, r.y1)
    for d in chosen:
        half = 0.5 * d.width
        if d.axis == "x":
            carve(d.gap[0] - 1e-9, d.center[1] - half, d.gap[1] + 1e-9, d.center[1] + half)
        else:
            carve(d.center[0] - half, d.gap[0] - 1e-9, d.center[0] + half, d.gap[1] + 1e-9)

    # Obstacles stay clear of walls, doorways, and the room centroid.
    margin = 1.0
    n_obst = 0
    for r in sorted(rects.values(), key=lambda r: r.id):
        if r.kind != "office":
            continue
        lo, hi = spec.obstacles_per_room
        k = lo + rng.randbelow(hi - lo + 1) if hi > lo else lo
        cxr, cyr = r.centroid
        for _ in range(k):
            for _attempt in range(50):
                w = rng.uniform(*spec.obstacle_size)
                h = rng.uniform(*spec.obstacle_size)
                ax0, ax1 = r.x0 + margin, r.x1 - margin - w
                ay0, ay1 = r.y0 + margin, r.y1 - margin - h
                if ax1 <= ax0 or ay1 <= ay0:
                    break
                ox = rng.uniform(ax0, ax1)
                oy = rng.uniform(ay0, ay1)
                nx = min(max(cxr, ox), ox + w)
                ny = min(max(cyr, oy), oy + h)
                if math.hypot(nx - cxr, ny - cyr) < margin + spec.robot_radius:
                    continue
                carve(ox, oy, ox + w, oy + h, True)
                n_obst += 1
                break

    rooms = [
        Room(r.id, (r.centroid[0], r.centroid[1], 0.0), r.walls(), spec.room_height)
        for r in sorted(rects.values(), key=lambda r: r.id)
    ]
    doorways = [
        Doorway(f"D{i}", (d.center[0], d.center[1], 0.0), d.width, (d.a, d.b), True) for i, d in enumerate(chosen)
    ]
    sg = SceneGraph.from_lists(rooms, doorways)
    grid = OccupancyGrid((0.0, 0.0), res, occ)
    return sg, grid


def generate_checked(spec: FloorSpec) -> tuple[SceneGraph, OccupancyGrid]:
    sg, grid = generate(spec)
    report = connectivity_check(sg, grid, spec.robot_radius)
    if report["disagreements"]:
        raise InfeasibleSpec(f"generated floor is inconsistent: {report['disagreements'][:3]}")
    return sg, grid


def connectivity_check(sg: SceneGraph, grid: OccupancyGrid, robot_radius: float = 0.3) -> dict:
    """Compare room-pair reachability in the semantic graph with flood fill over clear cells."""
    from spath.geometry import room_contour
    from spath.gridmap import rasterize

    g = build_semantic_graph(sg)
    label = {}
    for start in sg.rooms:
        if start in label:
            continue
        stack = [start]
        label[start] = start
        while stack:
            v = stack.pop()
            for u, w in g.adjacency[v].items():
                if math.isfinite(w) and u not in label:
                    label[u] = start
                    stack.append(u)
    df = distance_field(grid)
    clear = df.distance >= robot_radius
    comps, _ = ndimage.label(clear)
    room_comp = {}
    for rid, room in sg.rooms.items():
        mask = rasterize([room_contour(room)], grid).member & clear
        ids = comps[mask]
        ids = ids[ids > 0]
        room_comp[rid] = int(np.bincount(ids).argmax()) if len(ids) else -1
    ids = sorted(sg.rooms)
    bad = []
    for i, a in enumerate(ids):
        for b in ids[i + 1 :]:
            sem = label[a] == label[b]
            geo = room_comp[a] == room_comp[b] and room_comp[a] > 0
            if sem != geo:
                bad.append({"rooms": [a, b], "semantic": sem, "geometric": geo})
    return {"rooms": len(ids), "disagreements": bad}


# --- fixtures ------------------------------------------------------------------


def chain_floor(k: int, room: float = 6.0, door_width: float = 1.4, resolution: float = 0.05, seed: int = 0):
    """``k`` identical empty rooms in a row joined by centred doorways."""
    spec = FloorSpec(
        rows=1,
        cols=k,
        room_size=(room, room),
        corridor_width=0.0,
        doorway_width=(door_width, door_width),
        obstacles_per_room=(0, 0),
        door_placement="center",
        resolution=resolution,
        seed=seed,
    )
    return generate(spec)


def rf1_like() -> tuple[SceneGraph, OccupancyGrid]:
    """22 rooms, 23 doorways, 88 walls: two rows of 11 rooms, row-internal doors plus 3 cross doors."""
    return grid_floor(2, 11, cross=[0, 5, 10], room=4.0)


def rf2_like() -> tuple[SceneGraph, OccupancyGrid]:
    """8 rooms, 8 doorways, 32 walls: two rows of 4 rooms, row-internal doors plus 2 cross doors."""
    return grid_floor(2, 4, cross=[0, 3], room=6.0)


def grid_floor(rows: int, cols: int, cross: list[int], room: float, t: float = 0.2, res: float = 0.05):
    """Square empty rooms on a grid; every row is a chain, rows are joined at columns ``cross``."""
    rooms = []
    doors = []
    for r in range(rows):
        for c in range(cols):
            x0 = t + c * (room + t)
            y0 = t + r * (room + t)
            rect = _Rect(f"R{r}_{c}", x0, y0, x0 + room, y0 + room, "office", (r, c))
            rooms.append(rect)
    by = {rect.cell: rect for rect in rooms}
    for r in range(rows):
        for c in range(cols - 1):
            a, b = by[(r, c)], by[(r, c + 1)]
            doors.append(_Door(a.id, b.id, (a.x1 + 0.5 * t, 0.5 * (a.y0 + a.y1)), 1.2, "x", (a.x1, b.x0)))
    for r in range(rows - 1):
        for c in cross:
            a, b = by[(r, c)], by[(r + 1, c)]
            doors.append(_Door(a.id, b.id, (0.5 * (a.x0 + a.x1), a.y1 + 0.5 * t), 1.2, "y", (a.y1, b.y0)))
    width = t + cols * (room + t)
    height = t + rows * (room + t)
    W, H = math.ceil(width / res - 1e-9), math.ceil(height / res - 1e-9)
    cx = (np.arange(W) + 0.5) * res
    cy = (np.arange(H) + 0.5) * res
    occ = np.ones((H, W), dtype=bool)

    def carve(x0, y0, x1, y1):
        cols_ = np.flatnonzero((cx >= x0) & (cx <= x1))
        rows_ = np.flatnonzero((cy >= y0) & (cy <= y1))
        occ[rows_[0] : rows_[-1] + 1, cols_[0] : cols_[-1] + 1] = False

    for rect in rooms:
        carve(rect.x0, rect.y0, rect.x1, rect.y1)
    for d in doors:
        h = 0.5 * d.width
        if d.axis == "x":
            carve(d.gap[0] - 1e-9, d.center[1] - h, d.gap[1] + 1e-9, d.center[1] + h)
        else:
            carve(d.center[0] - h, d.gap[0] - 1e-9, d.center[0] + h, d.gap[1] + 1e-9)
    sg = SceneGraph.from_lists(
        [Room(r.id, (*r.centroid, 0.0), r.walls()) for r in rooms],
        [Doorway(f"D{i}", (*d.center, 0.0), d.width, (d.a, d.b)) for i, d in enumerate(doors)],
    )
    return sg, OccupancyGrid((0.0, 0.0), res, occ)


SF1_SPEC = FloorSpec(rows=2, cols=3, room_size=(7.5, 8.5), corridor_width=3.0, obstacles_per_room=(2, 4), seed=1)
SF2_SPEC = FloorSpec(
    rows=4,
    cols=10,
    room_size=(4.5, 6.0),
    corridor_width=2.2,
    obstacles_per_room=(2, 4),
    obstacle_size=(0.3, 0.9),
    open_doorway_prob=0.08,
    seed=2,
)


# --- files ---------------------------------------------------------------------


def save_environment(out_dir, sg: SceneGraph, grid: OccupancyGrid, spec: FloorSpec | None = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / SCENE_FILE).write_text(dump_scene_graph(sg))
    write_pgm(out / GRID_FILE, grid)
    if spec is not None:
        (out / SPEC_FILE).write_text(json.dumps(spec.to_dict(), indent=1))
    return out


def load_environment(env_dir) -> tuple[SceneGraph, OccupancyGrid]:
    env_dir = Path(env_dir)
    sg = load_scene_graph((env_dir / SCENE_FILE).read_bytes())
    grid = read_pgm(env_dir / GRID_FILE)
    return sg, grid


def write_scenario(path, env_dir, queries: list[dict], **settings) -> Path:
    """Bundle an environment reference, queries, and blockage events into one JSON file."""
    path = Path(path)
    doc = {"schema": "spath-scenario/1", "env": str(env_dir), "queries": queries}
    doc.update(settings)
    path.write_text(json.dumps(doc, indent=1))
    return path
