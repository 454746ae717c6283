"""End-to-end query execution: setup, semantic search, decomposition, solving, stitching, replanning."""

from __future__ import annotations

import math
import os
import threading
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
import multiprocessing as mp

import numpy as np

from spath.decompose import DEFAULT_THETA, Decomposition, Subproblem, allocate, decompose, merge_small
from spath.geometry import ConvexPolygon, compose, doorway_contour, room_contour
from spath.gridmap import CellMask, DistanceField, OccupancyGrid, distance_field, rasterize, segment_valid
from spath.planners import GeometricPath, PlannerConfig, PlannerError, PlanStats, plan
from spath.rng import derive_seed
from spath.scenegraph import SceneGraph, SemanticGraph, build_semantic_graph, set_doorway_state
from spath.semantic import CoarsePath, SemanticPath, astar, coarse_path, leg_labels, locate, render_instructions

MODES = ("I", "II", "III", "SPATH_SEQ", "SPATH_PAR")
CLI_MODES = {
    "baseline": "I",
    "restricted": "II",
    "decomposed": "III",
    "spath-seq": "SPATH_SEQ",
    "spath-par": "SPATH_PAR",
}
DEFAULT_MU = 0.5
JUNCTION_TOL = 1e-6


class StitchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Environment:
    scene_graph: SceneGraph
    semantic_graph: SemanticGraph
    room_contours: dict
    doorway_contours: dict
    grid: OccupancyGrid
    df: DistanceField
    masks: dict

    @property
    def contours(self) -> dict:
        return {**self.room_contours, **self.doorway_contours}

    def __eq__(self, other):
        if not isinstance(other, Environment):
            return NotImplemented
        return (
            self.scene_graph == other.scene_graph
            and self.grid == other.grid
            and self.contours == other.contours
            and all(self.masks[k] == other.masks[k] for k in self.masks)
        )


def _label_mask(poly: ConvexPolygon, grid: OccupancyGrid) -> CellMask:
    try:
        return rasterize([poly], grid)
    except Exception:
        # Very thin quads may contain no cell centre; keep the cell under the centroid.
        cx, cy = poly.vertices.mean(axis=0)
        iy, ix = grid.cell_of((cx, cy))
        member = np.zeros(grid.shape, dtype=bool)
        member[iy, ix] = True
        return CellMask(grid, member)


def setup(sg: SceneGraph, grid: OccupancyGrid, df: DistanceField | None = None) -> Environment:
    """Contours, per-contour cell masks, semantic graph, and distance field for one map."""
    rooms = {rid: room_contour(room) for rid, room in sg.rooms.items()}
    doors = {
        did: doorway_contour(d, rooms[d.connects[0]], rooms[d.connects[1]])
        for did, d in sg.doorways.items()
    }
    masks = {k: _label_mask(p, grid) for k, p in {**rooms, **doors}.items()}
    return Environment(
        scene_graph=sg,
        semantic_graph=build_semantic_graph(sg),
        room_contours=rooms,
        doorway_contours=doors,
        grid=grid,
        df=df if df is not None else distance_field(grid),
        masks=masks,
    )


def block_doorway(env: Environment, doorway_id: str) -> Environment:
    """Mark a doorway untraversable in the scene graph and occupy its gap in the grid."""
    sg = set_doorway_state(env.scene_graph, doorway_id, False)
    occ = env.grid.occupied | env.masks[doorway_id].member
    grid = env.grid.with_occupied(occ)
    return replace(env, scene_graph=sg, semantic_graph=build_semantic_graph(sg), grid=grid, df=distance_field(grid))


@dataclass(frozen=True)
class Query:
    start: object
    goal: object
    ttp: float = 1.0
    mode: str = "SPATH_SEQ"
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    seed: int = 0
    theta: float = DEFAULT_THETA

    def __post_init__(self):
        if not self.ttp > 0:
            raise ValueError("ttp must be positive")
        mode = CLI_MODES.get(self.mode, self.mode)
        if mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        object.__setattr__(self, "mode", mode)

    def with_(self, **kw) -> "Query":
        return replace(self, **kw)


@dataclass(frozen=True)
class LegResult:
    index: int
    labels: tuple[str, ...]
    start: tuple[float, float]
    goal: tuple[float, float]
    effort: float
    budget: float
    cache_key: str
    path: GeometricPath
    cache_hit: bool = False
    solve_time: float = 0.0


@dataclass(frozen=True, eq=False)
class PlanResult:
    query: Query
    path: GeometricPath
    semantic: SemanticPath
    legs: tuple[LegResult, ...]
    decomposition: Decomposition | None = None
    wall_time: float = 0.0
    solve_wall_time: float = 0.0
    start_point: tuple[float, float] = (0.0, 0.0)
    goal_point: tuple[float, float] = (0.0, 0.0)
    environment: Environment | None = None

    @property
    def success(self) -> bool:
        return bool(self.legs) and all(leg.path.solved for leg in self.legs)

    @property
    def cpu_time(self) -> float:
        return float(sum(leg.solve_time for leg in self.legs))

    @property
    def cache_hits(self) -> int:
        return sum(leg.cache_hit for leg in self.legs)

    @property
    def planner_invocations(self) -> int:
        return sum(not leg.cache_hit for leg in self.legs)

    @property
    def instructions(self) -> list[str]:
        return render_instructions(self.semantic)


class SolutionCache:
    """Successful leg solutions keyed by endpoints, contour labels, and doorway states."""

    def __init__(self):
        self._data: dict[str, GeometricPath] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def __len__(self):
        return len(self._data)

    def __contains__(self, key):
        return key in self._data

    def get(self, key: str) -> GeometricPath | None:
        with self._lock:
            hit = self._data.get(key)
            if hit is None:
                self.misses += 1
            else:
                self.hits += 1
            return hit

    def put(self, key: str, path: GeometricPath) -> None:
        if not path.solved:
            return
        with self._lock:
            self._data[key] = path

    def discard(self, key: str) -> None:
        with self._lock:
            self._data.pop(key, None)

    @classmethod
    def from_result(cls, result: "PlanResult") -> "SolutionCache":
        cache = cls()
        for leg in result.legs:
            if leg.cache_key and leg.path.solved:
                cache.put(leg.cache_key, leg.path)
        return cache


def stitch(legs) -> GeometricPath:
    """Concatenate leg paths at shared junctions; the length is the sum of leg lengths."""
    legs = list(legs)
    if not legs:
        raise StitchError("nothing to stitch")
    if len(legs) == 1:
        return legs[0]
    pts = list(legs[0].waypoints)
    for i, leg in enumerate(legs[1:], start=1):
        if not leg.waypoints or not pts:
            raise StitchError(f"leg {i} has no waypoints")
        gap = math.dist(pts[-1], leg.waypoints[0])
        if gap > JUNCTION_TOL:
            raise StitchError(f"junction mismatch of {gap:.3g} m before leg {i}")
        pts.extend(leg.waypoints[1:])
    stats = PlanStats(
        samples=sum(l.stats.samples for l in legs),
        validity_checks=sum(l.stats.validity_checks for l in legs),
        iterations=sum(l.stats.iterations for l in legs),
        elapsed=sum(l.stats.elapsed for l in legs),
    )
    return GeometricPath(tuple(pts), float(sum(l.length for l in legs)), stats)


# --- worker pool ----------------------------------------------------------------

_WORKER_DF: DistanceField | None = None


def _worker_init(df):
    global _WORKER_DF
    _WORKER_DF = df


def _worker_ping():
    return os.getpid()


def _worker_solve(start, goal, indices, cfg):
    df = _WORKER_DF
    mask = CellMask.from_indices(df.grid, indices) if indices is not None else None
    return plan(start, goal, mask, df, cfg)


class SubproblemPool:
    """Process pool bound to one distance field; workers are forked and warmed up front."""

    def __init__(self, df: DistanceField, workers: int | None = None):
        self.df = df
        self.workers = workers or os.cpu_count() or 1
        ctx = mp.get_context("fork")
        self._ex = ProcessPoolExecutor(self.workers, mp_context=ctx, initializer=_worker_init, initargs=(df,))
        for f in [self._ex.submit(_worker_ping) for _ in range(self.workers)]:
            f.result()

    def submit(self, start, goal, mask: CellMask | None, cfg: PlannerConfig):
        idx = None if mask is None else mask.indices.astype(np.int32)
        return self._ex.submit(_worker_solve, start, goal, idx, cfg)

    def close(self):
        self._ex.shutdown(wait=True)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# --- query execution ----------------------------------------------------------


def resolve_point(env: Environment, p) -> tuple[float, float]:
    if isinstance(p, str):
        if p not in env.scene_graph.rooms:
            raise KeyError(f"unknown room {p!r}")
        c = env.scene_graph.rooms[p].centroid
        return (float(c[0]), float(c[1]))
    return (float(p[0]), float(p[1]))


def _revalidate(path: GeometricPath, mask: CellMask, env: Environment, radius: float) -> bool:
    pts = path.waypoints
    if not pts:
        return False
    if len(pts) == 1:
        return segment_valid(pts[0], pts[0], radius, env.df, mask)
    return all(segment_valid(a, b, radius, env.df, mask) for a, b in zip(pts, pts[1:]))


def _leg_cfg(q: Query, index: int, budget: float) -> PlannerConfig:
    return q.planner.with_(budget=budget, seed=derive_seed(q.seed, index))


def _solve_legs(env, q, subs, cache, pool) -> list[LegResult]:
    use_cache = cache is not None and q.mode in ("SPATH_SEQ", "SPATH_PAR")
    results: list[LegResult | None] = [None] * len(subs)
    pending = []
    for i, s in enumerate(subs):
        cfg = _leg_cfg(q, s.index, s.budget)
        if use_cache:
            t0 = time.thread_time()
            hit = cache.get(s.cache_key)
            if hit is not None and _revalidate(hit, s.contour.mask, env, cfg.robot_radius):
                spent = 0.0 if cfg.clock == "work" else time.thread_time() - t0
                results[i] = _leg(s, hit, True, spent)
                continue
            if hit is not None:
                cache.discard(s.cache_key)
        pending.append((i, s, cfg))
    if q.mode == "SPATH_PAR" and pending:
        owned = pool is None
        if owned:
            pool = SubproblemPool(env.df)
        try:
            futs = [(i, s, pool.submit(s.start, s.goal, s.contour.mask, cfg)) for i, s, cfg in pending]
            for i, s, f in futs:
                path = f.result()
                results[i] = _leg(s, path, False, path.stats.elapsed)
        finally:
            if owned:
                pool.close()
    else:
        for i, s, cfg in pending:
            path = plan(s.start, s.goal, s.contour.mask, env.df, cfg)
            results[i] = _leg(s, path, False, path.stats.elapsed)
    if use_cache:
        for r in results:
            if not r.cache_hit:
                cache.put(r.cache_key, r.path)
    return results


def _leg(s: Subproblem, path: GeometricPath, hit: bool, spent: float) -> LegResult:
    return LegResult(
        index=s.index,
        labels=s.contour.labels,
        start=s.start,
        goal=s.goal,
        effort=s.effort,
        budget=s.budget,
        cache_key=s.cache_key,
        path=path,
        cache_hit=hit,
        solve_time=spent,
    )


def _finish(q, env, sp, legs, decomposition, t0, t_solve, p_s, p_g) -> PlanResult:
    ok = all(leg.path.solved for leg in legs)
    path = stitch([leg.path for leg in legs]) if ok else GeometricPath.failure()
    return PlanResult(
        query=q,
        path=path,
        semantic=sp,
        legs=tuple(legs),
        decomposition=decomposition,
        wall_time=time.perf_counter() - t0,
        solve_wall_time=t_solve,
        start_point=p_s,
        goal_point=p_g,
        environment=env,
    )


def run(env: Environment, q: Query, cache: SolutionCache | None = None, pool: SubproblemPool | None = None) -> PlanResult:
    """Execute one query under the ablation named by ``q.mode``."""
    t0 = time.perf_counter()
    p_s, p_g = resolve_point(env, q.start), resolve_point(env, q.goal)
    sg = env.scene_graph
    r_s = locate(p_s, sg, env.room_contours, env.doorway_contours)
    r_g = locate(p_g, sg, env.room_contours, env.doorway_contours)
    sp = astar(env.semantic_graph, r_s, r_g)
    return _execute(env, q, sp, p_s, p_g, cache, pool, t0)


def _execute(env, q, sp, p_s, p_g, cache, pool, t0, start_doorway=None) -> PlanResult:
    if q.mode in ("I", "II"):
        labels = () if q.mode == "I" else tuple(dict.fromkeys(((start_doorway,) if start_doorway else ()) + sp.nodes))
        mask = None
        if labels:
            mask = env.masks[labels[0]]
            for k in labels[1:]:
                mask = mask.union(env.masks[k])
        t1 = time.perf_counter()
        cfg = _leg_cfg(q, 0, q.ttp)
        path = plan(p_s, p_g, mask, env.df, cfg)
        t_solve = time.perf_counter() - t1
        area = mask.area if mask is not None else env.grid.occupied.size * env.grid.cell_area
        leg = LegResult(0, labels, p_s, p_g, math.dist(p_s, p_g) + math.sqrt(area), q.ttp, "", path, False, path.stats.elapsed)
        return _finish(q, env, sp, [leg], None, t0, t_solve, p_s, p_g)

    cp = coarse_path(sp, p_s, p_g, env.scene_graph, env.contours, env.masks, env.grid)
    if start_doorway is not None:
        cp = _prepend_doorway(cp, start_doorway, env)
    states = env.scene_graph.doorway_states()
    subs = merge_small(decompose(cp, states), q.theta, states)
    dec = allocate(subs, q.ttp)
    t1 = time.perf_counter()
    legs = _solve_legs(env, q, dec.subproblems, cache, pool)
    t_solve = time.perf_counter() - t1
    return _finish(q, env, sp, legs, dec, t0, t_solve, p_s, p_g)


def _prepend_doorway(cp: CoarsePath, did: str, env: Environment) -> CoarsePath:
    """Widen the first leg (and the region) with the doorway the query starts in."""
    def widen(c):
        if did in c.labels:
            return c
        members = (env.doorway_contours[did],) + c.members
        return compose(members, env.grid, c.mask.union(env.masks[did]))

    legs = (widen(cp.legs[0]),) + cp.legs[1:]
    return CoarsePath(cp.waypoints, widen(cp.region), legs, cp.semantic)


def discount_edges(g: SemanticGraph, route: SemanticPath, mu: float = DEFAULT_MU) -> SemanticGraph:
    """Scale the finite weights of edges on ``route`` by ``mu``; blocked edges stay infinite."""
    updates = {}
    for e in route.edges():
        a, b = tuple(e)
        w = g.weight(a, b)
        if math.isfinite(w):
            updates[e] = w * mu
    return g.with_weights(updates)


def replan(
    env: Environment,
    blocked: str,
    prev: PlanResult,
    cache: SolutionCache | None,
    q: Query | None = None,
    mu: float = DEFAULT_MU,
    pool: SubproblemPool | None = None,
) -> PlanResult:
    """Re-plan after ``blocked`` is found closed, reusing cached leg solutions.

    The returned result carries the updated environment in ``.environment``.
    """
    t0 = time.perf_counter()
    q = q or prev.query
    nodes = prev.semantic.nodes
    if blocked not in nodes:
        raise ValueError(f"doorway {blocked!r} is not on the previous semantic path")
    if not 0 < mu <= 1:
        raise ValueError("mu must lie in (0, 1]")
    if env.scene_graph.doorways[blocked].traversable:
        env = block_doorway(env, blocked)
    k = nodes.index(blocked)
    start_room = nodes[k - 1]
    start_doorway = nodes[k - 2] if k >= 2 else None
    if start_doorway is not None:
        c = env.scene_graph.doorways[start_doorway].centroid
        p_s = (float(c[0]), float(c[1]))
    else:
        p_s = prev.start_point
    p_g = prev.goal_point
    g = env.semantic_graph
    sp = astar(discount_edges(g, prev.semantic, mu), start_room, nodes[-1])
    # Report the true (undiscounted) length of the new route.
    true_w = sum(g.weight(a, b) for a, b in zip(sp.nodes, sp.nodes[1:]))
    sp = SemanticPath(sp.nodes, true_w)
    q = q.with_(start=p_s, goal=p_g)
    return _execute(env, q, sp, p_s, p_g, cache, pool, t0, start_doorway=start_doorway)


# --- serialization ----------------------------------------------------------------


def _stats_dict(s: PlanStats) -> dict:
    return {
        "samples": s.samples,
        "validity_checks": s.validity_checks,
        "iterations": s.iterations,
        "solved_at": s.solved_at,
        "elapsed": s.elapsed,
    }


def _num(x: float):
    return x if math.isfinite(x) else None


def result_to_dict(res: PlanResult, env_dir: str | None = None) -> dict:
    q = res.query
    return {
        "schema": "spath-result/1",
        "env": env_dir,
        "query": {
            "start": q.start if isinstance(q.start, str) else list(q.start),
            "goal": q.goal if isinstance(q.goal, str) else list(q.goal),
            "ttp": q.ttp,
            "mode": q.mode,
            "seed": q.seed,
            "theta": q.theta,
            "planner": asdict(q.planner),
        },
        "start_point": list(res.start_point),
        "goal_point": list(res.goal_point),
        "success": res.success,
        "length": _num(res.path.length),
        "waypoints": [list(p) for p in res.path.waypoints],
        "semantic_path": list(res.semantic.nodes),
        "semantic_weight": _num(res.semantic.total_weight),
        "instructions": res.instructions,
        "wall_time": res.wall_time,
        "solve_wall_time": res.solve_wall_time,
        "cpu_time": res.cpu_time,
        "cache_hits": res.cache_hits,
        "planner_invocations": res.planner_invocations,
        "legs": [
            {
                "index": leg.index,
                "labels": list(leg.labels),
                "start": list(leg.start),
                "goal": list(leg.goal),
                "effort": leg.effort,
                "budget": leg.budget,
                "cache_key": leg.cache_key,
                "cache_hit": leg.cache_hit,
                "solved": leg.path.solved,
                "length": _num(leg.path.length),
                "solve_time": leg.solve_time,
                "waypoints": [list(p) for p in leg.path.waypoints],
                "stats": _stats_dict(leg.path.stats),
            }
            for leg in res.legs
        ],
    }


def result_from_dict(doc: dict) -> PlanResult:
    """Rebuild enough of a result to replan from it (paths, legs, semantic route, query)."""
    qd = doc["query"]
    conv = lambda v: v if isinstance(v, str) else tuple(v)  # noqa: E731
    q = Query(
        start=conv(qd["start"]),
        goal=conv(qd["goal"]),
        ttp=qd["ttp"],
        mode=qd["mode"],
        seed=qd["seed"],
        theta=qd.get("theta", DEFAULT_THETA),
        planner=PlannerConfig(**qd["planner"]),
    )
    legs = []
    for ld in doc["legs"]:
        s = ld.get("stats", {})
        stats = PlanStats(
            samples=s.get("samples", 0),
            validity_checks=s.get("validity_checks", 0),
            iterations=s.get("iterations", 0),
            solved_at=s.get("solved_at"),
            elapsed=s.get("elapsed", 0.0),
        )
        path = GeometricPath.from_points(ld["waypoints"], stats) if ld["solved"] else GeometricPath.failure(stats)
        legs.append(
            LegResult(
                ld["index"], tuple(ld["labels"]), tuple(ld["start"]), tuple(ld["goal"]), ld["effort"],
                ld["budget"], ld["cache_key"], path, ld["cache_hit"], ld["solve_time"],
            )
        )
    ok = doc["success"]
    path = GeometricPath.from_points(doc["waypoints"]) if ok else GeometricPath.failure()
    w = doc.get("semantic_weight")
    return PlanResult(
        query=q,
        path=path,
        semantic=SemanticPath(tuple(doc["semantic_path"]), math.inf if w is None else w),
        legs=tuple(legs),
        wall_time=doc.get("wall_time", 0.0),
        solve_wall_time=doc.get("solve_wall_time", 0.0),
        start_point=tuple(doc["start_point"]),
        goal_point=tuple(doc["goal_point"]),
    )
