"""Native anytime sampling-based planners over a masked planar state space."""

from __future__ import annotations

from spath.gridmap import CellMask, DistanceField
from spath.planners.base import (
    CLOCKS,
    PLANNERS,
    WORK_COSTS,
    Clock,
    GeometricPath,
    PlanStats,
    PlannerConfig,
    PlannerError,
    Recorder,
    Space,
    path_length,
)
from spath.planners.bitstar import plan_bit_star
from spath.planners.prmstar import plan_prm_star
from spath.planners.rrtstar import plan_rrt_star
from spath.rng import XorShift64Star

_DISPATCH = {
    "rrtstar": plan_rrt_star,
    "prmstar": plan_prm_star,
    "bitstar": plan_bit_star,
}


def plan(start, goal, region: CellMask | None, df: DistanceField, cfg: PlannerConfig) -> GeometricPath:
    """Best path found within ``cfg.budget``; a failure value (not an error) on timeout.

    Raises ``PlannerError`` when ``start`` or ``goal`` is not a valid state.
    """
    start = (float(start[0]), float(start[1]))
    goal = (float(goal[0]), float(goal[1]))
    clock = Clock(cfg.clock, cfg.budget)
    space = Space(df, region, cfg.robot_radius, XorShift64Star(cfg.seed), clock)
    for name, p in (("start", start), ("goal", goal)):
        if not space.point_valid(p):
            raise PlannerError(f"{name} {p} is not a valid state")
    recorder = Recorder(clock)
    if start == goal:
        recorder.offer(0.0 - 1.0, lambda: [start])
        return recorder.result(space, 0)
    iterations = _DISPATCH[cfg.kind](start, goal, space, cfg, recorder)
    return recorder.result(space, iterations)


__all__ = [
    "CLOCKS",
    "PLANNERS",
    "WORK_COSTS",
    "GeometricPath",
    "PlanStats",
    "PlannerConfig",
    "PlannerError",
    "path_length",
    "plan",
]
