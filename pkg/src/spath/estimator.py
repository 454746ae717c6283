"""Estimator-style facade: ``fit`` builds the environment once, ``predict`` answers queries."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from spath.decompose import DEFAULT_THETA
from spath.gridmap import OccupancyGrid
from spath.pipeline import CLI_MODES, DEFAULT_MU, MODES, PlanResult, Query, SolutionCache, SubproblemPool, replan, run, setup
from spath.planners import CLOCKS, PLANNERS, PlannerConfig
from spath.scenegraph import SceneGraph


def check_endpoint(p, name: str = "point"):
    """A room id string or a finite 2D point; returns it in canonical form."""
    if isinstance(p, str):
        return p
    arr = np.asarray(p, dtype=float)
    if arr.shape != (2,):
        raise ValueError(f"{name} must be a room id or an (x, y) pair, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return (float(arr[0]), float(arr[1]))


def check_positive(value, name: str):
    if not isinstance(value, numbers.Real) or not value > 0:
        raise ValueError(f"{name} must be a positive number, got {value!r}")
    return float(value)


def check_choice(value, choices, name: str):
    if value not in choices:
        raise ValueError(f"{name} must be one of {sorted(choices)}, got {value!r}")
    return value


class SPathPlanner(BaseEstimator):
    """Metric-semantic planner over one map.

    Parameters mirror the query and planner settings; ``fit(scene_graph, grid)``
    runs the one-time environment setup and ``predict(queries)`` plans each
    ``(start, goal)`` pair. Successful legs are cached across calls so later
    queries and replans can reuse them.
    """

    def __init__(
        self,
        mode="SPATH_SEQ",
        planner="prmstar",
        ttp=1.0,
        seed=0,
        workers=None,
        theta=DEFAULT_THETA,
        mu=DEFAULT_MU,
        robot_radius=0.3,
        clock="cpu",
        steer_step=1.0,
        rewire_gamma=1.0,
        batch_size=100,
        goal_bias=0.05,
    ):
        self.mode = mode
        self.planner = planner
        self.ttp = ttp
        self.seed = seed
        self.workers = workers
        self.theta = theta
        self.mu = mu
        self.robot_radius = robot_radius
        self.clock = clock
        self.steer_step = steer_step
        self.rewire_gamma = rewire_gamma
        self.batch_size = batch_size
        self.goal_bias = goal_bias

    def _validate_params(self):
        check_choice(CLI_MODES.get(self.mode, self.mode), MODES, "mode")
        check_choice(self.planner, PLANNERS, "planner")
        check_choice(self.clock, CLOCKS, "clock")
        check_positive(self.ttp, "ttp")
        check_positive(self.robot_radius, "robot_radius")
        if not 0 < self.theta < 1:
            raise ValueError("theta must lie in (0, 1)")
        if not 0 < self.mu <= 1:
            raise ValueError("mu must lie in (0, 1]")
        if self.workers is not None and (not isinstance(self.workers, numbers.Integral) or self.workers < 1):
            raise ValueError("workers must be a positive integer or None")

    def _planner_config(self) -> PlannerConfig:
        return PlannerConfig(
            kind=self.planner,
            budget=self.ttp,
            robot_radius=self.robot_radius,
            steer_step=self.steer_step,
            rewire_gamma=self.rewire_gamma,
            batch_size=self.batch_size,
            goal_bias=self.goal_bias,
            clock=self.clock,
        )

    def fit(self, scene_graph: SceneGraph, grid: OccupancyGrid):
        self._validate_params()
        if not isinstance(scene_graph, SceneGraph):
            raise TypeError("scene_graph must be a SceneGraph")
        if not isinstance(grid, OccupancyGrid):
            raise TypeError("grid must be an OccupancyGrid")
        scene_graph.validate()
        self.environment_ = setup(scene_graph, grid)
        self.cache_ = SolutionCache()
        self.n_rooms_ = len(scene_graph.rooms)
        self.n_doorways_ = len(scene_graph.doorways)
        return self

    def plan(self, start, goal, seed=None) -> PlanResult:
        check_is_fitted(self, "environment_")
        q = Query(
            check_endpoint(start, "start"),
            check_endpoint(goal, "goal"),
            ttp=self.ttp,
            mode=self.mode,
            planner=self._planner_config(),
            seed=self.seed if seed is None else seed,
            theta=self.theta,
        )
        if q.mode == "SPATH_PAR":
            with SubproblemPool(self.environment_.df, self.workers) as pool:
                return run(self.environment_, q, self.cache_, pool)
        return run(self.environment_, q, self.cache_)

    def predict(self, queries) -> list[PlanResult]:
        """Plan every ``(start, goal)`` pair; query ``i`` uses seed ``seed + i``."""
        check_is_fitted(self, "environment_")
        queries = list(queries)
        for i, pair in enumerate(queries):
            if len(pair) != 2:
                raise ValueError(f"query {i} must be a (start, goal) pair")
        if CLI_MODES.get(self.mode, self.mode) == "SPATH_PAR":
            out = []
            with SubproblemPool(self.environment_.df, self.workers) as pool:
                for i, (s, g) in enumerate(queries):
                    q = Query(check_endpoint(s, "start"), check_endpoint(g, "goal"), self.ttp, self.mode,
                              self._planner_config(), self.seed + i, self.theta)
                    out.append(run(self.environment_, q, self.cache_, pool))
            return out
        return [self.plan(s, g, seed=self.seed + i) for i, (s, g) in enumerate(queries)]

    def replan(self, blocked: str, previous: PlanResult) -> PlanResult:
        """Block a doorway on ``previous``'s route, update the map, and plan around it."""
        check_is_fitted(self, "environment_")
        if blocked not in self.environment_.scene_graph.doorways:
            raise KeyError(f"unknown doorway {blocked!r}")
        res = replan(self.environment_, blocked, previous, self.cache_, mu=self.mu)
        self.environment_ = res.environment
        return res
