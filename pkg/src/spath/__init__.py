"""Metric-semantic path planning over indoor scene graphs."""

from spath.scenegraph import Doorway, Room, SceneGraph, WallPlane, build_semantic_graph, load_scene_graph
from spath.gridmap import OccupancyGrid, distance_field
from spath.pipeline import Environment, Query, PlanResult, SolutionCache, replan, run, setup, stitch
from spath.estimator import SPathPlanner

__all__ = [
    "Doorway",
    "Environment",
    "OccupancyGrid",
    "PlanResult",
    "Query",
    "Room",
    "SPathPlanner",
    "SceneGraph",
    "SolutionCache",
    "WallPlane",
    "build_semantic_graph",
    "distance_field",
    "load_scene_graph",
    "replan",
    "run",
    "setup",
    "stitch",
]

__version__ = "0.1.0"
