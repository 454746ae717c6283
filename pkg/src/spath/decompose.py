"""Doorway-to-doorway subproblems, effort heuristic, merging, and time allocation."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace

from spath.geometry import ComposedContour, compose

DEFAULT_THETA = 0.25


@dataclass(frozen=True, eq=False)
class Subproblem:
    index: int
    start: tuple[float, float]
    goal: tuple[float, float]
    contour: ComposedContour
    effort: float = 0.0
    budget: float = 0.0
    cache_key: str = ""
    legs: tuple[int, ...] = ()

    @property
    def area(self) -> float:
        return self.contour.area


@dataclass(frozen=True)
class Decomposition:
    subproblems: tuple[Subproblem, ...]
    total_effort: float
    ttp: float


def effort(start, goal, area: float) -> float:
    return math.dist(start, goal) + math.sqrt(area)


def cache_key(start, goal, labels, doorway_states: dict[str, bool]) -> str:
    """Hash of endpoints, contour members, and the states of member doorways."""
    states = sorted((k, doorway_states[k]) for k in labels if k in doorway_states)
    text = repr((tuple(round(v, 9) for v in start), tuple(round(v, 9) for v in goal), tuple(sorted(labels)), states))
    return hashlib.sha256(text.encode()).hexdigest()[:32]


def decompose(cp, doorway_states: dict[str, bool] | None = None) -> list[Subproblem]:
    """One subproblem per leg of the coarse path."""
    doorway_states = doorway_states or {}
    subs = []
    for i, contour in enumerate(cp.legs):
        a, b = cp.waypoints[i], cp.waypoints[i + 1]
        subs.append(
            Subproblem(
                index=i,
                start=a,
                goal=b,
                contour=contour,
                effort=effort(a, b, contour.area),
                cache_key=cache_key(a, b, contour.labels, doorway_states),
                legs=(i,),
            )
        )
    return subs


def _merge_pair(a: Subproblem, b: Subproblem, doorway_states: dict[str, bool]) -> Subproblem:
    members = a.contour.members + tuple(m for m in b.contour.members if m.label not in a.contour.labels)
    contour = compose(members, a.contour.mask.grid, a.contour.mask.union(b.contour.mask))
    return Subproblem(
        index=a.index,
        start=a.start,
        goal=b.goal,
        contour=contour,
        effort=effort(a.start, b.goal, contour.area),
        cache_key=cache_key(a.start, b.goal, contour.labels, doorway_states),
        legs=a.legs + b.legs,
    )


def merge_small(subs, theta: float = DEFAULT_THETA, doorway_states: dict[str, bool] | None = None, combine=None) -> list[Subproblem]:
    """Fold undersized subproblems into their lower-effort neighbour until none remain.

    A subproblem is undersized when its effort is below ``theta`` times the
    current mean effort. The smallest one is merged first (earliest index on
    ties); equal-effort neighbours resolve to the predecessor. ``combine``
    overrides how two adjacent subproblems are fused (default: union of
    contours, endpoints spanning both, effort recomputed from geometry).
    """
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    doorway_states = doorway_states or {}
    if combine is None:
        def combine(a, b):
            return _merge_pair(a, b, doorway_states)
    subs = list(subs)
    while len(subs) > 1:
        efforts = [s.effort for s in subs]
        threshold = theta * sum(efforts) / len(efforts)
        i = min(range(len(subs)), key=lambda k: (efforts[k], k))
        if efforts[i] >= threshold:
            break
        if i == 0:
            j = 1
        elif i == len(subs) - 1:
            j = i - 1
        else:
            j = i - 1 if efforts[i - 1] <= efforts[i + 1] else i + 1
        lo, hi = min(i, j), max(i, j)
        subs[lo : hi + 1] = [combine(subs[lo], subs[hi])]
    return [replace(s, index=k) for k, s in enumerate(subs)]


def allocate(subs, ttp: float) -> Decomposition:
    """Split the time budget proportionally to effort (equally if all efforts are zero)."""
    if not ttp > 0:
        raise ValueError("ttp must be positive")
    subs = list(subs)
    total = sum(s.effort for s in subs)
    if total > 0:
        budgets = [ttp * s.effort / total for s in subs]
    else:
        budgets = [ttp / len(subs)] * len(subs)
    return Decomposition(tuple(replace(s, budget=b) for s, b in zip(subs, budgets)), total, ttp)
