import math
from dataclasses import replace

import numpy as np
import pytest

from spath.decompose import Subproblem, allocate, cache_key, decompose, effort, merge_small
from spath.semantic import astar, coarse_path


def _simulate(efforts, theta):
    # Hand rule: while some effort is below theta * mean, fold the smallest
    # (earliest on ties) into its cheaper neighbour (predecessor on ties).
    groups = [[i] for i in range(len(efforts))]
    e = list(efforts)
    while len(e) > 1:
        mean = sum(e) / len(e)
        small = [k for k in range(len(e)) if e[k] < theta * mean]
        if not small:
            break
        i = min(small, key=lambda k: (e[k], k))
        neighbours = [k for k in (i - 1, i + 1) if 0 <= k < len(e)]
        j = min(neighbours, key=lambda k: (e[k], k))
        lo, hi = sorted((i, j))
        e[lo : hi + 1] = [e[lo] + e[hi]]
        groups[lo : hi + 1] = [groups[lo] + groups[hi]]
    return e, groups


def _stub(i, e):
    return Subproblem(index=i, start=(0.0, 0.0), goal=(0.0, 0.0), contour=None, effort=e, legs=(i,))


def _sum(a, b):
    return replace(a, effort=a.effort + b.effort, legs=a.legs + b.legs)


def test_merge_small_matches_hand_rule():
    rng = np.random.default_rng(3)
    for _ in range(100):
        n = int(rng.integers(1, 12))
        efforts = list(rng.choice([0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0], size=n))
        theta = float(rng.choice([0.1, 0.25, 0.5, 0.9]))
        out = merge_small([_stub(i, e) for i, e in enumerate(efforts)], theta, combine=_sum)
        want_e, want_groups = _simulate(efforts, theta)
        assert [s.effort for s in out] == pytest.approx(want_e)
        assert [list(s.legs) for s in out] == want_groups
        assert [s.index for s in out] == list(range(len(out)))


def test_merge_small_keeps_balanced_legs():
    subs = [_stub(i, 5.0) for i in range(4)]
    assert len(merge_small(subs, 0.25, combine=_sum)) == 4
    with pytest.raises(ValueError):
        merge_small(subs, 1.5)


def test_allocate_proportional():
    d = allocate([_stub(0, 1.0), _stub(1, 3.0)], 2.0)
    assert [s.budget for s in d.subproblems] == pytest.approx([0.5, 1.5])
    assert d.total_effort == 4.0
    d0 = allocate([_stub(0, 0.0), _stub(1, 0.0)], 1.0)
    assert [s.budget for s in d0.subproblems] == [0.5, 0.5]
    with pytest.raises(ValueError):
        allocate([_stub(0, 1.0)], 0.0)


def test_effort_formula():
    assert effort((0, 0), (3, 4), 16.0) == pytest.approx(9.0)


def test_cache_key_sensitivity():
    k = cache_key((1.0, 2.0), (3.0, 4.0), ("D1", "R1", "D2"), {"D1": True, "D2": True})
    assert k == cache_key((1.0, 2.0), (3.0, 4.0), ("R1", "D2", "D1"), {"D1": True, "D2": True, "D9": False})
    assert k == cache_key((1.0 + 1e-12, 2.0), (3.0, 4.0), ("D1", "R1", "D2"), {"D1": True, "D2": True})
    assert k != cache_key((1.0, 2.0), (3.0, 4.1), ("D1", "R1", "D2"), {"D1": True, "D2": True})
    assert k != cache_key((1.0, 2.0), (3.0, 4.0), ("D1", "R1", "D2"), {"D1": True, "D2": False})
    assert k != cache_key((1.0, 2.0), (3.0, 4.0), ("D1", "R2", "D2"), {"D1": True, "D2": True})
    assert len(k) == 32


def test_decompose_legs_share_doorways(chain3_env):
    env = chain3_env
    rooms = sorted(env.scene_graph.rooms)
    sp = astar(env.semantic_graph, rooms[0], rooms[-1])
    p_s = tuple(env.scene_graph.rooms[rooms[0]].centroid[:2])
    p_g = tuple(env.scene_graph.rooms[rooms[-1]].centroid[:2])
    cp = coarse_path(sp, p_s, p_g, env.scene_graph, env.contours, env.masks, env.grid)
    subs = decompose(cp, env.scene_graph.doorway_states())
    assert len(subs) == 3
    for a, b in zip(subs, subs[1:]):
        assert a.goal == b.start
        shared = set(a.contour.labels) & set(b.contour.labels)
        assert len(shared) == 1 and next(iter(shared)).startswith("D")
    for s in subs:
        assert s.effort == pytest.approx(math.dist(s.start, s.goal) + math.sqrt(s.area))
    merged = merge_small(subs, 0.9, env.scene_graph.doorway_states())
    assert len(merged) <= len(subs)
    whole = merge_small(subs, 0.25, env.scene_graph.doorway_states())
    assert [s.cache_key for s in whole] == [s.cache_key for s in subs]


def test_merge_examples():
    out = merge_small([_stub(i, e) for i, e in enumerate([10, 2, 6])], 0.5, combine=_sum)
    assert [s.effort for s in out] == [10, 8]
    for theta in (0.1, 0.5, 0.99):
        assert len(merge_small([_stub(i, 3.0) for i in range(5)], theta, combine=_sum)) == 5
    efforts = [1, 1, 1, 30]
    out = merge_small([_stub(i, e) for i, e in enumerate(efforts)], 0.5, combine=_sum)
    want, groups = _simulate(efforts, 0.5)
    assert [s.effort for s in out] == want == [33]
    assert [list(s.legs) for s in out] == groups


def test_allocate_examples():
    assert [s.budget for s in allocate([_stub(0, 1), _stub(1, 3)], 4.0).subproblems] == [1.0, 3.0]
    assert allocate([_stub(0, 7)], 2.5).subproblems[0].budget == 2.5
    rng = np.random.default_rng(0)
    for _ in range(100):
        e = rng.uniform(0, 10, int(rng.integers(1, 10)))
        ttp = float(rng.uniform(0.001, 6))
        d = allocate([_stub(i, x) for i, x in enumerate(e)], ttp)
        assert sum(s.budget for s in d.subproblems) == pytest.approx(ttp, rel=1e-12)


def test_effort_zero_distance():
    assert effort((1, 1), (1, 1), 4.0) == 2.0


def _coarse(env, a, b, p_s=None, p_g=None):
    sp = astar(env.semantic_graph, a, b)
    rooms = env.scene_graph.rooms
    p_s = p_s or tuple(rooms[a].centroid[:2])
    p_g = p_g or tuple(rooms[b].centroid[:2])
    return coarse_path(sp, p_s, p_g, env.scene_graph, env.contours, env.masks, env.grid)


def test_decompose_counts_and_identity(square_env, two_rooms_env):
    one = decompose(_coarse(two_rooms_env, "A", "A", (1, 1), (4, 3)))
    assert len(one) == 1 and (one[0].start, one[0].goal) == ((1.0, 1.0), (4.0, 3.0))
    cp = _coarse(square_env, "R0_0", "R2_2")
    assert len(cp.waypoints) == 6
    subs = decompose(cp)
    assert len(subs) == 5
    assert all(s.contour is c for s, c in zip(subs, cp.legs))
    for s in subs:
        assert s.area == pytest.approx(s.contour.mask.member.sum() * square_env.grid.cell_area)
        assert s.effort == pytest.approx(math.dist(s.start, s.goal) + math.sqrt(s.area))
