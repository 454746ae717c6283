from __future__ import annotations

import heapq
import math

from spath.planners.base import NodeStore, Recorder, Space, gamma_star


class _DisjointSet:
    def __init__(self):
        self.parent: list[int] = []

    def add(self) -> None:
        self.parent.append(len(self.parent))

    def find(self, i: int) -> int:
        p = self.parent
        while p[i] != i:
            p[i] = p[p[i]]
            i = p[i]
        return i

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _shortest(adj, nodes: NodeStore, clock, src: int = 0, dst: int = 1):
    xy = nodes.xy
    gx, gy = xy[dst]
    g = {src: 0.0}
    prev = {src: -1}
    heap = [(math.hypot(xy[src, 0] - gx, xy[src, 1] - gy), src)]
    done = set()
    while heap:
        _, v = heapq.heappop(heap)
        if v in done:
            continue
        done.add(v)
        clock.charge("vertex")
        if v == dst:
            break
        gv = g[v]
        clock.charge("relax", len(adj[v]))
        for u, w in adj[v]:
            c = gv + w
            if c < g.get(u, math.inf):
                g[u] = c
                prev[u] = v
                heapq.heappush(heap, (c + math.hypot(xy[u, 0] - gx, xy[u, 1] - gy), u))
    if dst not in done:
        return math.inf, None
    path = []
    v = dst
    while v >= 0:
        path.append(nodes.point(v))
        v = prev[v]
    return g[dst], path[::-1]


def plan_prm_star(start, goal, space: Space, cfg, recorder: Recorder) -> int:
    """Incremental PRM* with radius-based connections and periodic path extraction."""
    clock = space.clock
    nodes = NodeStore(clock)
    adj: list[list[tuple[int, float]]] = []
    ds = _DisjointSet()
    gamma = gamma_star(space.area, cfg.rewire_gamma)
    connected = False

    def insert(p):
        nonlocal connected
        i = nodes.add(p)
        adj.append([])
        ds.add()
        n = nodes.n
        if n == 1:
            return
        r = gamma * math.sqrt(math.log(n) / n)
        near = [int(j) for j in nodes.within(p, r) if j != i]
        if not near:
            return
        ok = space.edges_valid(p, nodes.xy[near])
        for j, good in zip(near, ok):
            if good:
                w = math.hypot(nodes.xy[j, 0] - p[0], nodes.xy[j, 1] - p[1])
                adj[i].append((j, w))
                adj[j].append((i, w))
                ds.union(i, j)
        if not connected and ds.find(0) == ds.find(1):
            connected = True
            extract()

    def extract():
        c, path = _shortest(adj, nodes, clock)
        if path is not None:
            recorder.offer(c, lambda: path)

    insert(start)
    insert(goal)
    iterations = 0
    since = 0
    while not clock.exhausted():
        iterations += 1
        clock.charge("iteration")
        q = space.sample()
        since += 1
        if space.point_valid(q):
            insert(q)
        if connected and since >= cfg.extract_interval:
            since = 0
            extract()
    return iterations
