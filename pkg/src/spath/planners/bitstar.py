from __future__ import annotations

import heapq
import math

import numpy as np

from spath.planners.base import Recorder, Space, gamma_star


class _States:
    """All states (tree vertices and free samples) in one growable array."""

    def __init__(self, clock, start, goal):
        self.start = start
        self.goal = goal
        self.ghat = np.empty(1024)
        self.hhat = np.empty(1024)
        self.xy = np.empty((1024, 2))
        self.n = 0
        self.alive = np.zeros(1024, dtype=bool)
        self.tree = np.zeros(1024, dtype=bool)
        self.clock = clock

    def add(self, p, in_tree: bool) -> int:
        if self.n == len(self.xy):
            grow = len(self.xy)
            self.xy = np.concatenate([self.xy, np.empty((grow, 2))])
            self.alive = np.concatenate([self.alive, np.zeros(grow, dtype=bool)])
            self.tree = np.concatenate([self.tree, np.zeros(grow, dtype=bool)])
            self.ghat = np.concatenate([self.ghat, np.empty(grow)])
            self.hhat = np.concatenate([self.hhat, np.empty(grow)])
        i = self.n
        self.ghat[i] = math.hypot(p[0] - self.start[0], p[1] - self.start[1])
        self.hhat[i] = math.hypot(p[0] - self.goal[0], p[1] - self.goal[1])
        self.xy[i] = p
        self.alive[i] = True
        self.tree[i] = in_tree
        self.n += 1
        return i

    def within(self, i: int, r: float):
        """Indices and distances of live samples and live tree vertices within ``r`` of state ``i``."""
        n = self.n
        self.clock.charge("neighbor", n)
        d = self.xy[:n] - self.xy[i]
        dist = np.sqrt(d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1])
        hit = (dist <= r) & self.alive[:n]
        hit[i] = False
        tree = self.tree[:n]
        s = np.flatnonzero(hit & ~tree)
        v = np.flatnonzero(hit & tree)
        return s, dist[s], v, dist[v]


def _ellipse_sample(rng, start, goal, c_best, c_min):
    """Uniform point in the prolate ellipse with foci start, goal and transverse diameter c_best."""
    a = 0.5 * c_best
    b = 0.5 * math.sqrt(max(c_best * c_best - c_min * c_min, 0.0))
    r = math.sqrt(rng.random())
    th = 2.0 * math.pi * rng.random()
    x, y = a * r * math.cos(th), b * r * math.sin(th)
    cx, cy = 0.5 * (start[0] + goal[0]), 0.5 * (start[1] + goal[1])
    ang = math.atan2(goal[1] - start[1], goal[0] - start[0])
    ca, sa = math.cos(ang), math.sin(ang)
    return (cx + ca * x - sa * y, cy + sa * x + ca * y)


def plan_bit_star(start, goal, space: Space, cfg, recorder: Recorder) -> int:
    """Batch Informed Trees.

    The first batch holds only the goal with an unbounded radius, so an
    obstacle-free direct edge is found without drawing any random sample;
    a solution whose cost equals the straight-line distance ends the search.
    """
    clock = space.clock
    rng = space.rng
    S = _States(clock, start, goal)
    s_i = S.add(start, True)
    g_i = S.add(goal, False)
    sx, sy = start
    gx, gy = goal
    c_min = math.hypot(gx - sx, gy - sy)
    g_cost = {s_i: 0.0}
    parent = {s_i: -1}
    children: dict[int, set] = {s_i: set()}
    c_best = math.inf

    def g_hat(i):
        return S.ghat[i]

    def h_hat(i):
        return S.hhat[i]

    def c_hat(i, j):
        return math.hypot(S.xy[i, 0] - S.xy[j, 0], S.xy[i, 1] - S.xy[j, 1])

    def gt(i):
        return g_cost.get(i, math.inf)

    def path_to(i):
        pts = []
        while i >= 0:
            pts.append(S.xy[i].tolist())
            i = parent[i]
        return pts[::-1]

    qv: list = []
    qe: list = []
    old: set = set()
    radius = math.inf
    first = True
    iterations = 0

    def informed_area():
        if not math.isfinite(c_best):
            return space.area
        a = 0.5 * c_best
        b = 0.5 * math.sqrt(max(c_best * c_best - c_min * c_min, 0.0))
        return min(space.area, math.pi * a * b)

    def draw(m):
        use_ellipse = math.isfinite(c_best) and math.pi * 0.25 * c_best * math.sqrt(
            max(c_best * c_best - c_min * c_min, 0.0)
        ) < space.area
        added = 0
        attempts = 0
        while added < m and attempts < 50 * m and not clock.exhausted():
            attempts += 1
            if use_ellipse:
                space.samples += 1
                clock.charge("sample")
                p = _ellipse_sample(rng, start, goal, c_best, c_min)
            else:
                p = space.sample()
                if math.isfinite(c_best):
                    f = math.hypot(p[0] - sx, p[1] - sy) + math.hypot(p[0] - gx, p[1] - gy)
                    if f >= c_best:
                        continue
            if space.point_valid(p):
                S.add(p, False)
                added += 1

    def prune():
        n = S.n
        clock.charge("neighbor", n)
        xy = S.xy[:n]
        f = np.hypot(xy[:, 0] - sx, xy[:, 1] - sy) + np.hypot(xy[:, 0] - gx, xy[:, 1] - gy)
        samples = S.alive[:n] & ~S.tree[:n]
        drop = samples & (f >= c_best)
        drop[g_i] = False
        S.alive[:n][drop] = False
        bad = np.flatnonzero(S.alive[:n] & S.tree[:n] & (f > c_best + 1e-9))
        for v in bad:
            v = int(v)
            if not S.alive[v] or not S.tree[v]:
                continue
            stack = [v]
            while stack:
                k = stack.pop()
                stack.extend(children.pop(k, ()))
                p = parent.pop(k, -1)
                if p >= 0 and p in children:
                    children[p].discard(k)
                g_cost.pop(k, None)
                S.tree[k] = False
                if f[k] >= c_best and k != g_i:
                    S.alive[k] = False

    def expand(v):
        clock.charge("vertex")
        gv = gt(v)
        ghv = S.ghat[v]
        xs, dx, ws, dw = S.within(v, radius)
        if len(xs):
            h = S.hhat[xs]
            keep = ghv + dx + h < c_best
            clock.charge("edge", int(keep.sum()))
            for x, k in zip(xs[keep].tolist(), (gv + dx + h)[keep].tolist()):
                heapq.heappush(qe, (k, v, x))
        if v not in old and len(ws):
            h = S.hhat[ws]
            keep = ghv + dw + h < c_best
            clock.charge("edge", int(keep.sum()))
            for w, c, k in zip(ws[keep].tolist(), dw[keep].tolist(), (gv + dw + h)[keep].tolist()):
                if parent.get(w) == v or parent.get(v) == w or gv + c >= gt(w):
                    continue
                heapq.heappush(qe, (k, v, w))

    while not clock.exhausted():
        iterations += 1
        clock.charge("iteration")
        if not qe and not qv:
            if c_best <= c_min + 1e-9:
                break
            if first:
                first = False
            else:
                if math.isfinite(c_best):
                    prune()
                draw(cfg.batch_size)
                q = int(S.alive[: S.n].sum())
                radius = gamma_star(informed_area(), cfg.rewire_gamma) * math.sqrt(math.log(max(q, 2)) / max(q, 2))
            tree_v = [int(v) for v in np.flatnonzero(S.alive[: S.n] & S.tree[: S.n])]
            # Vertices already in the tree at batch start do not propose rewiring edges.
            old = set(tree_v)
            qv = [(gt(v) + h_hat(v), v) for v in tree_v]
            heapq.heapify(qv)
            continue

        while qv and (not qe or qv[0][0] <= qe[0][0]):
            _, v = heapq.heappop(qv)
            if S.alive[v] and S.tree[v]:
                expand(v)
        if not qe:
            continue
        _, vm, xm = heapq.heappop(qe)
        clock.charge("vertex")
        if not (S.alive[vm] and S.tree[vm] and S.alive[xm]):
            continue
        c_est = c_hat(vm, xm)
        key = gt(vm) + c_est + h_hat(xm)
        if key >= c_best:
            qe.clear()
            qv.clear()
            continue
        if gt(vm) + c_est >= gt(xm):
            continue
        if not space.edge_valid(S.xy[vm], S.xy[xm]):
            continue
        new_g = gt(vm) + c_est
        if g_hat(vm) + c_est + h_hat(xm) >= c_best or new_g >= gt(xm):
            continue
        if S.tree[xm]:
            children[parent[xm]].discard(xm)
            delta = new_g - g_cost[xm]
            stack = list(children.get(xm, ()))
            while stack:
                k = stack.pop()
                g_cost[k] += delta
                stack.extend(children.get(k, ()))
        else:
            S.tree[xm] = True
            children[xm] = set()
            heapq.heappush(qv, (new_g + h_hat(xm), xm))
        parent[xm] = vm
        children[vm].add(xm)
        g_cost[xm] = new_g
        if gt(g_i) < c_best:
            c_best = gt(g_i)
            recorder.offer(c_best, lambda: path_to(g_i))
    return iterations
