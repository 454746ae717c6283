from __future__ import annotations

import math

import numpy as np

from spath.planners.base import NodeStore, Recorder, Space, gamma_star


def plan_rrt_star(start, goal, space: Space, cfg, recorder: Recorder) -> int:
    """Asymptotically optimal RRT with goal biasing; returns the iteration count."""
    clock = space.clock
    rng = space.rng
    nodes = NodeStore(clock)
    nodes.add(start)
    parent = [-1]
    cost = np.zeros(1024)
    children: list[list[int]] = [[]]
    goal_links: list[int] = []
    gamma = gamma_star(space.area, cfg.rewire_gamma)
    step = cfg.steer_step
    gx, gy = goal
    goal_t = (float(gx), float(gy))

    def path_to_goal(k):
        pts = [] if nodes.point(k) == goal_t else [goal_t]
        while k >= 0:
            pts.append(nodes.point(k))
            k = parent[k]
        return pts[::-1]

    iterations = 0
    while not clock.exhausted():
        iterations += 1
        clock.charge("iteration")
        q = goal_t if rng.random() < cfg.goal_bias else space.sample()
        near_i = nodes.nearest(q)
        nx, ny = nodes.point(near_i)
        dx, dy = q[0] - nx, q[1] - ny
        d = math.hypot(dx, dy)
        if d < 1e-12:
            continue
        if d > step:
            q = (nx + dx * step / d, ny + dy * step / d)
        if not space.point_valid(q):
            continue
        if not space.edge_valid((nx, ny), q):
            continue

        n = nodes.n + 1
        r = min(step, gamma * math.sqrt(math.log(n) / n))
        d2 = nodes.sqdist(q)
        near = np.flatnonzero(d2 <= r * r)
        if not np.any(near == near_i):
            near = np.append(near, near_i)
        dist = np.sqrt(d2[near])
        through = cost[near] + dist
        best_parent = near_i
        best_cost = cost[near_i] + math.sqrt(d2[near_i])
        for k in np.argsort(through, kind="stable"):
            j = int(near[k])
            if through[k] >= best_cost:
                break
            if space.edge_valid(nodes.point(j), q):
                best_parent, best_cost = j, float(through[k])
                break
        new = nodes.add(q)
        if new == len(cost):
            cost = np.concatenate([cost, np.zeros(len(cost))])
        cost[new] = best_cost
        parent.append(best_parent)
        children.append([])
        children[best_parent].append(new)

        improved = False
        cand = (cost[new] + dist < cost[near] - 1e-12) & (near != best_parent)
        if cand.any():
            idx = near[cand]
            ok = space.edges_valid(q, nodes.xy[idx])
            for j, c_new, good in zip(idx, (cost[new] + dist)[cand], ok):
                if not good:
                    continue
                j = int(j)
                children[parent[j]].remove(j)
                parent[j] = new
                children[new].append(j)
                delta = c_new - cost[j]
                stack = [j]
                while stack:
                    k = stack.pop()
                    cost[k] += delta
                    stack.extend(children[k])
                improved = True

        dg = math.hypot(q[0] - gx, q[1] - gy)
        if dg <= step and (dg == 0.0 or space.edge_valid(q, goal_t)):
            goal_links.append(new)
            improved = True
        if improved and goal_links:
            links = np.asarray(goal_links)
            tot = cost[links] + np.hypot(nodes.xy[links, 0] - gx, nodes.xy[links, 1] - gy)
            k = int(links[np.argmin(tot)])
            recorder.offer(float(tot.min()), lambda: path_to_goal(k))
    return iterations
