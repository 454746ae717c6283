"""Independent reference solvers used by the tests."""

import heapq
import itertools
import math

import numpy as np


def inflated_rect(rect, r, m=3):
    """Polygon circumscribing ``rect`` grown by ``r`` (rounded corners, ``m`` facets each)."""
    (ax, ay), (bx, by) = rect
    corners = [((bx, ay), -90.0), ((bx, by), 0.0), ((ax, by), 90.0), ((ax, ay), 180.0)]
    rr = r / math.cos(math.radians(45.0 / m))
    pts = []
    for (cx, cy), a0 in corners:
        for k in range(m):
            a = math.radians(a0 + (k + 0.5) * 90.0 / m)
            pts.append((cx + rr * math.cos(a), cy + rr * math.sin(a)))
    return np.asarray(pts)


def _crosses_interior(p, q, poly, eps=1e-9):
    # Cyrus-Beck clip of segment pq against the convex polygon (CCW vertices).
    d = q - p
    lo, hi = 0.0, 1.0
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        e = b - a
        normal = np.array([-e[1], e[0]])  # inward for CCW
        num = normal @ (p - a) - eps * np.linalg.norm(normal)
        den = normal @ d
        if abs(den) < 1e-15:
            if num < 0:
                return False
            continue
        t = -num / den
        if den > 0:
            lo = max(lo, t)
        else:
            hi = min(hi, t)
        if lo >= hi:
            return False
    return hi - lo > 1e-9


def _inside(p, poly):
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        e = b - a
        if -e[1] * (p[0] - a[0]) + e[0] * (p[1] - a[1]) <= 1e-9:
            return False
    return True


def visibility_shortest(start, goal, rects, box, r, m=3):
    """Shortest path for a disc of radius ``r`` among axis-aligned rectangles in ``box``."""
    polys = [inflated_rect(rc, r, m) for rc in rects]
    (x0, y0), (x1, y1) = box
    lo = np.array([x0 + r, y0 + r]) - 1e-9
    hi = np.array([x1 - r, y1 - r]) + 1e-9
    nodes = [np.asarray(start, float), np.asarray(goal, float)]
    for poly in polys:
        for v in poly:
            if np.all(v >= lo) and np.all(v <= hi) and not any(_inside(v, p) for p in polys):
                nodes.append(v)
    for p in nodes[:2]:
        if not (np.all(p >= lo) and np.all(p <= hi)) or any(_inside(p, q) for q in polys):
            return math.inf
    n = len(nodes)
    adj = [[] for _ in range(n)]
    for i, j in itertools.combinations(range(n), 2):
        if not any(_crosses_interior(nodes[i], nodes[j], p) for p in polys):
            w = float(np.linalg.norm(nodes[i] - nodes[j]))
            adj[i].append((j, w))
            adj[j].append((i, w))
    dist = [math.inf] * n
    dist[0] = 0.0
    heap = [(0.0, 0)]
    while heap:
        d, v = heapq.heappop(heap)
        if v == 1:
            return d
        if d > dist[v]:
            continue
        for u, w in adj[v]:
            if d + w < dist[u]:
                dist[u] = d + w
                heapq.heappush(heap, (d + w, u))
    return math.inf
