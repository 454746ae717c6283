"""Shared machinery for the anytime planners: config, clocks, result type, state space."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from spath.gridmap import CellMask, DistanceField
from spath.rng import XorShift64Star

PLANNERS = ("rrtstar", "prmstar", "bitstar")
CLOCKS = ("cpu", "wall", "work")

# Deterministic work clock: nominal seconds charged per primitive operation.
# Roughly 5x the measured cost of each primitive in this implementation, so the
# model stands for a slower reference machine (keeps long sweeps affordable).
WORK_COSTS = {
    "point_check": 3.0e-7,
    "sample": 1.7e-5,
    "neighbor": 7.0e-8,
    "vertex": 1.5e-5,
    "iteration": 5.0e-5,
    "edge_call": 1.5e-4,
    "edge": 2.5e-5,
    "relax": 5.0e-6,
}

TIME_CHECK_INTERVAL = 8
_SQRT2 = math.sqrt(2.0)


class PlannerError(ValueError):
    """Invalid planning request (as opposed to a timeout, which is a result)."""


@dataclass(frozen=True)
class PlannerConfig:
    kind: str = "prmstar"
    budget: float = 1.0
    seed: int = 0
    robot_radius: float = 0.3
    steer_step: float = 1.0
    rewire_gamma: float = 1.0
    batch_size: int = 100
    goal_bias: float = 0.05
    clock: str = "cpu"
    extract_interval: int = 256

    def __post_init__(self):
        if self.kind not in PLANNERS:
            raise PlannerError(f"unknown planner kind {self.kind!r}")
        if self.clock not in CLOCKS:
            raise PlannerError(f"unknown clock {self.clock!r}")
        if not self.budget > 0:
            raise PlannerError("budget must be positive")
        if not 0.0 <= self.goal_bias <= 1.0:
            raise PlannerError("goal_bias must lie in [0, 1]")

    def with_(self, **kw) -> "PlannerConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class PlanStats:
    samples: int = 0
    validity_checks: int = 0
    iterations: int = 0
    solved_at: float | None = None
    elapsed: float = 0.0
    trace: tuple[tuple[float, float], ...] = ()


@dataclass(frozen=True)
class GeometricPath:
    waypoints: tuple[tuple[float, float], ...]
    length: float
    stats: PlanStats = field(default_factory=PlanStats)

    @property
    def solved(self) -> bool:
        return len(self.waypoints) > 0

    @classmethod
    def from_points(cls, pts, stats: PlanStats | None = None) -> "GeometricPath":
        pts = tuple((float(x), float(y)) for x, y in pts)
        return cls(pts, path_length(pts), stats or PlanStats())

    @classmethod
    def failure(cls, stats: PlanStats | None = None) -> "GeometricPath":
        return cls((), math.inf, stats or PlanStats())

    def at_budget(self, budget: float) -> float:
        """Best length recorded no later than ``budget`` (``inf`` if none)."""
        best = math.inf
        for t, cost in self.stats.trace:
            if t <= budget:
                best = cost
            else:
                break
        return best


def path_length(points) -> float:
    pts = list(points)
    return float(sum(math.dist(pts[i], pts[i + 1]) for i in range(len(pts) - 1)))


class Clock:
    def __init__(self, kind: str, budget: float):
        self.kind = kind
        self.budget = budget
        self.work = 0.0
        if kind == "cpu":
            self._now = time.thread_time
        elif kind == "wall":
            self._now = time.perf_counter
        else:
            self._now = None
        self._t0 = self._now() if self._now else 0.0
        self._ticks = 0

    def charge(self, what: str, n: float = 1.0) -> None:
        self.work += WORK_COSTS[what] * n

    def elapsed(self) -> float:
        if self._now is None:
            return self.work
        return self._now() - self._t0

    def exhausted(self) -> bool:
        if self._now is None:
            return self.work >= self.budget
        self._ticks += 1
        if self._ticks % TIME_CHECK_INTERVAL:
            return False
        return self._now() - self._t0 >= self.budget


class Space:
    """Masked, clearance-checked 2D state space shared by the planners."""

    def __init__(self, df: DistanceField, mask: CellMask | None, radius: float, rng: XorShift64Star, clock: Clock):
        self.df = df
        self.grid = g = df.grid
        self.dist = df.distance
        self.mask = mask
        self.member = mask.member if mask is not None else None
        self.radius = radius
        self.rng = rng
        self.clock = clock
        self.ox, self.oy = g.origin
        self.res = g.resolution
        self.w, self.h = g.width, g.height
        self.x1 = self.ox + self.w * self.res
        self.y1 = self.oy + self.h * self.res
        self.samples = 0
        self.checks = 0
        self.area = mask.area if mask is not None else g.width * g.height * g.cell_area
        self._indices = mask.indices if mask is not None else None
        self._member_flat = self.member.ravel() if self.member is not None else None
        self._dist_flat = self.dist.ravel()
        self._margin = _mask_margin(self.member) if self.member is not None else None

    def margin(self, x: float, y: float) -> float:
        """Distance in cells from the cell under (x, y) to the nearest cell outside the mask."""
        if self._margin is None:
            return math.inf
        m, r0, c0 = self._margin
        iy = int((y - self.oy) / self.res) - r0
        ix = int((x - self.ox) / self.res) - c0
        if 0 <= iy < m.shape[0] and 0 <= ix < m.shape[1] and y >= self.oy and x >= self.ox:
            return m.item(iy, ix)
        return 0.0

    # -- sampling ---------------------------------------------------------

    def sample(self) -> tuple[float, float]:
        self.samples += 1
        self.clock.charge("sample")
        rng = self.rng
        if self._indices is None:
            return (self.ox + rng.random() * (self.x1 - self.ox), self.oy + rng.random() * (self.y1 - self.oy))
        flat = int(self._indices[rng.randbelow(len(self._indices))])
        iy, ix = divmod(flat, self.w)
        return (self.ox + (ix + rng.random()) * self.res, self.oy + (iy + rng.random()) * self.res)

    # -- validity ---------------------------------------------------------

    def clearance(self, x: float, y: float) -> float:
        u = (x - self.ox) / self.res - 0.5
        v = (y - self.oy) / self.res - 0.5
        w, h = self.w, self.h
        u = min(max(u, 0.0), w - 1.0)
        v = min(max(v, 0.0), h - 1.0)
        i0 = min(int(u), max(w - 2, 0))
        j0 = min(int(v), max(h - 2, 0))
        i1 = min(i0 + 1, w - 1)
        j1 = min(j0 + 1, h - 1)
        fu = u - i0
        fv = v - j0
        d = self.dist
        d00 = d.item(j0, i0)
        d01 = d.item(j0, i1)
        d10 = d.item(j1, i0)
        d11 = d.item(j1, i1)
        if d00 == d01 == d10 == d11:
            return d00
        top = d00 + (d01 - d00) * fu
        bot = d10 + (d11 - d10) * fu
        return top + (bot - top) * fv

    def point_valid(self, p) -> bool:
        self.checks += 1
        self.clock.charge("point_check")
        x, y = p
        if not (self.ox <= x < self.x1 and self.oy <= y < self.y1):
            return False
        if self.member is not None:
            if not self.member.item(int((y - self.oy) / self.res), int((x - self.ox) / self.res)):
                return False
        return self.clearance(x, y) >= self.radius

    def _points_ok(self, xs: np.ndarray, ys: np.ndarray, clearance: bool = True) -> np.ndarray:
        u = (xs - self.ox) / self.res
        v = (ys - self.oy) / self.res
        ok = (u >= 0) & (u < self.w) & (v >= 0) & (v < self.h)
        if self.member is not None:
            cell = np.minimum(np.maximum(v.astype(np.intp), 0), self.h - 1) * self.w + np.minimum(
                np.maximum(u.astype(np.intp), 0), self.w - 1
            )
            ok &= self._member_flat[cell]
        if clearance:
            ok &= self._bilinear(u - 0.5, v - 0.5) >= self.radius
        return ok

    def _bilinear(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        w, h = self.w, self.h
        u = np.minimum(np.maximum(u, 0.0), w - 1.0)
        v = np.minimum(np.maximum(v, 0.0), h - 1.0)
        i0 = np.minimum(u.astype(np.intp), max(w - 2, 0))
        j0 = np.minimum(v.astype(np.intp), max(h - 2, 0))
        fu = u - i0
        fv = v - j0
        d = self._dist_flat
        k = j0 * w + i0
        di = 1 if w > 1 else 0
        dj = w if h > 1 else 0
        d00 = d[k]
        d01 = d[k + di]
        d10 = d[k + dj]
        d11 = d[k + dj + di]
        with np.errstate(invalid="ignore"):
            top = d00 + (d01 - d00) * fu
            bot = d10 + (d11 - d10) * fu
            out = top + (bot - top) * fv
        return np.where(np.isnan(out), np.inf, out)

    def _provably_valid(self, ax, ay, bx, by, length: float) -> bool:
        # Sufficient clearance and mask margin at both endpoints cover every
        # point of the segment, since each lies within length/2 of an endpoint.
        if not (self.ox <= ax < self.x1 and self.oy <= ay < self.y1 and self.ox <= bx < self.x1 and self.oy <= by < self.y1):
            return False
        half = 0.5 * length
        if self._margin is not None:
            need = half / self.res + _SQRT2 + 1e-9
            if self.margin(ax, ay) < need or self.margin(bx, by) < need:
                return False
        need = self.radius + _SQRT2 * half + 1e-9
        return self.clearance(ax, ay) >= need and self.clearance(bx, by) >= need

    def _lipschitz_clear(self, a, b, length: float) -> bool:
        # The interpolated field has gradient norm <= sqrt(2), so enough clearance
        # at both endpoints proves every intermediate sample valid.
        need = self.radius + _SQRT2 * 0.5 * length + 1e-9
        return self.clearance(a[0], a[1]) >= need and self.clearance(b[0], b[1]) >= need

    def edge_valid(self, a, b) -> bool:
        ax, ay = float(a[0]), float(a[1])
        bx, by = float(b[0]), float(b[1])
        length = math.hypot(bx - ax, by - ay)
        n = max(1, math.ceil(length / (0.5 * self.res))) + 1
        self.checks += n
        self.clock.charge("point_check", n)
        self.clock.charge("edge_call")
        if self._provably_valid(ax, ay, bx, by, length):
            return True
        t = np.linspace(0.0, 1.0, n)
        xs = ax + t * (bx - ax)
        ys = ay + t * (by - ay)
        if self._lipschitz_clear((ax, ay), (bx, by), length):
            return bool(self._points_ok(xs, ys, clearance=False).all())
        return bool(self._points_ok(xs, ys).all())

    def edges_valid(self, a, targets) -> np.ndarray:
        """Validity of edges from ``a`` to each row of ``targets`` in one vectorised pass."""
        targets = np.asarray(targets, dtype=float).reshape(-1, 2)
        if len(targets) == 0:
            return np.zeros(0, dtype=bool)
        a = np.asarray(a, dtype=float)
        delta = targets - a
        lengths = np.hypot(delta[:, 0], delta[:, 1])
        counts = np.maximum(1, np.ceil(lengths / (0.5 * self.res)).astype(np.intp)) + 1
        total = int(counts.sum())
        self.checks += total
        self.clock.charge("point_check", total)
        self.clock.charge("edge_call")
        self.clock.charge("edge", len(targets))
        ok_all = self._prefilter(a, targets, lengths)
        if ok_all.all():
            return ok_all
        todo = np.flatnonzero(~ok_all)
        out = ok_all.copy()
        out[todo] = self._edges_dense(a, delta[todo], counts[todo])
        return out

    def _prefilter(self, a, targets, lengths) -> np.ndarray:
        """Edges proven valid from endpoint clearance and mask margin alone."""
        ax, ay = float(a[0]), float(a[1])
        tx, ty = targets[:, 0], targets[:, 1]
        half = 0.5 * lengths
        inb = (tx >= self.ox) & (tx < self.x1) & (ty >= self.oy) & (ty < self.y1)
        if not (self.ox <= ax < self.x1 and self.oy <= ay < self.y1):
            return np.zeros(len(targets), dtype=bool)
        need = self.radius + _SQRT2 * half + 1e-9
        u = (tx - self.ox) / self.res
        v = (ty - self.oy) / self.res
        ok = inb & (self._bilinear(u - 0.5, v - 0.5) >= need) & (self.clearance(ax, ay) >= need)
        if self._margin is not None:
            m, r0, c0 = self._margin
            iy = np.clip(v.astype(np.intp) - r0, 0, m.shape[0] - 1)
            ix = np.clip(u.astype(np.intp) - c0, 0, m.shape[1] - 1)
            inside = (v.astype(np.intp) - r0 >= 0) & (v.astype(np.intp) - r0 < m.shape[0])
            inside &= (u.astype(np.intp) - c0 >= 0) & (u.astype(np.intp) - c0 < m.shape[1])
            mneed = half / self.res + _SQRT2 + 1e-9
            ok &= inside & (m[iy, ix] >= mneed) & (self.margin(ax, ay) >= mneed)
        return ok

    def _edges_dense(self, a, delta, counts) -> np.ndarray:
        total = int(counts.sum())
        owner = np.repeat(np.arange(len(counts)), counts)
        starts = np.cumsum(counts) - counts
        step = np.arange(total) - np.repeat(starts, counts)
        t = step / (counts[owner] - 1)
        xs = a[0] + t * delta[owner, 0]
        ys = a[1] + t * delta[owner, 1]
        ok = self._points_ok(xs, ys)
        bad = np.bincount(owner[~ok], minlength=len(counts))
        return bad == 0


class NodeStore:
    """Growable array of 2D states with vectorised proximity queries."""

    def __init__(self, clock: Clock, capacity: int = 1024):
        self.xy = np.empty((capacity, 2))
        self.n = 0
        self.clock = clock

    def add(self, p) -> int:
        if self.n == len(self.xy):
            self.xy = np.concatenate([self.xy, np.empty_like(self.xy)])
        self.xy[self.n] = p
        self.n += 1
        return self.n - 1

    def point(self, i: int) -> tuple[float, float]:
        return (float(self.xy[i, 0]), float(self.xy[i, 1]))

    def sqdist(self, p) -> np.ndarray:
        self.clock.charge("neighbor", self.n)
        d = self.xy[: self.n] - np.asarray(p, dtype=float)
        return d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1]

    def nearest(self, p) -> int:
        return int(np.argmin(self.sqdist(p)))

    def within(self, p, r: float) -> np.ndarray:
        return np.flatnonzero(self.sqdist(p) <= r * r)


def _mask_margin(member: np.ndarray):
    """In-mask distance field (cells) over the mask's bounding box, padded with outside cells."""
    rows = np.flatnonzero(member.any(axis=1))
    cols = np.flatnonzero(member.any(axis=0))
    if len(rows) == 0:
        return (np.zeros((1, 1)), 0, 0)
    r0, r1 = rows[0] - 1, rows[-1] + 2
    c0, c1 = cols[0] - 1, cols[-1] + 2
    box = np.zeros((r1 - r0, c1 - c0), dtype=bool)
    sr0, sc0 = max(r0, 0), max(c0, 0)
    sub = member[sr0 : min(r1, member.shape[0]), sc0 : min(c1, member.shape[1])]
    box[sr0 - r0 : sr0 - r0 + sub.shape[0], sc0 - c0 : sc0 - c0 + sub.shape[1]] = sub
    return (ndimage.distance_transform_edt(box), int(r0), int(c0))


def gamma_star(area: float, scale: float) -> float:
    """Asymptotic-optimality radius constant for d = 2: 2 (1 + 1/d)^(1/d) (area / pi)^(1/d)."""
    return scale * 2.0 * math.sqrt(1.5) * math.sqrt(area / math.pi)


def check_endpoints(start, goal, space: Space) -> None:
    if not space.point_valid(start):
        raise PlannerError(f"start {tuple(start)} is not a valid state")
    if not space.point_valid(goal):
        raise PlannerError(f"goal {tuple(goal)} is not a valid state")


class Recorder:
    """Anytime bookkeeping: the best-cost trace and the path at each improvement."""

    def __init__(self, clock: Clock):
        self.clock = clock
        self.trace: list[tuple[float, float]] = []
        self.paths: list[tuple] = []

    @property
    def best(self) -> float:
        return self.trace[-1][1] if self.trace else math.inf

    def offer(self, cost: float, path_fn) -> bool:
        """Record ``path_fn()`` if ``cost`` improves on the best; the trace stores its exact length."""
        if cost < self.best - 1e-12:
            path = tuple((float(x), float(y)) for x, y in path_fn())
            self.trace.append((self.clock.elapsed(), path_length(path)))
            self.paths.append(path)
            return True
        return False

    def result(self, space: Space, iterations: int) -> GeometricPath:
        budget = self.clock.budget
        k = -1
        for i, (t, _) in enumerate(self.trace):
            if t <= budget:
                k = i
        trace = tuple(self.trace)
        stats = PlanStats(
            samples=space.samples,
            validity_checks=space.checks,
            iterations=iterations,
            solved_at=trace[0][0] if trace and trace[0][0] <= budget else None,
            elapsed=self.clock.elapsed(),
            trace=tuple(e for e in trace if e[0] <= budget),
        )
        if k < 0:
            return GeometricPath.failure(stats)
        return GeometricPath.from_points(self.paths[k], stats)
