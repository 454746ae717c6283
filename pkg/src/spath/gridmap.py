"""Planar occupancy grid, Euclidean distance field, and region masks.

Cells are indexed ``[row, col] = [iy, ix]``; the centre of cell ``(iy, ix)``
is ``origin + ((ix + 0.5) * res, (iy + 0.5) * res)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

UNREACHABLE = math.inf


class GridError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    origin: tuple[float, float]
    resolution: float
    occupied: np.ndarray

    def __post_init__(self):
        occ = np.ascontiguousarray(self.occupied, dtype=bool)
        if occ.ndim != 2 or occ.shape[0] < 1 or occ.shape[1] < 1:
            raise GridError("occupancy array must be 2-D with at least one cell")
        if not self.resolution > 0:
            raise GridError("resolution must be positive")
        occ.setflags(write=False)
        object.__setattr__(self, "occupied", occ)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, "resolution", float(self.resolution))

    @property
    def height(self) -> int:
        return self.occupied.shape[0]

    @property
    def width(self) -> int:
        return self.occupied.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.occupied.shape

    @property
    def extent(self) -> tuple[float, float, float, float]:
        ox, oy = self.origin
        return ox, oy, ox + self.width * self.resolution, oy + self.height * self.resolution

    @property
    def cell_area(self) -> float:
        return self.resolution * self.resolution

    def cell_of(self, p) -> tuple[int, int]:
        ix = math.floor((p[0] - self.origin[0]) / self.resolution)
        iy = math.floor((p[1] - self.origin[1]) / self.resolution)
        return iy, ix

    def in_bounds(self, p) -> bool:
        x0, y0, x1, y1 = self.extent
        return x0 <= p[0] < x1 and y0 <= p[1] < y1

    def cell_centers(self, iy, ix):
        ox, oy = self.origin
        r = self.resolution
        return ox + (np.asarray(ix) + 0.5) * r, oy + (np.asarray(iy) + 0.5) * r

    def with_occupied(self, occupied: np.ndarray) -> "OccupancyGrid":
        return OccupancyGrid(self.origin, self.resolution, occupied)

    def __eq__(self, other):
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return (
            self.origin == other.origin
            and self.resolution == other.resolution
            and np.array_equal(self.occupied, other.occupied)
        )

    __hash__ = object.__hash__


@dataclass(frozen=True, eq=False)
class DistanceField:
    grid: OccupancyGrid
    distance: np.ndarray

    def at(self, p) -> float:
        """Bilinear interpolation of cell-centre distances; 0 outside the grid."""
        g = self.grid
        if not g.in_bounds(p):
            return 0.0
        u = (p[0] - g.origin[0]) / g.resolution - 0.5
        v = (p[1] - g.origin[1]) / g.resolution - 0.5
        return float(_bilinear(self.distance, np.array([u]), np.array([v]))[0])

    def at_many(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        g = self.grid
        u = (xs - g.origin[0]) / g.resolution - 0.5
        v = (ys - g.origin[1]) / g.resolution - 0.5
        out = _bilinear(self.distance, u, v)
        x0, y0, x1, y1 = g.extent
        out[(xs < x0) | (xs >= x1) | (ys < y0) | (ys >= y1)] = 0.0
        return out


def _bilinear(d: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    h, w = d.shape
    u = np.clip(u, 0.0, w - 1.0)
    v = np.clip(v, 0.0, h - 1.0)
    i0 = np.minimum(np.floor(u).astype(np.intp), max(w - 2, 0))
    j0 = np.minimum(np.floor(v).astype(np.intp), max(h - 2, 0))
    i1 = np.minimum(i0 + 1, w - 1)
    j1 = np.minimum(j0 + 1, h - 1)
    fu = u - i0
    fv = v - j0
    d00 = d[j0, i0]
    d01 = d[j0, i1]
    d10 = d[j1, i0]
    d11 = d[j1, i1]
    with np.errstate(invalid="ignore"):
        top = d00 + (d01 - d00) * fu
        bot = d10 + (d11 - d10) * fu
        out = top + (bot - top) * fv
    # inf - inf is nan on obstacle-free grids; every corner is inf there.
    return np.where(np.isnan(out), UNREACHABLE, out)


def distance_field(grid: OccupancyGrid) -> DistanceField:
    """Exact Euclidean distance from each cell centre to the nearest occupied centre."""
    occ = grid.occupied
    if not occ.any():
        dist = np.full(occ.shape, UNREACHABLE)
    else:
        dist = ndimage.distance_transform_edt(~occ) * grid.resolution
    dist.setflags(write=False)
    return DistanceField(grid, dist)


@dataclass(frozen=True, eq=False)
class CellMask:
    grid: OccupancyGrid
    member: np.ndarray

    def __post_init__(self):
        m = np.ascontiguousarray(self.member, dtype=bool)
        if m.shape != self.grid.shape:
            raise GridError("mask shape does not match grid")
        m.setflags(write=False)
        object.__setattr__(self, "member", m)
        idx = np.flatnonzero(m)
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    @classmethod
    def from_indices(cls, grid: OccupancyGrid, indices) -> "CellMask":
        m = np.zeros(grid.shape, dtype=bool)
        m.flat[np.asarray(indices, dtype=np.intp)] = True
        return cls(grid, m)

    @property
    def count(self) -> int:
        return len(self.indices)

    @property
    def area(self) -> float:
        return self.count * self.grid.cell_area

    def contains(self, p) -> bool:
        if not self.grid.in_bounds(p):
            return False
        iy, ix = self.grid.cell_of(p)
        return bool(self.member[iy, ix])

    def union(self, other: "CellMask") -> "CellMask":
        return CellMask(self.grid, self.member | other.member)

    def issubset(self, other: "CellMask") -> bool:
        return not np.any(self.member & ~other.member)

    def __eq__(self, other):
        if not isinstance(other, CellMask):
            return NotImplemented
        return np.array_equal(self.member, other.member)

    __hash__ = object.__hash__


def _polygon_cells(poly, grid: OccupancyGrid) -> np.ndarray:
    """Boolean sub-window of cells whose centres lie in ``poly``, with offsets."""
    x0, y0, x1, y1 = poly.bounds()
    r = grid.resolution
    ox, oy = grid.origin
    ix0 = max(0, math.floor((x0 - ox) / r - 0.5))
    ix1 = min(grid.width - 1, math.ceil((x1 - ox) / r - 0.5))
    iy0 = max(0, math.floor((y0 - oy) / r - 0.5))
    iy1 = min(grid.height - 1, math.ceil((y1 - oy) / r - 0.5))
    if ix1 < ix0 or iy1 < iy0:
        return None
    xs = ox + (np.arange(ix0, ix1 + 1) + 0.5) * r
    ys = oy + (np.arange(iy0, iy1 + 1) + 0.5) * r
    inside = np.ones((len(ys), len(xs)), dtype=bool)
    for nx, ny, c in poly.halfplanes():
        inside &= (nx * xs[None, :] + ny * ys[:, None] + c) >= -1e-9
    return iy0, ix0, inside


def rasterize(polys, grid: OccupancyGrid) -> CellMask:
    """Cells whose centre is contained in any polygon."""
    member = np.zeros(grid.shape, dtype=bool)
    for poly in polys:
        win = _polygon_cells(poly, grid)
        if win is None:
            continue
        iy0, ix0, inside = win
        member[iy0 : iy0 + inside.shape[0], ix0 : ix0 + inside.shape[1]] |= inside
    if not member.any():
        raise GridError("rasterized region is empty")
    return CellMask(grid, member)


def is_valid(p, radius: float, df: DistanceField, mask: CellMask | None = None) -> bool:
    g = df.grid
    if not g.in_bounds(p):
        return False
    if mask is not None:
        iy, ix = g.cell_of(p)
        if not mask.member[iy, ix]:
            return False
    return df.at(p) >= radius


def segment_points(a, b, resolution: float) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    length = float(np.hypot(*(b - a)))
    n = max(1, math.ceil(length / (0.5 * resolution)))
    t = np.linspace(0.0, 1.0, n + 1)
    return a[None, :] + t[:, None] * (b - a)[None, :]


def points_valid(pts: np.ndarray, radius: float, df: DistanceField, mask: CellMask | None = None) -> np.ndarray:
    g = df.grid
    xs, ys = pts[:, 0], pts[:, 1]
    x0, y0, x1, y1 = g.extent
    ok = (xs >= x0) & (xs < x1) & (ys >= y0) & (ys < y1)
    ix = np.clip(np.floor((xs - g.origin[0]) / g.resolution).astype(np.intp), 0, g.width - 1)
    iy = np.clip(np.floor((ys - g.origin[1]) / g.resolution).astype(np.intp), 0, g.height - 1)
    if mask is not None:
        ok &= mask.member[iy, ix]
    ok &= df.at_many(xs, ys) >= radius
    return ok


def segment_valid(a, b, radius: float, df: DistanceField, mask: CellMask | None = None) -> bool:
    """Checks points spaced at most half a cell apart, endpoints included."""
    pts = segment_points(a, b, df.grid.resolution)
    return bool(points_valid(pts, radius, df, mask).all())


def sample(mask: CellMask, rng) -> tuple[float, float]:
    """Uniform point over the mask: uniform member cell, uniform jitter inside it."""
    n = mask.count
    if n == 0:
        raise GridError("cannot sample from an empty mask")
    flat = int(mask.indices[rng.randbelow(n)])
    g = mask.grid
    iy, ix = divmod(flat, g.width)
    r = g.resolution
    return (g.origin[0] + (ix + rng.random()) * r, g.origin[1] + (iy + rng.random()) * r)


def full_mask(grid: OccupancyGrid) -> CellMask:
    return CellMask(grid, np.ones(grid.shape, dtype=bool))


# --- file formats -----------------------------------------------------------


def write_pgm(path, grid: OccupancyGrid) -> None:
    """8-bit binary PGM (0 occupied, 255 free), top image row = max y."""
    img = np.where(grid.occupied, 0, 255).astype(np.uint8)[::-1]
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{grid.width} {grid.height}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
    sidecar = path.with_suffix(".json")
    sidecar.write_text(json.dumps({"origin": list(grid.origin), "resolution": grid.resolution}, indent=1))


def _pgm_tokens(data: bytes):
    pos = 0
    tokens = []
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    return tokens, pos + 1


def read_pgm(path, origin=None, resolution=None, threshold: int = 128) -> OccupancyGrid:
    path = Path(path)
    data = path.read_bytes()
    (magic, w, h, maxval), offset = _pgm_tokens(data)
    if magic != b"P5":
        raise GridError(f"{path}: only binary PGM (P5) is supported")
    w, h, maxval = int(w), int(h), int(maxval)
    if maxval > 255:
        raise GridError(f"{path}: only 8-bit PGM is supported")
    img = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=offset).reshape(h, w)
    sidecar = path.with_suffix(".json")
    if (origin is None or resolution is None) and sidecar.exists():
        meta = json.loads(sidecar.read_text())
        origin = meta["origin"] if origin is None else origin
        resolution = meta["resolution"] if resolution is None else resolution
    if origin is None or resolution is None:
        raise GridError(f"{path}: missing origin/resolution metadata")
    return OccupancyGrid(tuple(origin), float(resolution), img[::-1] < threshold)


def grid_from_rectangles(bounds, rects, resolution: float = 0.05) -> OccupancyGrid:
    """Occupancy from axis-aligned obstacle rectangles ``{min: [x, y], max: [x, y]}``.

    A cell is occupied when its centre lies inside any rectangle.
    """
    (x0, y0), (x1, y1) = bounds
    w = max(1, math.ceil((x1 - x0) / resolution - 1e-9))
    h = max(1, math.ceil((y1 - y0) / resolution - 1e-9))
    occ = np.zeros((h, w), dtype=bool)
    xs = x0 + (np.arange(w) + 0.5) * resolution
    ys = y0 + (np.arange(h) + 0.5) * resolution
    for rect in rects:
        (ax, ay), (bx, by) = rect["min"], rect["max"]
        cols = np.flatnonzero((xs >= ax) & (xs <= bx))
        rows = np.flatnonzero((ys >= ay) & (ys <= by))
        if len(cols) and len(rows):
            occ[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1] = True
    return OccupancyGrid((x0, y0), resolution, occ)


def load_rectangles(path, resolution: float = 0.05) -> OccupancyGrid:
    doc = json.loads(Path(path).read_text())
    res = doc.get("resolution", resolution)
    return grid_from_rectangles((doc["bounds"]["min"], doc["bounds"]["max"]), doc["obstacles"], res)
