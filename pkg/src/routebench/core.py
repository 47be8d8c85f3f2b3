"""Geometric primitives, grid densities, sampling, and route metrics.

Everything downstream (tour construction, subset routing, latency schemes,
fairness mixtures) is built on the small set of value types defined here:
points in a bounding square, visiting orders, piecewise-constant densities
on an m x m grid, and reproducible random seeds.

All types are immutable after construction and safe to share across
threads or processes; randomness always flows through an explicit
:class:`RandomSeed` so results are reproducible bit-for-bit.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

__all__ = [
    "Point",
    "Square",
    "UNIT_SQUARE",
    "PointSet",
    "Route",
    "GridDensity",
    "RandomSeed",
    "BETA_TSP_BRACKET",
    "route_length",
    "total_latency",
    "last_latency",
    "sample_points",
    "bucket_counts",
    "cell_ids",
    "latency_growth_constant",
    "discretize_density",
    "pdf_cell_mass",
    "stable_stream",
    "save_points_csv",
    "load_points_csv",
    "density_to_json",
    "density_from_json",
]

# Legal bracket for the square-root growth constant of optimal tours on
# uniform points.  The library never asserts a specific value inside it;
# it is exposed for callers that want a configured estimate.
BETA_TSP_BRACKET = (0.6250, 0.9204)


class Point(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class Square:
    """Axis-aligned square given by its lower-left corner and side length."""

    origin: tuple[float, float]
    side: float

    def __post_init__(self):
        ox, oy = self.origin
        if not (math.isfinite(ox) and math.isfinite(oy) and math.isfinite(self.side)):
            raise ValueError("square parameters must be finite")
        if self.side <= 0:
            raise ValueError("square side must be positive")

    @property
    def area(self) -> float:
        return self.side * self.side

    def contains(self, x: float, y: float) -> bool:
        ox, oy = self.origin
        return ox <= x <= ox + self.side and oy <= y <= oy + self.side

    def cell(self, m: int, k: int) -> "Square":
        """Sub-square k (row-major, bottom row first) of the m x m partition."""
        if not 0 <= k < m * m:
            raise ValueError(f"cell index {k} out of range for m={m}")
        h = self.side / m
        row, col = divmod(k, m)
        return Square((self.origin[0] + col * h, self.origin[1] + row * h), h)

    def cell_center(self, m: int, k: int) -> Point:
        c = self.cell(m, k)
        return Point(c.origin[0] + c.side / 2, c.origin[1] + c.side / 2)


UNIT_SQUARE = Square((0.0, 0.0), 1.0)


def _frozen_array(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PointSet:
    """An ordered sample of planar points inside a closed bounding square."""

    coords: np.ndarray
    square: Square = UNIT_SQUARE

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float64)
        if coords.size == 0:
            coords = coords.reshape(0, 2)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise ValueError("coords must have shape (n, 2)")
        if not np.all(np.isfinite(coords)):
            raise ValueError("coordinates must be finite")
        ox, oy = self.square.origin
        s = self.square.side
        if coords.shape[0] and not (
            np.all(coords[:, 0] >= ox)
            and np.all(coords[:, 0] <= ox + s)
            and np.all(coords[:, 1] >= oy)
            and np.all(coords[:, 1] <= oy + s)
        ):
            raise ValueError("all points must lie inside the bounding square")
        coords = coords.copy()
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @classmethod
    def from_points(cls, points: Iterable[tuple[float, float]], square: Square = UNIT_SQUARE) -> "PointSet":
        pts = list(points)
        arr = np.array(pts, dtype=np.float64).reshape(len(pts), 2)
        return cls(arr, square)

    def __len__(self) -> int:
        return self.coords.shape[0]

    def point(self, i: int) -> Point:
        return Point(float(self.coords[i, 0]), float(self.coords[i, 1]))

    def subset(self, indices: Sequence[int], square: Square | None = None) -> "PointSet":
        """Point set restricted to ``indices``, optionally with a tighter square."""
        return PointSet(self.coords[list(indices)], square or self.square)


@dataclass(frozen=True)
class Route:
    """A visiting order over point indices; closed routes return to the start."""

    order: tuple[int, ...]
    closed: bool

    def __post_init__(self):
        order = tuple(int(i) for i in self.order)
        if any(i < 0 for i in order):
            raise ValueError("route indices must be nonnegative")
        if len(set(order)) != len(order):
            raise ValueError("route indices must be distinct")
        object.__setattr__(self, "order", order)

    def __len__(self) -> int:
        return len(self.order)


def _route_points(route: Route, ps: PointSet) -> np.ndarray:
    n = len(ps)
    if any(i >= n for i in route.order):
        raise ValueError("route index out of range for the point set")
    return ps.coords[list(route.order)]


def route_length(route: Route, ps: PointSet) -> float:
    """Euclidean length of the route; closed routes include the return edge."""
    pts = _route_points(route, ps)
    if len(pts) < 2:
        return 0.0
    diffs = np.diff(pts, axis=0)
    length = float(np.hypot(diffs[:, 0], diffs[:, 1]).sum())
    if route.closed:
        length += float(np.hypot(*(pts[0] - pts[-1])))
    return length


def total_latency(route: Route, ps: PointSet) -> float:
    """Sum of waiting distances over an open visiting order.

    The i-th visited point waits for the path travelled before it, so edge
    i contributes with multiplicity (n - i).  The closing edge of a tour
    carries no latency, hence closed routes are rejected.
    """
    if route.closed:
        raise ValueError("latency is defined along an open visiting order")
    pts = _route_points(route, ps)
    n = len(pts)
    if n < 2:
        return 0.0
    diffs = np.diff(pts, axis=0)
    edges = np.hypot(diffs[:, 0], diffs[:, 1])
    weights = np.arange(n - 1, 0, -1, dtype=np.float64)
    return float(weights @ edges)


def last_latency(route: Route, ps: PointSet) -> float:
    """Waiting distance of the final visited point (max-min objective)."""
    if route.closed:
        raise ValueError("latency is defined along an open visiting order")
    if len(route) == 0:
        raise ValueError("last latency of an empty route is undefined")
    return route_length(route, ps)


# ---------------------------------------------------------------------------
# Reproducible randomness


@dataclass(frozen=True)
class RandomSeed:
    """A (master seed, stream index) pair identifying one random stream.

    Identical pairs reproduce identical sample sequences.  Concurrent tasks
    must each use their own stream; :meth:`child` derives one stably from
    string/integer keys so stream assignment does not depend on scheduling.
    """

    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must fit in 64 bits")
        if not 0 <= self.stream_index < 2**64:
            raise ValueError("stream_index must be a nonnegative 64-bit integer")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(
            entropy=self.master_seed,
            spawn_key=(self.stream_index & 0xFFFFFFFF, self.stream_index >> 32),
        )
        return np.random.Generator(np.random.PCG64(ss))

    def stream(self, index: int) -> "RandomSeed":
        return RandomSeed(self.master_seed, index)

    def child(self, *keys) -> "RandomSeed":
        return RandomSeed(self.master_seed, stable_stream(self.stream_index, *keys))


def stable_stream(*parts) -> int:
    """Stable 64-bit stream index from arbitrary string/int parts."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(str(part).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "big")


# ---------------------------------------------------------------------------
# Grid densities


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Piecewise-constant density on the m x m partition of a square.

    ``cells`` holds relative levels in row-major order (bottom row first)
    and averages to one, so cell k receives probability ``cells[k] / m**2``.
    """

    m: int
    cells: np.ndarray
    square: Square = UNIT_SQUARE

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("grid resolution m must be at least 1")
        cells = np.asarray(self.cells, dtype=np.float64).reshape(-1)
        if cells.shape[0] != self.m * self.m:
            raise ValueError(f"expected {self.m * self.m} cell values, got {cells.shape[0]}")
        if not np.all(np.isfinite(cells)) or np.any(cells < 0):
            raise ValueError("cell values must be finite and nonnegative")
        if abs(cells.mean() - 1.0) > 1e-9:
            raise ValueError("cell values must average to 1 (density normalization)")
        cells = cells.copy()
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @classmethod
    def uniform(cls, m: int, square: Square = UNIT_SQUARE) -> "GridDensity":
        return cls(m, np.ones(m * m), square)

    @classmethod
    def from_raw(cls, m: int, raw, square: Square = UNIT_SQUARE) -> "GridDensity":
        """Normalize nonnegative raw cell masses into a valid density."""
        raw = np.asarray(raw, dtype=np.float64).reshape(-1)
        if np.any(raw < 0):
            raise ValueError("cell masses must be nonnegative")
        total = raw.sum()
        if total <= 0:
            raise ValueError("cell masses must not all be zero")
        return cls(m, raw * (m * m / total), square)

    @property
    def supported_cells(self) -> np.ndarray:
        return np.flatnonzero(self.cells > 0)

    def cell_rect(self, k: int) -> Square:
        return self.square.cell(self.m, k)

    def max_cell(self) -> int:
        """Index of the highest-density cell (ties broken by lowest index)."""
        return int(np.argmax(self.cells))


def cell_ids(coords: np.ndarray, square: Square, m: int) -> np.ndarray:
    """Row-major cell index of each point under the half-open convention.

    Left/bottom cell edges are inclusive; the square's top/right boundary
    belongs to the last row/column so the cells form a true partition.
    """
    coords = np.asarray(coords, dtype=np.float64).reshape(-1, 2)
    ox, oy = square.origin
    s = square.side
    if coords.shape[0] and not (
        np.all(coords[:, 0] >= ox)
        and np.all(coords[:, 0] <= ox + s)
        and np.all(coords[:, 1] >= oy)
        and np.all(coords[:, 1] <= oy + s)
    ):
        raise ValueError("point outside the bounding square")
    h = s / m
    col = np.clip(np.floor((coords[:, 0] - ox) / h).astype(np.int64), 0, m - 1)
    row = np.clip(np.floor((coords[:, 1] - oy) / h).astype(np.int64), 0, m - 1)
    return row * m + col


def bucket_counts(ps: PointSet, d: GridDensity) -> np.ndarray:
    """Number of points in each cell of the density's grid."""
    ids = cell_ids(ps.coords, d.square, d.m)
    return np.bincount(ids, minlength=d.m * d.m)


def sample_points(d: GridDensity, n: int, seed: RandomSeed) -> PointSet:
    """Draw n i.i.d. points: pick a cell by its mass, then uniform within it."""
    if n < 0:
        raise ValueError("sample size must be nonnegative")
    rng = seed.generator()
    m = d.m
    probs = d.cells / (m * m)
    ids = rng.choice(m * m, size=n, p=probs)
    offsets = rng.random((n, 2))
    h = d.square.side / m
    rows, cols = np.divmod(ids, m)
    xs = d.square.origin[0] + (cols + offsets[:, 0]) * h
    ys = d.square.origin[1] + (rows + offsets[:, 1]) * h
    return PointSet(np.column_stack([xs, ys]), d.square)


def latency_growth_constant(d: GridDensity) -> float:
    """Distribution-dependent constant of the latency growth law.

    For a piecewise-constant density the defining double integral reduces
    to a sum over distinct density levels: each level contributes its mass
    times the square root of the level, counting lower levels fully and
    equal levels (including the level against itself) with weight 1/2.
    Uniform densities give exactly 0.5 on the unit square; the value scales
    linearly with the side of the bounding square.
    """
    m2 = d.m * d.m
    levels, counts = np.unique(d.cells, return_counts=True)
    keep = levels > 0
    levels, counts = levels[keep], counts[keep]
    weights = counts / m2
    mass = levels * weights
    below = np.cumsum(mass) - mass
    base = float(np.sum(np.sqrt(levels) * weights * (0.5 * mass + below)))
    return d.square.side * base


def discretize_density(mass_fn: Callable[[Square], float], m: int, square: Square = UNIT_SQUARE) -> GridDensity:
    """Build a grid density from a per-cell mass evaluator.

    ``mass_fn`` receives each cell rectangle and returns its (exact or
    numerically integrated) probability mass; the result is rescaled so the
    cell values average to one.
    """
    if m < 1:
        raise ValueError("grid resolution m must be at least 1")
    masses = np.empty(m * m)
    for k in range(m * m):
        mass = float(mass_fn(square.cell(m, k)))
        if not math.isfinite(mass) or mass < 0:
            raise ValueError(f"cell {k} has invalid mass {mass}")
        masses[k] = mass
    return GridDensity.from_raw(m, masses, square)


def pdf_cell_mass(pdf: Callable[[float, float], float], order: int = 8) -> Callable[[Square], float]:
    """Cell-mass evaluator for a pointwise density via tensor Gauss quadrature."""
    nodes, weights = np.polynomial.legendre.leggauss(order)

    def mass(cell: Square) -> float:
        half = cell.side / 2.0
        cx = cell.origin[0] + half
        cy = cell.origin[1] + half
        xs = cx + half * nodes
        ys = cy + half * nodes
        vals = np.array([[pdf(x, y) for x in xs] for y in ys])
        return float(weights @ vals @ weights) * half * half

    return mass


# ---------------------------------------------------------------------------
# Serialization


def save_points_csv(ps: PointSet, path) -> None:
    """Write a point set as CSV with header x,y at 17 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y"])
        for x, y in ps.coords:
            writer.writerow([f"{x:.17g}", f"{y:.17g}"])


def load_points_csv(path, square: Square | None = None) -> PointSet:
    """Read a point CSV; infers a snug bounding square when none is given."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["x", "y"]:
            raise ValueError("point CSV must start with header 'x,y'")
        pts = [(float(row[0]), float(row[1])) for row in reader if row]
    if square is None:
        if pts:
            xs = [p[0] for p in pts]
            ys = [p[1] for p in pts]
            side = max(max(xs) - min(xs), max(ys) - min(ys))
            square = Square((min(xs), min(ys)), side if side > 0 else 1.0)
        else:
            square = UNIT_SQUARE
    arr = np.array(pts, dtype=np.float64).reshape(len(pts), 2)
    return PointSet(arr, square)


def density_to_json(d: GridDensity) -> dict:
    return {
        "m": d.m,
        "cells": [float(v) for v in d.cells],
        "square": {"origin": [d.square.origin[0], d.square.origin[1]], "side": d.square.side},
    }


def density_from_json(obj: dict | str) -> GridDensity:
    if isinstance(obj, str):
        obj = json.loads(obj)
    sq = obj.get("square", {"origin": [0.0, 0.0], "side": 1.0})
    square = Square((float(sq["origin"][0]), float(sq["origin"][1])), float(sq["side"]))
    return GridDensity(int(obj["m"]), np.asarray(obj["cells"], dtype=np.float64), square)
