"""Latency-minimizing service: density-ordered a priori scheme and oracle.

The a priori scheme is a master plan computed from the distribution alone:
visit grid cells by decreasing density, tour the realized points of each
cell locally, and glue the local tours with straight links.  The subset
dynamic program gives the true minimum total latency on small instances,
and the subpath-ordering helpers expose the sorting rule that makes the
density order optimal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    GridDensity,
    Point,
    PointSet,
    Route,
    cell_ids,
    latency_growth_constant,
    total_latency,
)
from .errors import CapacityError
from .tsp import strip_two_opt

__all__ = [
    "TrpResult",
    "WeightedSubpath",
    "trp_apriori_scheme",
    "trp_exact",
    "optimal_subpath_order",
    "subpath_objective",
    "trp_factor_check",
]

EXACT_TRP_MAX_N = 13


@dataclass(frozen=True)
class TrpResult:
    """Open route over all points with its total latency.

    ``cell_order`` lists the visited (nonempty) cells in service order and
    ``per_cell_last_latency`` the waiting distance of the last point served
    in each of them.  Both are empty for oracle results, which do not go
    through the cell decomposition.
    """

    route: Route
    latency: float
    cell_order: tuple[int, ...] = ()
    per_cell_last_latency: tuple[float, ...] = ()
    depot_offset: float = 0.0

    def to_json(self) -> dict:
        return {
            "latency": self.latency,
            "n": len(self.route),
            "cell_order": list(self.cell_order),
            "order": list(self.route.order),
        }


@dataclass(frozen=True)
class WeightedSubpath:
    """A chunk of service: how many points it visits at which density level."""

    n_visited: int
    density: float

    def __post_init__(self):
        if self.n_visited < 1:
            raise ValueError("a subpath must visit at least one point")
        if not self.density > 0:
            raise ValueError("subpath density must be positive")


def trp_apriori_scheme(ps: PointSet, d: GridDensity, depot: Point | None = None) -> TrpResult:
    """Serve cells by decreasing density, touring each cell's points locally.

    Cells tie-break by lowest index.  Each nonempty cell gets a strip+2-opt
    tour, opened at the vertex nearest the previous cell's exit (the square
    origin, or the depot when given, for the first cell) and traversed in
    tour orientation; consecutive cells are linked by a straight edge.
    With a depot, the depot-to-entry distance is added to every point's
    wait and reported via ``depot_offset``.
    """
    if d.square != ps.square:
        raise ValueError("density and point set must share the bounding square")
    n = len(ps)
    if n == 0:
        return TrpResult(Route((), closed=False), 0.0)

    m = d.m
    ids = cell_ids(ps.coords, d.square, m)
    # decreasing density, lowest index first among ties; zero-density cells
    # holding stray points are served last under the same rule
    priority = np.lexsort((np.arange(m * m), -d.cells))
    start = np.array(depot, dtype=float) if depot is not None else np.array(d.square.origin, dtype=float)

    order: list[int] = []
    visited_cells: list[int] = []
    last_positions: list[int] = []
    exit_pos = start
    for cell in priority:
        members = np.flatnonzero(ids == cell)
        if members.size == 0:
            continue
        sub = ps.subset(members, d.cell_rect(int(cell)))
        tour = list(strip_two_opt(sub).route.order)
        dists = np.hypot(sub.coords[tour, 0] - exit_pos[0], sub.coords[tour, 1] - exit_pos[1])
        entry = int(np.argmin(dists))
        path = tour[entry:] + tour[:entry]
        order.extend(int(members[i]) for i in path)
        visited_cells.append(int(cell))
        last_positions.append(len(order) - 1)
        exit_pos = ps.coords[order[-1]]

    route = Route(tuple(order), closed=False)
    pts = ps.coords[list(order)]
    steps = np.hypot(*(np.diff(pts, axis=0).T)) if n > 1 else np.zeros(0)
    prefix = np.concatenate([[0.0], np.cumsum(steps)])
    depot_offset = 0.0
    if depot is not None:
        depot_offset = n * float(np.hypot(pts[0, 0] - depot.x, pts[0, 1] - depot.y))
    latency = total_latency(route, ps) + depot_offset
    per_cell = tuple(float(prefix[p]) for p in last_positions)
    return TrpResult(route, latency, tuple(visited_cells), per_cell, depot_offset)


def trp_exact(ps: PointSet) -> TrpResult:
    """Minimum total latency over all open visiting orders (free start).

    Dynamic program over (visited set, last); extending a partial order of
    size s charges the new edge (n - s) times.  Capped at n <= 13.
    """
    n = len(ps)
    if n > EXACT_TRP_MAX_N:
        raise CapacityError(f"trp_exact supports at most {EXACT_TRP_MAX_N} points, got {n}")
    if n == 0:
        return TrpResult(Route((), closed=False), 0.0)
    if n == 1:
        return TrpResult(Route((0,), closed=False), 0.0)

    diff = ps.coords[:, None, :] - ps.coords[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])

    inf = math.inf
    size = 1 << n
    popcount = [bin(mask).count("1") for mask in range(size)]
    cost = [[inf] * n for _ in range(size)]
    parent = [[-1] * n for _ in range(size)]
    for v in range(n):
        cost[1 << v][v] = 0.0
    for mask in range(1, size):
        s = popcount[mask]
        if s == n:
            continue
        weight = n - s
        row = cost[mask]
        for last in range(n):
            c = row[last]
            if c == inf:
                continue
            drow = dist[last]
            for nxt in range(n):
                if mask & (1 << nxt):
                    continue
                nmask = mask | (1 << nxt)
                nc = c + weight * drow[nxt]
                if nc < cost[nmask][nxt]:
                    cost[nmask][nxt] = nc
                    parent[nmask][nxt] = last
    full = size - 1
    best_last = min(range(n), key=lambda v: cost[full][v])
    order = []
    mask, last = full, best_last
    while last != -1:
        order.append(last)
        mask, last = mask ^ (1 << last), parent[mask][last]
    order.reverse()
    route = Route(tuple(order), closed=False)
    return TrpResult(route, total_latency(route, ps))


def subpath_objective(subpaths: Sequence[WeightedSubpath], perm: Sequence[int]) -> float:
    """Weighted tail count objective for a given service permutation.

    Position i contributes n_i / sqrt(density_i) times the number of points
    still waiting after it.
    """
    perm = list(perm)
    if sorted(perm) != list(range(len(subpaths))):
        raise ValueError("perm must be a permutation of the subpath indices")
    counts = [subpaths[p].n_visited for p in perm]
    tail = np.concatenate([np.cumsum(counts[::-1])[::-1][1:], [0.0]])
    coeff = np.array([counts[i] / math.sqrt(subpaths[p].density) for i, p in enumerate(perm)])
    return float(coeff @ tail)


def optimal_subpath_order(subpaths: Sequence[WeightedSubpath]) -> tuple[int, ...]:
    """Permutation minimizing the weighted tail objective: decreasing density.

    Ties keep the original order, so the result is stable and deterministic.
    """
    if not subpaths:
        raise ValueError("subpath list must be nonempty")
    return tuple(sorted(range(len(subpaths)), key=lambda i: (-subpaths[i].density, i)))


def trp_factor_check(ps: PointSet, d: GridDensity) -> float:
    """Scheme latency divided by n*sqrt(n) times the density growth constant."""
    n = len(ps)
    if n == 0:
        raise ValueError("factor check needs at least one point")
    g = latency_growth_constant(d)
    if g <= 0:
        raise ValueError("density growth constant is zero; ratio undefined")
    result = trp_apriori_scheme(ps, d)
    return result.latency / (n * math.sqrt(n) * g)
