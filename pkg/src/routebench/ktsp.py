"""Open paths through k of n points: grid scheme, exact oracle, rate bounds.

The grid scheme exploits local concentration: partition the square at a
resolution tuned to (k, n), serve k points inside one crowded cell, and
coarsen the grid until such a cell exists.  The exact oracle and the
analytic rate/tail evaluators make the scheme's behaviour falsifiable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import GridDensity, PointSet, Route, cell_ids, route_length
from .errors import CapacityError
from .tsp import strip_two_opt

__all__ = [
    "KtspResult",
    "ktsp_grid_scheme",
    "ktsp_nonuniform_scheme",
    "ktsp_exact",
    "ktsp_rate",
    "ktsp_tail_bound",
]

EXACT_KTSP_MAX_N = 12


@dataclass(frozen=True)
class KtspResult:
    """Open path over exactly k point indices.

    ``alpha_used`` is the coarsening step at which the grid scheme found a
    crowded cell and ``cell_chosen`` that cell's row-major index in the
    scheme's internal grid.  ``density_cell`` is set by the density-aware
    variant to the density cell the search was restricted to.
    """

    route: Route
    length: float
    alpha_used: int
    cell_chosen: int | None
    density_cell: int | None = None

    def to_json(self) -> dict:
        return {
            "length": self.length,
            "k": len(self.route),
            "alpha_used": self.alpha_used,
            "cell_chosen": self.cell_chosen,
            "order": list(self.route.order),
        }


def _validate_k(k: int, n: int) -> None:
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points n={n}")


def _grid_resolution(alpha: int, k: int, n: int, area: float) -> int:
    m = math.floor(math.sqrt(n ** (1.0 + 1.0 / (k - 1)) / (area * (k - 1))) / alpha)
    return max(m, 1)


def _open_at_longest_edge(order: list[int], coords: np.ndarray) -> list[int]:
    """Cut a closed tour at its longest edge, yielding an open path."""
    pts = coords[order]
    nxt = np.roll(pts, -1, axis=0)
    edges = np.hypot(pts[:, 0] - nxt[:, 0], pts[:, 1] - nxt[:, 1])
    cut = int(np.argmax(edges))
    return order[cut + 1 :] + order[: cut + 1]


def ktsp_grid_scheme(ps: PointSet, k: int) -> KtspResult:
    """Serve k points inside one crowded cell of a self-tuned grid.

    Starting from the finest resolution, the square is partitioned into
    equal cells; if some cell holds at least k points (ties broken by the
    lowest row-major index), the k points nearest that cell's center are
    toured with the strip construction plus 2-opt, and the tour is opened
    by dropping its longest edge.  Otherwise the grid is coarsened and the
    search repeats; the single-cell grid always succeeds, so the loop
    terminates.
    """
    n = len(ps)
    _validate_k(k, n)
    area = ps.square.area
    alpha = 0
    while True:
        alpha += 1
        m = _grid_resolution(alpha, k, n, area)
        ids = cell_ids(ps.coords, ps.square, m)
        cells, counts = np.unique(ids, return_counts=True)
        crowded = cells[counts >= k]
        if crowded.size:
            cell = int(crowded[0])
            break
        if m == 1:  # single cell holds all n >= k points; unreachable guard
            raise RuntimeError("grid scheme failed to terminate")

    members = np.flatnonzero(ids == cell)
    cx, cy = ps.square.cell_center(m, cell)
    d2 = (ps.coords[members, 0] - cx) ** 2 + (ps.coords[members, 1] - cy) ** 2
    chosen = members[np.lexsort((members, d2))][:k]

    sub = ps.subset(chosen, ps.square.cell(m, cell))
    tour = strip_two_opt(sub)
    local_open = _open_at_longest_edge(list(tour.route.order), sub.coords)
    order = tuple(int(chosen[i]) for i in local_open)
    route = Route(order, closed=False)
    return KtspResult(route, route_length(route, ps), alpha, cell)


def ktsp_nonuniform_scheme(ps: PointSet, d: GridDensity, k: int) -> KtspResult:
    """Grid scheme restricted to the highest-density cell of ``d``.

    The crowded-cell search runs inside that cell treated as the compact
    space (ties between equal-density cells break to the lowest index).
    If the cell holds fewer than k points the scheme falls back to the
    plain grid scheme on the whole square.
    """
    n = len(ps)
    _validate_k(k, n)
    if d.square != ps.square:
        raise ValueError("density and point set must share the bounding square")
    target = d.max_cell()
    ids = cell_ids(ps.coords, d.square, d.m)
    members = np.flatnonzero(ids == target)
    if members.size < k:
        return ktsp_grid_scheme(ps, k)
    sub = ps.subset(members, d.cell_rect(target))
    inner = ktsp_grid_scheme(sub, k)
    order = tuple(int(members[i]) for i in inner.route.order)
    route = Route(order, closed=False)
    return KtspResult(route, route_length(route, ps), inner.alpha_used, inner.cell_chosen, density_cell=target)


def ktsp_exact(ps: PointSet, k: int) -> KtspResult:
    """Shortest open path through exactly k of the n points.

    k = 2 and k = 3 are solved in closed form for any n (closest pair,
    best middle point); larger k runs a subset dynamic program and is
    capped at n <= 12.
    """
    n = len(ps)
    _validate_k(k, n)
    diff = ps.coords[:, None, :] - ps.coords[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])

    if k == 2:
        masked = dist + np.where(np.eye(n, dtype=bool), np.inf, 0.0)
        flat = int(np.argmin(masked))
        i, j = divmod(flat, n)
        order = (min(i, j), max(i, j))
        route = Route(order, closed=False)
        return KtspResult(route, float(masked[i, j]), 0, None)

    if k == 3:
        masked = dist + np.where(np.eye(n, dtype=bool), np.inf, 0.0)
        nearest2 = np.argsort(masked, axis=1, kind="stable")[:, :2]
        totals = np.take_along_axis(masked, nearest2, axis=1).sum(axis=1)
        mid = int(np.argmin(totals))
        a, b = int(nearest2[mid, 0]), int(nearest2[mid, 1])
        route = Route((a, mid, b), closed=False)
        return KtspResult(route, float(totals[mid]), 0, None)

    if n > EXACT_KTSP_MAX_N:
        raise CapacityError(f"ktsp_exact supports at most {EXACT_KTSP_MAX_N} points for k >= 4, got {n}")

    inf = math.inf
    size = 1 << n
    popcount = [bin(mask).count("1") for mask in range(size)]
    cost = [dict() for _ in range(size)]
    parent = [dict() for _ in range(size)]
    for v in range(n):
        cost[1 << v][v] = 0.0
        parent[1 << v][v] = -1
    best = inf
    best_state = None
    for mask in range(1, size):
        pc = popcount[mask]
        if pc > k or not cost[mask]:
            continue
        if pc == k:
            for last, c in cost[mask].items():
                if c < best:
                    best = c
                    best_state = (mask, last)
            continue
        for last, c in cost[mask].items():
            drow = dist[last]
            for nxt in range(n):
                if mask & (1 << nxt):
                    continue
                nmask = mask | (1 << nxt)
                nc = c + drow[nxt]
                if nc < cost[nmask].get(nxt, inf):
                    cost[nmask][nxt] = nc
                    parent[nmask][nxt] = last
    assert best_state is not None
    order = []
    mask, last = best_state
    while last != -1:
        order.append(last)
        mask, last = mask ^ (1 << last), parent[mask][last]
    order.reverse()
    route = Route(tuple(order), closed=False)
    return KtspResult(route, route_length(route, ps), 0, None)


def ktsp_rate(k: int, n: int, area: float) -> float:
    """Constant-free growth-rate term (k-1) / n^((1/2)(1+1/(k-1))) * sqrt(area)."""
    if k < 2:
        raise ValueError("k must be at least 2")
    if n < k:
        raise ValueError("n must be at least k")
    if area <= 0:
        raise ValueError("area must be positive")
    exponent = 0.5 * (1.0 + 1.0 / (k - 1))
    return (k - 1) / n**exponent * math.sqrt(area)


def ktsp_tail_bound(k: int, n: int, area: float, threshold: float) -> float:
    """Upper bound on P[shortest k-point path <= threshold], capped at 1.

    Evaluated in log space as n^k * (2*pi*threshold^2 / area)^(k-1) / (2k-2)!
    to avoid overflow; a zero threshold gives probability zero.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    if n < k:
        raise ValueError("n must be at least k")
    if area <= 0:
        raise ValueError("area must be positive")
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    if threshold == 0:
        return 0.0
    log_bound = (
        k * math.log(n)
        + (k - 1) * (math.log(2 * math.pi) + 2 * math.log(threshold) - math.log(area))
        - math.lgamma(2 * k - 1)
    )
    if log_bound >= 0:
        return 1.0
    return math.exp(log_bound)
