"""Tour construction subroutines: strip tour, 2-opt polish, exact oracle.

The serpentine strip tour is the workhorse used by every approximation
scheme in this package: it is deterministic, runs in O(n log n), and its
length is provably at most (2 sqrt(n) + 4) times the side of the bounding
square.  The 2-opt pass improves it locally, and the subset dynamic program
provides ground truth on small instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import PointSet, Route, route_length
from .errors import CapacityError

__all__ = ["TspResult", "STRIP_SLACK", "strip_tour", "two_opt", "strip_two_opt", "tsp_exact"]

# Additive slack of the serpentine bound, in units of the square side.
STRIP_SLACK = 4.0

EXACT_TSP_MAX_N = 15


@dataclass(frozen=True)
class TspResult:
    route: Route
    length: float
    method: str


def strip_tour(ps: PointSet) -> TspResult:
    """Serpentine tour over ceil(sqrt(n)) horizontal strips.

    Points are bucketed by strip, sorted by x with alternating direction,
    concatenated bottom-to-top and closed.  The resulting length is at most
    (2*sqrt(n) + 4) * side for every input.
    """
    n = len(ps)
    if n == 0:
        raise ValueError("strip tour of an empty point set is undefined")
    if n == 1:
        return TspResult(Route((0,), closed=True), 0.0, "strip")
    strips = math.isqrt(n - 1) + 1  # ceil(sqrt(n))
    h = ps.square.side / strips
    ys = ps.coords[:, 1] - ps.square.origin[1]
    strip = np.clip(np.floor(ys / h).astype(np.int64), 0, strips - 1)
    xs = np.where(strip % 2 == 0, ps.coords[:, 0], -ps.coords[:, 0])
    order = np.lexsort((xs, strip))
    route = Route(tuple(int(i) for i in order), closed=True)
    length = route_length(route, ps)
    assert length <= (2.0 * math.sqrt(n) + STRIP_SLACK) * ps.square.side + 1e-9
    return TspResult(route, length, "strip")


def two_opt(ps: PointSet, start: Route) -> TspResult:
    """First-improvement 2-opt on a closed route, capped at 50*n moves."""
    if not start.closed:
        raise ValueError("two_opt expects a closed starting route")
    order = list(start.order)
    t = len(order)
    if t < 4:
        return TspResult(start, route_length(start, ps), "strip+2opt")

    pts = ps.coords[order].copy()
    xs, ys = pts[:, 0], pts[:, 1]

    def edge_lengths():
        return np.hypot(xs - np.roll(xs, -1), ys - np.roll(ys, -1))

    d_next = edge_lengths()
    eps = 1e-12 * max(1.0, ps.square.side)
    cap = 50 * t
    moves = 0
    improved = True
    while improved and moves < cap:
        improved = False
        i = 0
        while i < t - 2 and moves < cap:
            js = np.arange(i + 2, t)
            delta = (
                np.hypot(xs[i] - xs[js], ys[i] - ys[js])
                + np.hypot(xs[i + 1] - xs[(js + 1) % t], ys[i + 1] - ys[(js + 1) % t])
                - d_next[i]
                - d_next[js]
            )
            hit = np.flatnonzero(delta < -eps)
            if hit.size:
                j = int(js[hit[0]])
                order[i + 1 : j + 1] = order[i + 1 : j + 1][::-1]
                xs[i + 1 : j + 1] = xs[i + 1 : j + 1][::-1]
                ys[i + 1 : j + 1] = ys[i + 1 : j + 1][::-1]
                d_next = edge_lengths()
                moves += 1
                improved = True
                # re-scan the same row: the reversal may expose further moves
            else:
                i += 1
    route = Route(tuple(order), closed=True)
    return TspResult(route, route_length(route, ps), "strip+2opt")


def strip_two_opt(ps: PointSet) -> TspResult:
    """Strip tour followed by the 2-opt polish."""
    return two_opt(ps, strip_tour(ps).route)


def tsp_exact(ps: PointSet) -> TspResult:
    """Shortest closed tour by dynamic programming over (visited set, last).

    Hard-capped at n <= 15 since state space grows as n * 2^n.
    """
    n = len(ps)
    if n < 1:
        raise ValueError("exact tour of an empty point set is undefined")
    if n > EXACT_TSP_MAX_N:
        raise CapacityError(f"tsp_exact supports at most {EXACT_TSP_MAX_N} points, got {n}")
    if n <= 2:
        route = Route(tuple(range(n)), closed=True)
        return TspResult(route, route_length(route, ps), "exact")

    diff = ps.coords[:, None, :] - ps.coords[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])

    # Fix vertex 0 as the tour anchor; cyclic symmetry makes this lossless.
    size = 1 << n
    inf = math.inf
    cost = [[inf] * n for _ in range(size)]
    parent = [[-1] * n for _ in range(size)]
    cost[1][0] = 0.0
    for mask in range(1, size):
        if not mask & 1:
            continue
        row = cost[mask]
        for last in range(n):
            c = row[last]
            if c == inf:
                continue
            drow = dist[last]
            for nxt in range(1, n):
                if mask & (1 << nxt):
                    continue
                nmask = mask | (1 << nxt)
                nc = c + drow[nxt]
                if nc < cost[nmask][nxt]:
                    cost[nmask][nxt] = nc
                    parent[nmask][nxt] = last
    full = size - 1
    best_last, best = -1, inf
    for last in range(1, n):
        total = cost[full][last] + dist[last][0]
        if total < best:
            best, best_last = total, last
    order = []
    mask, last = full, best_last
    while last != -1:
        order.append(last)
        mask, last = mask ^ (1 << last), parent[mask][last]
    order.reverse()
    route = Route(tuple(order), closed=True)
    return TspResult(route, route_length(route, ps), "exact")
