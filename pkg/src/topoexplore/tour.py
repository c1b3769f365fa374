"""Open-tour asymmetric TSP over graph path costs.

Index 0 is the fixed start. The return column is zeroed, so an optimal
closed tour on the resulting matrix is an optimal open path from node 0.
Small instances are solved exactly with Held-Karp; larger ones use a
nearest-neighbour tour refined by segment-reversal (2-opt) moves whose
asymmetric cost change is evaluated with prefix sums.
"""

from __future__ import annotations

import numpy as np

from .errors import UnreachableFrontiersError

EXACT_LIMIT = 12


def _prepare(cost_matrix) -> np.ndarray:
    c = np.array(cost_matrix, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] < 1:
        raise ValueError("cost matrix must be square and non-empty")
    c[:, 0] = 0.0
    off = ~np.eye(len(c), dtype=bool)
    bad = ~np.isfinite(c) & off
    if bad.any():
        lost = np.flatnonzero(bad[0])
        if not len(lost):
            lost = np.flatnonzero(bad.any(axis=0))
        raise UnreachableFrontiersError([int(j) for j in lost])
    return c


def tour_cost(cost_matrix, order) -> float:
    """Open-path cost 0 -> order[0] -> ... -> order[-1], summed left to right."""
    c = np.asarray(cost_matrix, dtype=np.float64)
    total = 0.0
    prev = 0
    for j in order:
        total += c[prev, j]
        prev = j
    return float(total)


def held_karp(c: np.ndarray) -> list[int]:
    m = len(c) - 1
    if m == 0:
        return []
    full = 1 << m
    dp = np.full((full, m), np.inf)
    par = np.full((full, m), -1, dtype=np.int64)
    for j in range(m):
        dp[1 << j, j] = c[0, j + 1]
    masks = np.arange(full)
    popcount = np.zeros(full, dtype=np.int64)
    for j in range(m):
        popcount += (masks >> j) & 1
    sub = c[1:, 1:]
    for size in range(2, m + 1):
        layer = masks[popcount == size]
        for j in range(m):
            sel = layer[(layer >> j) & 1 == 1]
            prev = sel ^ (1 << j)
            cand = dp[prev] + sub[:, j]
            best = np.argmin(cand, axis=1)
            dp[sel, j] = cand[np.arange(len(sel)), best]
            par[sel, j] = best
    last = int(np.argmin(dp[full - 1]))
    order = []
    mask = full - 1
    while last >= 0:
        order.append(last + 1)
        nxt = int(par[mask, last])
        mask ^= 1 << last
        last = nxt
    return order[::-1]


def nearest_neighbor(c: np.ndarray) -> list[int]:
    m = len(c) - 1
    left = list(range(1, m + 1))
    order = []
    cur = 0
    while left:
        row = c[cur, left]
        k = int(np.argmin(row))
        cur = left.pop(k)
        order.append(cur)
    return order


def two_opt(c: np.ndarray, order: list[int], max_passes: int = 10_000) -> list[int]:
    tour = np.array([0] + list(order), dtype=np.int64)
    m = len(tour) - 1
    if m < 2:
        return list(order)
    for _ in range(max_passes):
        nxt = np.append(tour[1:], 0)
        fwd = c[tour, nxt]
        bwd = c[nxt, tour]
        pf = np.concatenate([[0.0], np.cumsum(fwd)])
        pb = np.concatenate([[0.0], np.cumsum(bwd)])
        # reverse tour[i..j], 1 <= i < j <= m
        i = np.arange(1, m + 1)[:, None]
        j = np.arange(1, m + 1)[None, :]
        valid = j > i
        ii = np.where(valid, i, 1)
        jj = np.where(valid, j, 2)
        after = np.where(jj < m, tour[np.minimum(jj + 1, m)], 0)
        delta = (c[tour[ii - 1], tour[jj]] + c[tour[ii], after]
                 - c[tour[ii - 1], tour[ii]] - c[tour[jj], after]
                 + (pb[jj] - pb[ii]) - (pf[jj] - pf[ii]))
        delta = np.where(valid, delta, np.inf)
        k = int(np.argmin(delta))
        if not delta.flat[k] < -1e-12:
            break
        bi, bj = divmod(k, m)
        bi, bj = bi + 1, bj + 1
        tour[bi:bj + 1] = tour[bi:bj + 1][::-1].copy()
    return tour[1:].tolist()


def solve_atsp(cost_matrix, exact_limit: int = EXACT_LIMIT) -> tuple[list[int], float]:
    """Visit order (indices 1..m) and its open-path cost."""
    c = _prepare(cost_matrix)
    m = len(c) - 1
    if m <= exact_limit:
        order = held_karp(c)
    else:
        order = two_opt(c, nearest_neighbor(c))
    return order, tour_cost(c, order)


def solve_heuristic(cost_matrix) -> tuple[list[int], float]:
    c = _prepare(cost_matrix)
    order = two_opt(c, nearest_neighbor(c))
    return order, tour_cost(c, order)
