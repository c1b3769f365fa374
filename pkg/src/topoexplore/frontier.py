"""Traversable angular intervals and candidate frontier positions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .descriptor import DepthDescriptor

MISSING = "missing"
DISCONTINUITY = "discontinuity"


@dataclass(frozen=True)
class FrontierConfig:
    phi_d_deg: float = 20.0
    tau_d: float = 1.5
    split_deg: float = 60.0
    min_clearance: float = 0.5

    def problems(self, theta_deg: float | None = None) -> list[str]:
        out = []
        if theta_deg is not None and self.phi_d_deg < theta_deg:
            out.append("frontier.phi_d_deg must be >= descriptor.theta_deg")
        if not self.tau_d > 0:
            out.append("frontier.tau_d must be > 0")
        if self.split_deg < self.phi_d_deg:
            out.append("frontier.split_deg must be >= frontier.phi_d_deg")
        if self.min_clearance < 0:
            out.append("frontier.min_clearance must be >= 0")
        return out


@dataclass(frozen=True, order=True)
class Interval:
    """Boundary sector indices, counter-clockwise from ``left`` to ``right``.

    ``left == right`` only occurs transiently for a full-circle interval.
    """

    left: int
    right: int
    kind: str

    def span(self, n: int) -> int:
        """Extent in sectors."""
        return (self.right - self.left - 1) % n + 1

    def contains(self, sector: int, n: int) -> bool:
        return (sector - self.left) % n <= self.span(n)


def _split(iv: Interval, n: int, split_sectors: float) -> list[Interval]:
    span = iv.span(n)
    if iv.kind != MISSING or span <= split_sectors:
        return [iv]
    k = math.ceil(span / split_sectors - 1e-9)
    cuts = [(iv.left + (i * span) // k) % n for i in range(k + 1)]
    return [Interval(cuts[i], cuts[i + 1], MISSING) for i in range(k)]


def find_intervals(desc: DepthDescriptor, cfg: FrontierConfig) -> list[Interval]:
    d = desc.d
    c = desc.config
    n = c.n
    is_max = d >= c.d_max
    out: list[Interval] = []
    split_sectors = cfg.split_deg / c.theta_deg
    if is_max.all():
        out.extend(_split(Interval(0, 0, MISSING), n, split_sectors))
    elif is_max.any():
        # walk maximal circular runs starting just after a non-max sector
        start = int(np.flatnonzero(~is_max)[0])
        j = 0
        while j < n:
            s = (start + j) % n
            if not is_max[s]:
                j += 1
                continue
            run = 0
            while j < n and is_max[(start + j) % n]:
                run += 1
                j += 1
            if run * c.theta_deg >= cfg.phi_d_deg - 1e-9:
                iv = Interval((s - 1) % n, (s + run) % n, MISSING)
                if iv.left == iv.right:
                    out.extend(_split(iv, n, split_sectors))
                else:
                    out.append(iv)
    jumps = np.abs(d - np.roll(d, -1)) > cfg.tau_d
    out.extend(Interval(int(j), int((j + 1) % n), DISCONTINUITY) for j in np.flatnonzero(jumps))
    out.sort()
    return out


def split_large(intervals: Iterable[Interval], cfg: FrontierConfig, n: int) -> list[Interval]:
    split_sectors = cfg.split_deg / (360.0 / n)
    out = []
    for iv in intervals:
        out.extend(_split(iv, n, split_sectors))
    return out


def filter_by_last_heading(intervals: Iterable[Interval], last_waypoint_heading: float,
                           desc: DepthDescriptor) -> list[Interval]:
    """Drop intervals whose sector span (boundaries included) holds the heading."""
    c = desc.config
    s = c.sector_of(last_waypoint_heading)
    return [iv for iv in intervals if not iv.contains(s, c.n)]


def _boundary_point(desc: DepthDescriptor, idx: int) -> tuple[float, float]:
    a = idx * desc.config.theta
    r = float(desc.d[idx])
    return r * math.cos(a), r * math.sin(a)


def candidates_with_kinds(desc: DepthDescriptor, intervals: Sequence[Interval], origin,
                          cfg: FrontierConfig) -> tuple[np.ndarray, list[str]]:
    ox, oy, z = float(origin[0]), float(origin[1]), float(origin[2])
    pts, kinds = [], []
    for iv in intervals:
        lx, ly = _boundary_point(desc, iv.left)
        rx, ry = _boundary_point(desc, iv.right)
        wx, wy = (lx + rx) / 2.0, (ly + ry) / 2.0
        if math.hypot(wx, wy) < cfg.min_clearance:
            continue
        pts.append((wx + ox, wy + oy, z))
        kinds.append(iv.kind)
    return np.array(pts, dtype=np.float64).reshape(-1, 3), kinds


def candidate_positions(desc: DepthDescriptor, intervals: Sequence[Interval], origin,
                        cfg: FrontierConfig) -> np.ndarray:
    """Midpoints of each interval's two boundary points, in world coordinates.

    ``origin`` is the current node position; its z becomes every candidate's z.
    """
    return candidates_with_kinds(desc, intervals, origin, cfg)[0]
