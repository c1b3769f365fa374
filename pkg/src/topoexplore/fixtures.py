"""Test and benchmark worlds.

Small hand-made rooms plus seeded generators for a 120 x 53 m tunnel
network and a 50 x 50 m forest of circular trunks.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from .world import WorldMap

RESOLUTION = 0.1


class _Canvas:
    """Occupancy painter in metric coordinates; starts fully occupied or free."""

    def __init__(self, width_m, height_m, res=RESOLUTION, solid=False):
        self.res = res
        self.w = int(round(width_m / res))
        self.h = int(round(height_m / res))
        self.occ = np.full((self.h, self.w), solid, dtype=bool)

    def _span(self, lo, hi, limit):
        return max(0, int(round(lo / self.res))), min(limit, int(round(hi / self.res)))

    def rect(self, x0, y0, x1, y1, occupied):
        a, b = self._span(x0, x1, self.w)
        c, d = self._span(y0, y1, self.h)
        self.occ[c:d, a:b] = occupied

    def disk(self, cx, cy, r, occupied=True):
        ys, xs = np.ogrid[:self.h, :self.w]
        px = (xs + 0.5) * self.res
        py = (ys + 0.5) * self.res
        self.occ[(px - cx) ** 2 + (py - cy) ** 2 <= r * r] = occupied

    def world(self, ceiling=3.0) -> WorldMap:
        occ = self.occ.copy()
        occ[0, :] = occ[-1, :] = True
        occ[:, 0] = occ[:, -1] = True
        return WorldMap(self.res, (0.0, 0.0), occ, ceiling)


def sealed_room(size=6.0) -> WorldMap:
    """Empty square room; ``size`` is the interior side length."""
    c = _Canvas(size + 0.2, size + 0.2)
    return c.world()


def corridor(length=40.0, width=3.0) -> WorldMap:
    c = _Canvas(length + 0.2, width + 0.2)
    return c.world()


def two_room(room_w=8.0, room_h=7.0, door=2.4) -> WorldMap:
    """Two rooms side by side joined by a doorway in a 0.2 m wall."""
    W = 2 * room_w + 0.4
    H = room_h + 0.2
    c = _Canvas(W, H)
    c.rect(room_w + 0.1, 0.0, room_w + 0.3, H, True)
    mid = H / 2
    c.rect(room_w + 0.1, mid - door / 2, room_w + 0.3, mid + door / 2, False)
    return c.world()


def l_shape(arm=9.0, width=4.0) -> WorldMap:
    c = _Canvas(arm + 0.2, arm + 0.2, solid=False)
    c.rect(width + 0.1, width + 0.1, arm + 0.2, arm + 0.2, True)
    return c.world()


def block_room() -> WorldMap:
    """10 x 8 m room whose south-east quarter is a solid 5 x 4 m block."""
    c = _Canvas(10.2, 8.2)
    c.rect(5.0, 0.0, 10.2, 4.0, True)
    return c.world()


def forest(seed=0, size=50.0, n_trees=70, r_min=0.2, r_max=0.5, min_gap=2.5) -> WorldMap:
    """Square plot with randomly placed circular trunks.

    Trunks keep ``min_gap`` metres of clearance between surfaces and stay
    away from the plot centre so the default start is free.
    """
    rng = np.random.default_rng(seed)
    c = _Canvas(size, size)
    trees: list[tuple[float, float, float]] = []
    attempts = 0
    while len(trees) < n_trees and attempts < 100 * n_trees:
        attempts += 1
        r = rng.uniform(r_min, r_max)
        x, y = rng.uniform(1.0 + r, size - 1.0 - r, 2)
        if math.hypot(x - size / 2, y - size / 2) < 2.0 + r:
            continue
        if any(math.hypot(x - tx, y - ty) < r + tr + min_gap for tx, ty, tr in trees):
            continue
        trees.append((x, y, r))
    for x, y, r in trees:
        c.disk(x, y, r)
    return c.world(ceiling=2.0)


def tunnel(seed=0, width_m=120.0, height_m=53.0) -> WorldMap:
    """Network of tunnels carved from solid rock.

    Three east-west galleries joined by seeded north-south shafts, with a few
    dead-end side branches and chambers.
    """
    rng = np.random.default_rng(seed)
    c = _Canvas(width_m, height_m, solid=True)
    rows = [6.0, height_m / 2, height_m - 6.0]
    gallery_w = [float(rng.uniform(3.0, 4.5)) for _ in rows]
    for y, w in zip(rows, gallery_w):
        c.rect(2.0, y - w / 2, width_m - 2.0, y + w / 2, False)
    for lo, hi in zip(rows[:-1], rows[1:]):
        xs = _spaced(rng, 4, 6.0, width_m - 6.0, 18.0)
        for x in xs:
            w = float(rng.uniform(3.0, 4.0))
            c.rect(x - w / 2, lo, x + w / 2, hi, False)
    for _ in range(4):
        row = int(rng.integers(0, 3))
        x = float(rng.uniform(10.0, width_m - 10.0))
        length = float(rng.uniform(4.0, 8.0))
        w = float(rng.uniform(2.5, 3.5))
        y = rows[row]
        sign = -1.0 if row == 2 else (1.0 if row == 0 else float(rng.choice([-1.0, 1.0])))
        y0, y1 = sorted((y, y + sign * (gallery_w[row] / 2 + length)))
        y0 = max(y0, 1.0)
        y1 = min(y1, height_m - 1.0)
        c.rect(x - w / 2, y0, x + w / 2, y1, False)
    for _ in range(2):
        row = int(rng.integers(0, 3))
        x = float(rng.uniform(15.0, width_m - 15.0))
        s = float(rng.uniform(7.0, 9.0))
        y = min(max(rows[row], s / 2 + 1.0), height_m - s / 2 - 1.0)
        c.rect(x - s / 2, y - s / 2, x + s / 2, y + s / 2, False)
    return c.world(ceiling=3.0)


def _spaced(rng, k, lo, hi, gap):
    for _ in range(1000):
        xs = np.sort(rng.uniform(lo, hi, k))
        if np.all(np.diff(xs) >= gap):
            return [float(x) for x in xs]
    return [float(x) for x in np.linspace(lo, hi, k)]


def default_start(world: WorldMap, clearance=0.5, z=1.0) -> tuple[float, float, float]:
    """Free point nearest the map centre with at least ``clearance`` metres
    to any obstacle (ties broken by row-major cell order)."""
    dist = ndimage.distance_transform_edt(~world.occupied) * world.resolution
    ok = dist >= clearance
    if not ok.any():
        ok = ~world.occupied
    iy, ix = np.nonzero(ok)
    cx, cy = world.cell_center(ix, iy)
    mx = world.origin[0] + world.extent[0] / 2
    my = world.origin[1] + world.extent[1] / 2
    k = int(np.argmin((cx - mx) ** 2 + (cy - my) ** 2))
    return float(cx[k]), float(cy[k]), float(z)


KINDS = {
    "sealed_room": sealed_room,
    "corridor": corridor,
    "two_room": two_room,
    "l_shape": l_shape,
    "block_room": block_room,
    "forest": forest,
    "tunnel": tunnel,
}
SEEDED = {"forest", "tunnel"}
