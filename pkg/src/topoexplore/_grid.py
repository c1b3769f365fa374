"""Compiled supercover traversals over a 2D occupancy grid.

All kernels take the grid as ``occ[iy, ix]`` (row 0 at the map origin) and
work in continuous cell units internally. Cells outside the grid count as
occupied. A traversal "touches" every cell the segment intersects, including
both side cells when it passes exactly through a grid vertex.
"""

import math

import numba
import numpy as np


@numba.njit(cache=True, inline="always")
def _blocked(occ, ix, iy):
    h, w = occ.shape
    if ix < 0 or iy < 0 or ix >= w or iy >= h:
        return True
    return occ[iy, ix]


@numba.njit(cache=True)
def segment_blocked(occ, ox, oy, res, ax, ay, bx, by):
    """True if any cell touched by segment a-b is occupied."""
    # canonical endpoint order keeps the predicate symmetric
    if bx < ax or (bx == ax and by < ay):
        ax, ay, bx, by = bx, by, ax, ay
    fx0 = (ax - ox) / res
    fy0 = (ay - oy) / res
    fx1 = (bx - ox) / res
    fy1 = (by - oy) / res
    ix = int(math.floor(fx0))
    iy = int(math.floor(fy0))
    if _blocked(occ, ix, iy):
        return True
    dx = fx1 - fx0
    dy = fy1 - fy0
    if dx > 0.0:
        sx = 1
        t_max_x = (ix + 1 - fx0) / dx
        t_dx = 1.0 / dx
    elif dx < 0.0:
        sx = -1
        t_max_x = (fx0 - ix) / -dx
        t_dx = -1.0 / dx
    else:
        sx = 0
        t_max_x = np.inf
        t_dx = np.inf
    if dy > 0.0:
        sy = 1
        t_max_y = (iy + 1 - fy0) / dy
        t_dy = 1.0 / dy
    elif dy < 0.0:
        sy = -1
        t_max_y = (fy0 - iy) / -dy
        t_dy = -1.0 / dy
    else:
        sy = 0
        t_max_y = np.inf
        t_dy = np.inf
    while True:
        if t_max_x < t_max_y:
            if t_max_x > 1.0:
                return False
            ix += sx
            t_max_x += t_dx
        elif t_max_y < t_max_x:
            if t_max_y > 1.0:
                return False
            iy += sy
            t_max_y += t_dy
        else:
            if t_max_x > 1.0:
                return False
            if _blocked(occ, ix + sx, iy) or _blocked(occ, ix, iy + sy):
                return True
            ix += sx
            iy += sy
            t_max_x += t_dx
            t_max_y += t_dy
        if _blocked(occ, ix, iy):
            return True


@numba.njit(cache=True)
def ray_first_hit(occ, ox, oy, res, px, py, cx, cy, max_range):
    """Distance (m) along unit direction (cx, cy) to the first touched
    occupied cell, or +inf if none is met within ``max_range``."""
    fx = (px - ox) / res
    fy = (py - oy) / res
    ix = int(math.floor(fx))
    iy = int(math.floor(fy))
    if _blocked(occ, ix, iy):
        return 0.0
    if cx > 0.0:
        sx = 1
        t_max_x = (ix + 1 - fx) * res / cx
        t_dx = res / cx
    elif cx < 0.0:
        sx = -1
        t_max_x = (fx - ix) * res / -cx
        t_dx = -res / cx
    else:
        sx = 0
        t_max_x = np.inf
        t_dx = np.inf
    if cy > 0.0:
        sy = 1
        t_max_y = (iy + 1 - fy) * res / cy
        t_dy = res / cy
    elif cy < 0.0:
        sy = -1
        t_max_y = (fy - iy) * res / -cy
        t_dy = -res / cy
    else:
        sy = 0
        t_max_y = np.inf
        t_dy = np.inf
    while True:
        if t_max_x < t_max_y:
            t = t_max_x
            if t > max_range:
                return np.inf
            ix += sx
            t_max_x += t_dx
        elif t_max_y < t_max_x:
            t = t_max_y
            if t > max_range:
                return np.inf
            iy += sy
            t_max_y += t_dy
        else:
            t = t_max_x
            if t > max_range:
                return np.inf
            if _blocked(occ, ix + sx, iy) or _blocked(occ, ix, iy + sy):
                return t
            ix += sx
            iy += sy
            t_max_x += t_dx
            t_max_y += t_dy
        if _blocked(occ, ix, iy):
            return t


@numba.njit(cache=True)
def cast_rays(occ, ox, oy, res, px, py, angles, max_range):
    out = np.empty(angles.shape[0])
    for k in range(angles.shape[0]):
        out[k] = ray_first_hit(occ, ox, oy, res, px, py,
                               math.cos(angles[k]), math.sin(angles[k]), max_range)
    return out


@numba.njit(cache=True)
def mark_visible(occ, seen, ox, oy, res, px, py, d_max):
    """Set ``seen`` for free cells whose centre is closer than ``d_max`` to
    (px, py) with an unobstructed segment; returns how many were newly set."""
    h, w = occ.shape
    x0 = max(0, int(math.floor((px - d_max - ox) / res)))
    x1 = min(w - 1, int(math.floor((px + d_max - ox) / res)))
    y0 = max(0, int(math.floor((py - d_max - oy) / res)))
    y1 = min(h - 1, int(math.floor((py + d_max - oy) / res)))
    d2 = d_max * d_max
    added = 0
    for iy in range(y0, y1 + 1):
        cy = oy + (iy + 0.5) * res
        for ix in range(x0, x1 + 1):
            if seen[iy, ix] or occ[iy, ix]:
                continue
            cx = ox + (ix + 0.5) * res
            if (cx - px) ** 2 + (cy - py) ** 2 >= d2:
                continue
            if not segment_blocked(occ, ox, oy, res, px, py, cx, cy):
                seen[iy, ix] = True
                added += 1
    return added
