"""Ground-truth 2.5D worlds, a noisy omnidirectional range sensor, and the
visibility/coverage oracles used by tests and episode metrics.

Nothing in here is visible to the planner except through :class:`DepthScan`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _grid
from .errors import InvalidPoseError, MapFormatError


@dataclass(frozen=True, eq=False)
class WorldMap:
    """Closed occupancy grid. ``occupied[iy, ix]``; row 0 sits at ``origin``."""

    resolution: float
    origin: tuple[float, float]
    occupied: np.ndarray
    ceiling_height: float = 3.0

    def __post_init__(self):
        occ = np.ascontiguousarray(self.occupied, dtype=np.bool_)
        occ.setflags(write=False)
        object.__setattr__(self, "occupied", occ)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        if occ.ndim != 2 or occ.shape[0] < 1 or occ.shape[1] < 1:
            raise ValueError("occupancy grid must be 2D and non-empty")

    @property
    def width(self) -> int:
        return self.occupied.shape[1]

    @property
    def height(self) -> int:
        return self.occupied.shape[0]

    @property
    def extent(self) -> tuple[float, float]:
        return self.width * self.resolution, self.height * self.resolution

    @property
    def free_count(self) -> int:
        return int(self.occupied.size - np.count_nonzero(self.occupied))

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return (int(math.floor((x - self.origin[0]) / self.resolution)),
                int(math.floor((y - self.origin[1]) / self.resolution)))

    def cell_center(self, ix, iy):
        return (self.origin[0] + (np.asarray(ix) + 0.5) * self.resolution,
                self.origin[1] + (np.asarray(iy) + 0.5) * self.resolution)

    def is_occupied(self, x: float, y: float) -> bool:
        ix, iy = self.cell_of(x, y)
        if ix < 0 or iy < 0 or ix >= self.width or iy >= self.height:
            return True
        return bool(self.occupied[iy, ix])

    def upsample(self, factor: int) -> "WorldMap":
        """Same geometry at ``resolution / factor``."""
        occ = np.repeat(np.repeat(self.occupied, factor, axis=0), factor, axis=1)
        return WorldMap(self.resolution / factor, self.origin, occ, self.ceiling_height)


@dataclass(frozen=True)
class SensorModel:
    d_max: float = 5.0
    h: float = 1.0
    rays_per_rev: int = 360
    noise_sigma: float = 0.05
    dropout_prob: float = 0.02
    outlier_prob: float = 0.0
    outlier_range: float = 4.0

    def problems(self, n_sectors: int | None = None) -> list[str]:
        out = []
        if not self.d_max > 0:
            out.append("sensor.d_max must be > 0")
        if not self.h > 0:
            out.append("sensor.h must be > 0")
        if self.noise_sigma < 0:
            out.append("sensor.noise_sigma must be >= 0")
        for name in ("dropout_prob", "outlier_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                out.append(f"sensor.{name} must be in [0, 1]")
        if self.rays_per_rev < 1:
            out.append("sensor.rays_per_rev must be positive")
        elif n_sectors is not None and self.rays_per_rev % n_sectors:
            out.append(f"sensor.rays_per_rev must be a multiple of the sector count {n_sectors}")
        return out


@dataclass(frozen=True)
class Pose:
    position: tuple[float, float, float]
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))


@dataclass(frozen=True, eq=False)
class DepthScan:
    """Points in the virtual frame: pose-centred, axes parallel to the world."""

    points: np.ndarray
    stamp: float = 0.0

    def to_csv(self) -> str:
        return "".join(f"{x!r},{y!r},{z!r}\n" for x, y, z in self.points.tolist())


def load_map(source: str) -> WorldMap:
    """Parse map text: a ``mapmeta`` header followed by rows of ``#``/``.``.

    The first text row is the top (largest y) of the map.
    """
    lines = source.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise MapFormatError("line 1: empty map file")
    meta = _parse_header(lines[0])
    rows = [ln.rstrip("\r") for ln in lines[1:]]
    if not rows:
        raise MapFormatError("line 2: no grid rows")
    width = len(rows[0])
    if width == 0:
        raise MapFormatError("line 2: row 1 is empty")
    grid = np.zeros((len(rows), width), dtype=bool)
    for r, row in enumerate(rows):
        lineno = r + 2
        if len(row) != width:
            raise MapFormatError(f"line {lineno}: row {r + 1} length {len(row)} != {width}")
        bad = set(row) - {"#", "."}
        if bad:
            raise MapFormatError(f"line {lineno}: row {r + 1} has invalid characters {sorted(bad)}")
        grid[r] = np.frombuffer(row.encode(), dtype=np.uint8) == ord("#")
    for r, row in enumerate(grid):
        if r in (0, len(grid) - 1):
            open_ = not row.all()
        else:
            open_ = not (row[0] and row[-1])
        if open_:
            raise MapFormatError(f"line {r + 2}: open boundary in row {r + 1}")
    return WorldMap(meta["resolution"], (meta["ox"], meta["oy"]), grid[::-1].copy(), meta["ceiling"])


def _parse_header(line: str) -> dict:
    tokens = line.split()
    if not tokens or tokens[0] != "mapmeta":
        raise MapFormatError("line 1: header must start with 'mapmeta'")
    out = {}
    i = 1
    try:
        while i < len(tokens):
            key, _, val = tokens[i].partition("=")
            if key == "resolution":
                out["resolution"] = float(val)
            elif key == "ceiling":
                out["ceiling"] = float(val)
            elif key == "origin":
                out["ox"] = float(val)
                out["oy"] = float(tokens[i + 1])
                i += 1
            else:
                raise MapFormatError(f"line 1: unknown header field {key!r}")
            i += 1
    except (ValueError, IndexError) as exc:
        if isinstance(exc, MapFormatError):
            raise
        raise MapFormatError(f"line 1: malformed header ({exc})") from None
    missing = {"resolution", "ox", "ceiling"} - out.keys()
    if missing:
        raise MapFormatError(f"line 1: header missing {sorted(missing)}")
    if out["resolution"] <= 0:
        raise MapFormatError("line 1: resolution must be positive")
    return out


def dump_map(world: WorldMap) -> str:
    head = (f"mapmeta resolution={world.resolution!r} origin={world.origin[0]!r} "
            f"{world.origin[1]!r} ceiling={world.ceiling_height!r}\n")
    chars = np.where(world.occupied[::-1], ord("#"), ord(".")).astype(np.uint8)
    return head + "".join(row.tobytes().decode() + "\n" for row in chars)


def ray_angles(rays_per_rev: int) -> np.ndarray:
    # half-step offset keeps every ray strictly inside a descriptor sector
    return (np.arange(rays_per_rev) + 0.5) * (2.0 * np.pi / rays_per_rev)


def true_ranges(world: WorldMap, position: Sequence[float], rays_per_rev: int, d_max: float) -> np.ndarray:
    """Noiseless first-hit distances; ``inf`` where nothing is hit within d_max."""
    return _grid.cast_rays(world.occupied, world.origin[0], world.origin[1], world.resolution,
                           float(position[0]), float(position[1]), ray_angles(rays_per_rev), float(d_max))


def raycast_scan(world: WorldMap, sensor: SensorModel, pose: Pose, rng_seed: int,
                 overrides: Mapping[int, float] | None = None, stamp: float = 0.0) -> DepthScan:
    """Simulate one omnidirectional scan.

    Rays that hit nothing within ``d_max`` report exactly ``d_max`` with no
    noise (a missing return, not a measurement). ``overrides`` forces the
    range of selected ray indices after all random effects, for scripted
    fault injection.
    """
    px, py, _ = pose.position
    if world.is_occupied(px, py):
        raise InvalidPoseError(f"pose ({px}, {py}) is inside an occupied cell")
    n_rays = sensor.rays_per_rev
    angles = ray_angles(n_rays)
    hit = true_ranges(world, pose.position, n_rays, sensor.d_max)
    rng = np.random.default_rng(rng_seed)
    noise = rng.normal(0.0, 1.0, n_rays) * sensor.noise_sigma
    u_drop = rng.random(n_rays)
    u_out = rng.random(n_rays)
    has_hit = np.isfinite(hit)
    ranges = np.where(has_hit, hit + noise, sensor.d_max)
    ranges = np.where(u_out < sensor.outlier_prob, sensor.outlier_range, ranges)
    keep = u_drop >= sensor.dropout_prob
    if overrides:
        for k, r in overrides.items():
            ranges[k] = r
            keep[k] = True
    keep &= (ranges <= sensor.d_max) & (ranges > 0.0)
    r = ranges[keep]
    a = angles[keep]
    pts = np.column_stack([r * np.cos(a), r * np.sin(a), np.zeros_like(r)])
    return DepthScan(pts, stamp)


def line_of_sight_free(world: WorldMap, a: Sequence[float], b: Sequence[float]) -> bool:
    """Conservative supercover visibility between two points (z ignored)."""
    return not _grid.segment_blocked(world.occupied, world.origin[0], world.origin[1], world.resolution,
                                     float(a[0]), float(a[1]), float(b[0]), float(b[1]))


def clamp_motion(world: WorldMap, a: Sequence[float], b: Sequence[float]) -> tuple[np.ndarray, bool]:
    """Furthest point along a -> b that keeps the swept segment free.

    Returns ``(point, collided)``; the point equals ``b`` when nothing is hit.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if line_of_sight_free(world, a, b):
        return b.copy(), False
    lo, hi = 0.0, 1.0
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        if line_of_sight_free(world, a, a + mid * (b - a)):
            lo = mid
        else:
            hi = mid
    return a + lo * (b - a), True


@dataclass
class CoverageTracker:
    """Incremental form of :func:`coverage_fraction` for episode loops."""

    world: WorldMap
    d_max: float
    seen: np.ndarray = field(init=False)

    def __post_init__(self):
        self.seen = np.zeros(self.world.occupied.shape, dtype=np.bool_)
        self._n_seen = 0
        self._n_free = self.world.free_count

    def add(self, position: Sequence[float]) -> int:
        if self.world.is_occupied(position[0], position[1]):
            return 0
        w = self.world
        added = _grid.mark_visible(w.occupied, self.seen, w.origin[0], w.origin[1], w.resolution,
                                   float(position[0]), float(position[1]), float(self.d_max))
        self._n_seen += added
        return added

    @property
    def fraction(self) -> float:
        return self._n_seen / self._n_free if self._n_free else 1.0


def coverage_fraction(world: WorldMap, poses: Iterable[Pose], sensor: SensorModel) -> float:
    """Fraction of free cells seen (centre within d_max, unobstructed) from any pose."""
    tracker = CoverageTracker(world, sensor.d_max)
    for pose in poses:
        tracker.add(pose.position)
    return tracker.fraction
