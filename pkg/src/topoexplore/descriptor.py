"""Fan-shaped minimum-depth descriptors and the window visibility predicate.

A descriptor splits the plane around a node into ``n`` equal sectors and
keeps, per sector, the smallest planar range of any valid point (or
``d_max`` when the sector saw nothing). It is the only geometry a waypoint
retains, and :func:`covers_point` is the single visibility test built on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEPTH_ENTRY_BYTES = 8
RANGE_SNAP = 1e-9


@dataclass(frozen=True)
class DescriptorConfig:
    theta_deg: float = 5.0
    d_max: float = 5.0
    h: float = 1.0
    delta_theta_deg: float = 15.0

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ValueError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if not self.theta_deg > 0:
            return ["descriptor.theta_deg must be > 0"]
        ratio = 360.0 / self.theta_deg
        if abs(ratio - round(ratio)) > 1e-9:
            out.append("descriptor.theta_deg must divide 360")
        if not self.d_max > 0:
            out.append("descriptor.d_max must be > 0")
        if not self.h > 0:
            out.append("descriptor.h must be > 0")
        if self.delta_theta_deg < self.theta_deg:
            out.append("descriptor.delta_theta_deg must be >= theta_deg")
        elif round(self.delta_theta_deg / self.theta_deg) % 2 == 0:
            out.append("descriptor.delta_theta_deg / theta_deg must round to an odd sector count")
        return out

    @property
    def n(self) -> int:
        return int(round(360.0 / self.theta_deg))

    @property
    def theta(self) -> float:
        """Sector width in radians."""
        return math.radians(self.theta_deg)

    @property
    def window_half(self) -> int:
        return int(round(self.delta_theta_deg / self.theta_deg)) // 2

    def sector_of(self, heading: float) -> int:
        a = math.fmod(heading, 2.0 * math.pi)
        if a < 0.0:
            a += 2.0 * math.pi
        return int(a // self.theta) % self.n


@dataclass(frozen=True, eq=False)
class DepthDescriptor:
    d: np.ndarray
    config: DescriptorConfig

    def __post_init__(self):
        d = np.array(self.d, dtype=np.float64)
        if d.shape != (self.config.n,):
            raise ValueError(f"descriptor needs {self.config.n} entries, got {d.shape}")
        d.setflags(write=False)
        object.__setattr__(self, "d", d)

    def __eq__(self, other):
        return (isinstance(other, DepthDescriptor) and self.config == other.config
                and np.array_equal(self.d, other.d))

    __hash__ = None

    @property
    def nbytes(self) -> int:
        return self.config.n * DEPTH_ENTRY_BYTES

    def to_text(self) -> str:
        c = self.config
        return f"{c.n} {c.theta_deg!r} {c.d_max!r} " + ",".join(repr(v) for v in self.d.tolist())

    @classmethod
    def from_text(cls, text: str, config: DescriptorConfig) -> "DepthDescriptor":
        n, theta, d_max, values = text.split()
        if int(n) != config.n or float(theta) != config.theta_deg or float(d_max) != config.d_max:
            raise ValueError("descriptor header does not match graph configuration")
        return cls(np.array([float(v) for v in values.split(",")]), config)


def extract_valid_points(points, config: DescriptorConfig) -> np.ndarray:
    """Keep points strictly inside the height band and strictly inside d_max."""
    pts = np.asarray(getattr(points, "points", points), dtype=np.float64).reshape(-1, 3)
    half = config.h / 2.0
    norm = np.linalg.norm(pts, axis=1)
    keep = (pts[:, 2] > -half) & (pts[:, 2] < half) & (norm < config.d_max)
    return pts[keep]


def sector_indices(points: np.ndarray, config: DescriptorConfig) -> np.ndarray:
    ang = np.arctan2(points[:, 1], points[:, 0])
    ang = np.where(ang < 0.0, ang + 2.0 * np.pi, ang)
    return np.floor(ang / config.theta).astype(np.int64) % config.n


def build_descriptor(points, config: DescriptorConfig) -> DepthDescriptor:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    d = np.full(config.n, config.d_max)
    if len(pts):
        planar = np.hypot(pts[:, 0], pts[:, 1])
        # missing returns come back from x, y a few ulps short of d_max
        planar[planar >= config.d_max - RANGE_SNAP] = config.d_max
        np.minimum.at(d, sector_indices(pts, config), planar)
    return DepthDescriptor(d, config)


def window_min(desc: DepthDescriptor, heading: float) -> float:
    c = desc.config
    j = c.sector_of(heading)
    half = c.window_half
    if half == 0:
        return float(desc.d[j])
    idx = np.arange(j - half, j + half + 1) % c.n
    return float(desc.d[idx].min())


def covers_point(desc: DepthDescriptor, desc_origin, target) -> bool:
    """True if ``target`` lies in the free region this descriptor observed."""
    dx = float(target[0]) - float(desc_origin[0])
    dy = float(target[1]) - float(desc_origin[1])
    r = math.hypot(dx, dy)
    if not r < desc.config.d_max:
        return False
    return window_min(desc, math.atan2(dy, dx)) > r
