import math

import numpy as np
import pytest

from topoexplore import fixtures
from topoexplore.descriptor import DescriptorConfig
from topoexplore.world import SensorModel, WorldMap, load_map

NOISELESS = SensorModel(noise_sigma=0.0, dropout_prob=0.0, outlier_prob=0.0)


def grid_world(rows, resolution=1.0, origin=(0.0, 0.0)):
    """WorldMap from '#'/'.' strings, first string = top row."""
    head = f"mapmeta resolution={resolution} origin={origin[0]} {origin[1]} ceiling=3.0\n"
    return load_map(head + "\n".join(rows) + "\n")


def walled_world():
    """8 x 6 m room split by a 0.2 m wall at x = 4 with no opening."""
    c = fixtures._Canvas(8.2, 6.2)
    c.rect(4.0, 0.0, 4.2, 6.2, True)
    return c.world()


def polar_points(r, ang, z=0.0):
    r = np.asarray(r, dtype=float)
    ang = np.asarray(ang, dtype=float)
    return np.column_stack([r * np.cos(ang), r * np.sin(ang), np.full(r.shape, z)])


def brute_sector_min(points, cfg: DescriptorConfig):
    d = [cfg.d_max] * cfg.n
    for x, y, _ in points:
        a = math.atan2(y, x)
        if a < 0:
            a += 2 * math.pi
        j = int(a // math.radians(cfg.theta_deg)) % cfg.n
        d[j] = min(d[j], float(np.hypot(x, y)))
    return np.array(d)


@pytest.fixture(scope="session")
def two_room():
    return fixtures.two_room()


@pytest.fixture(scope="session")
def forest0():
    return fixtures.forest(0)


@pytest.fixture(scope="session")
def tunnel0():
    return fixtures.tunnel(0)


def random_free_points(world: WorldMap, rng, k):
    iy, ix = np.nonzero(~world.occupied)
    pick = rng.choice(len(ix), size=k, replace=False)
    jitter = rng.uniform(-0.45, 0.45, (k, 2)) * world.resolution
    cx, cy = world.cell_center(ix[pick], iy[pick])
    return np.column_stack([cx + jitter[:, 0], cy + jitter[:, 1], np.ones(k)])


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
