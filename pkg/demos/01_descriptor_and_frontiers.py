"""One scan in the two-room map: descriptor, intervals, candidate frontiers."""

import math

import numpy as np

from topoexplore import fixtures
from topoexplore.descriptor import DescriptorConfig, build_descriptor, covers_point, extract_valid_points
from topoexplore.frontier import FrontierConfig, candidate_positions, find_intervals, split_large
from topoexplore.world import Pose, SensorModel, raycast_scan

world = fixtures.two_room()
start = (4.0, 3.6, 1.0)
scan = raycast_scan(world, SensorModel(), Pose(start), 0)
print(f"map {world.extent[0]:.1f} x {world.extent[1]:.1f} m, scan of {len(scan.points)} points")

cfg = DescriptorConfig()
desc = build_descriptor(extract_valid_points(scan, cfg), cfg)
print(f"descriptor: {cfg.n} sectors, {desc.nbytes} bytes")
# the doorway is east of the start; those sectors hold the far wall or d_max
for j in range(0, cfg.n, 6):
    print(f"  sector {j:2d} ({j * cfg.theta_deg:5.1f} deg): {desc.d[j]:.2f} m")

fcfg = FrontierConfig()
ivs = split_large(find_intervals(desc, fcfg), fcfg, cfg.n)
cands = candidate_positions(desc, ivs, start, fcfg)
print(f"{len(ivs)} traversable intervals")
for iv, c in zip(ivs, cands):
    print(f"  {iv.kind:13s} sectors {iv.left:2d}..{iv.right:2d} -> candidate ({c[0]:.2f}, {c[1]:.2f})")

# the descriptor is the only visibility model kept for this node
for target in [(6.0, 3.6, 1.0), (12.0, 3.6, 1.0), (4.0, 0.05, 1.0)]:
    r = math.dist(start[:2], target[:2])
    print(f"covers {target[:2]} at {r:.1f} m: {covers_point(desc, start, target)}")

print("seam handling: sector of -1 deg is", cfg.sector_of(np.radians(-1.0)))
