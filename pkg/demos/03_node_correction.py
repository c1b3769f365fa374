"""A bad range reading puts a frontier inside a wall; approaching it removes it.

Ray 3 of the first scan is forced to 4.8 m, so the scan shows a gap in the
block east of the start. The frontier placed in that gap is inside the
block. Once the agent is in range, its own descriptor shows the target is
not in free space and the node is dropped.
"""

from topoexplore import fixtures
from topoexplore.planner import Explorer, PlannerConfig
from topoexplore.world import SensorModel

world = fixtures.block_room()
sensor = SensorModel(rays_per_rev=72, noise_sigma=0.0, dropout_prob=0.0)

for faults in ({}, {0: {3: 4.8}}):
    ex = Explorer(world, sensor, PlannerConfig(), (2.5, 3.0, 1.0), faults=faults)
    ex.run(500)
    in_wall = sorted({n for *_, n in ex.candidate_log if n is not None
                      and any(r[5] == n and world.is_occupied(r[1], r[2]) for r in ex.candidate_log)})
    invalid = [(it, n) for it, k, n in ex.event_log if k == "target_invalid"]
    label = "with fault" if faults else "clean scan"
    print(f"{label}: in-wall frontiers {in_wall}, target_invalid {invalid}, "
          f"terminated {ex.terminated}, coverage {ex.coverage.fraction:.3f}")
