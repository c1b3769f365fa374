"""Full episode in the two-room map, with a progress log and an SVG of the end state."""

import sys
from pathlib import Path

from topoexplore import fixtures
from topoexplore.harness import render_snapshot
from topoexplore.planner import Explorer, PlannerConfig
from topoexplore.world import SensorModel

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(exist_ok=True)

world = fixtures.two_room()
ex = Explorer(world, SensorModel(), PlannerConfig(), fixtures.default_start(world), seed=1)

while not ex.terminated and ex.iteration < 2000:
    rec = ex.plan_iteration()
    for e in rec.events:
        print(f"iter {rec.iteration:3d}  {e.kind:<14} node {e.node}")
    if rec.iteration % 10 == 0 or rec.terminated:
        print(f"iter {rec.iteration:3d}  t={rec.t_sim:5.1f}s  coverage {rec.coverage:.3f}  "
              f"nodes {rec.nodes} ({rec.frontiers} frontier)  {rec.graph_bytes} B  mode {rec.plan_mode}")

g = ex.graph
print(f"\nfinished: {len(g.waypoint_ids())} waypoints, {g.edge_count} edges, "
      f"{ex.traj_len:.1f} m flown in {ex.state.t:.1f} s")
render_snapshot(world, g, ex.trajectory, out / "two_room.svg")
print("snapshot:", out / "two_room.svg")
