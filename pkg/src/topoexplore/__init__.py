"""Frontier exploration on a sparse topological graph of depth descriptors."""

from .descriptor import (DepthDescriptor, DescriptorConfig, build_descriptor, covers_point,
                         extract_valid_points, window_min)
from .frontier import (FrontierConfig, Interval, candidate_positions, filter_by_last_heading,
                       find_intervals, split_large)
from .graph import (NodeType, TopoGraph, astar_cost, check_target_validity, convert_to_waypoint,
                    deserialize, graph_memory_bytes, prune_covered_frontiers, remove_invalid_node,
                    select_and_insert_frontiers, serialize, update_connectivity)
from .harness import EpisodeConfig, load_config, parse_config, render_snapshot, run_batch, run_episode
from .motion import MotionLimits
from .planner import Explorer, PlannerConfig, TourPlan, execute_step, next_target
from .tour import solve_atsp
from .world import (DepthScan, Pose, SensorModel, WorldMap, coverage_fraction, line_of_sight_free,
                    load_map, raycast_scan)

__all__ = [
    "DepthDescriptor", "DescriptorConfig", "build_descriptor", "covers_point", "extract_valid_points",
    "window_min",
    "FrontierConfig", "Interval", "candidate_positions", "filter_by_last_heading", "find_intervals",
    "split_large",
    "NodeType", "TopoGraph", "astar_cost", "check_target_validity", "convert_to_waypoint", "deserialize",
    "graph_memory_bytes", "prune_covered_frontiers", "remove_invalid_node", "select_and_insert_frontiers",
    "serialize", "update_connectivity",
    "EpisodeConfig", "load_config", "parse_config", "render_snapshot", "run_batch", "run_episode",
    "MotionLimits", "Explorer", "PlannerConfig", "TourPlan", "execute_step", "next_target", "solve_atsp",
    "DepthScan", "Pose", "SensorModel", "WorldMap", "coverage_fraction", "line_of_sight_free", "load_map",
    "raycast_scan",
]

__version__ = "0.1.0"
