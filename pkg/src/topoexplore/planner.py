"""Hierarchical exploration planning and the closed exploration loop.

Global guidance picks the nearest adjacent frontier when one exists and
otherwise solves an open ATSP over graph path costs. Local execution builds
a throw-away occupancy window from the current scan only, plans a short
collision-free polyline to the next graph node, and advances the agent
under a trapezoidal speed profile.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy import ndimage
from skimage.graph import MCP_Geometric

from .descriptor import (DepthDescriptor, DescriptorConfig, build_descriptor,
                         extract_valid_points)
from .errors import UnreachableFrontiersError
from .frontier import (FrontierConfig, candidates_with_kinds, filter_by_last_heading,
                       find_intervals, split_large)
from .graph import (NodeType, TopoGraph, astar_cost, check_target_validity,
                    convert_to_waypoint, graph_memory_bytes, pairwise_costs,
                    prune_covered_frontiers, remove_invalid_node,
                    select_and_insert_frontiers, update_connectivity)
from .motion import MotionLimits, trapezoid_advance
from .tour import solve_atsp
from .world import CoverageTracker, Pose, SensorModel, WorldMap, clamp_motion, raycast_scan

SHORTCUT = "shortcut"
ATSP = "atsp"


@dataclass(frozen=True)
class TourPlan:
    order: tuple[int, ...]
    total_cost: float
    mode: str


def next_target(g: TopoGraph, current: int) -> TourPlan | None:
    """Plan toward the frontiers; ``None`` means nothing is left to explore."""
    if not g.frontier_index:
        return None
    node = g.node(current)
    adjacent = [(c, nid) for nid, c in node.adj.items() if nid in g.frontier_index]
    if adjacent:
        cost, nid = min(adjacent)
        return TourPlan((nid,), cost, SHORTCUT)
    ids = [current] + sorted(g.frontier_index)
    costs = pairwise_costs(g, ids)
    try:
        order, total = solve_atsp(costs)
    except UnreachableFrontiersError as exc:
        raise UnreachableFrontiersError([ids[k] for k in exc.node_ids]) from None
    return TourPlan(tuple(ids[k] for k in order), total, ATSP)


@dataclass(eq=False)
class LocalWindow:
    """Occupancy grid around the agent built from one scan, inflated by the
    robot radius. ``hard`` holds the raw point cells and ``clearance`` the
    distance from each cell to the nearest one."""

    center: np.ndarray
    extent: float
    resolution: float
    cells: np.ndarray
    hard: np.ndarray
    clearance: np.ndarray

    @property
    def size(self) -> int:
        return self.cells.shape[0]

    @property
    def nbytes(self) -> int:
        return int(self.cells.nbytes + self.hard.nbytes + self.clearance.nbytes)

    def cell_of(self, xy) -> tuple[int, int]:
        i = int(math.floor((xy[0] - self.center[0] + self.extent) / self.resolution))
        j = int(math.floor((xy[1] - self.center[1] + self.extent) / self.resolution))
        return i, j

    def point_of(self, i, j) -> np.ndarray:
        return np.array([self.center[0] - self.extent + (i + 0.5) * self.resolution,
                         self.center[1] - self.extent + (j + 0.5) * self.resolution])

    def inside(self, i, j) -> bool:
        return 0 <= i < self.size and 0 <= j < self.size

    def segment_free(self, a, b, grid=None) -> bool:
        grid = self.cells if grid is None else grid
        a = np.asarray(a[:2], dtype=float)
        b = np.asarray(b[:2], dtype=float)
        n = max(2, int(math.ceil(np.linalg.norm(b - a) / (0.5 * self.resolution))) + 1)
        t = np.linspace(0.0, 1.0, n)[:, None]
        pts = a + t * (b - a)
        ij = np.floor((pts - self.center[:2] + self.extent) / self.resolution).astype(int)
        ok = (ij >= 0).all(axis=1) & (ij < self.size).all(axis=1)
        ij = ij[ok]
        return not grid[ij[:, 0], ij[:, 1]].any()


def build_local_window(points: np.ndarray, center, extent: float, resolution: float,
                       robot_radius: float) -> LocalWindow:
    size = int(math.ceil(2.0 * extent / resolution))
    hard = np.zeros((size, size), dtype=bool)
    if len(points):
        ij = np.floor((points[:, :2] + extent) / resolution).astype(int)
        ok = (ij >= 0).all(axis=1) & (ij < size).all(axis=1)
        hard[ij[ok, 0], ij[ok, 1]] = True
    k = int(math.ceil(robot_radius / resolution))
    yy, xx = np.mgrid[-k:k + 1, -k:k + 1]
    disk = xx * xx + yy * yy <= k * k
    cells = ndimage.binary_dilation(hard, structure=disk) if k > 0 else hard.copy()
    clearance = (ndimage.distance_transform_edt(~hard) * resolution if hard.any()
                 else np.full(hard.shape, np.inf))
    return LocalWindow(np.asarray(center, dtype=float)[:2].copy(), extent, resolution, cells, hard,
                       clearance)


@dataclass
class AgentState:
    position: np.ndarray
    speed: float = 0.0
    t: float = 0.0
    heading: float = 0.0

    def __post_init__(self):
        self.position = np.array(self.position, dtype=np.float64).reshape(3)


@dataclass
class Route:
    """Graph path toward ``target``; ``path[index]`` is the next node to reach."""

    target: int
    path: list[int]
    index: int = 0
    mode: str = SHORTCUT


@dataclass(frozen=True)
class Event:
    kind: str  # arrived | target_invalid | blocked | abandoned | pruned | collision
    node: int


@dataclass(frozen=True)
class LocalParams:
    arrival_tolerance: float = 0.3
    window_resolution: float = 0.1
    window_margin: float = 0.5


def _walk(pts: np.ndarray, dist: float) -> tuple[np.ndarray, int]:
    """Point reached after ``dist`` along ``pts`` and the number of vertices
    (after the first) fully reached."""
    seg = np.diff(pts, axis=0)
    lens = np.linalg.norm(seg, axis=1)
    passed = 0
    for k, length in enumerate(lens):
        if dist >= length - 1e-12:
            dist -= length
            passed = k + 1
            continue
        return pts[k] + seg[k] * (dist / length), passed
    return pts[-1].copy(), passed


def _relaxed(window: LocalWindow, start_xy, grid: np.ndarray, inflation: int) -> np.ndarray:
    """Let the agent leave an inflated region it already sits in.

    Near the start, cells stay open only if they are at least as far from
    the scan points as the start cell (and never closer than one cell).
    """
    i, j = window.cell_of(start_xy)
    if window.inside(i, j) and grid[i, j]:
        grid = grid.copy()
        k = inflation + 1
        sl = (slice(max(0, i - k), i + k + 1), slice(max(0, j - k), j + k + 1))
        floor = max(float(window.clearance[i, j]), window.resolution)
        grid[sl] = grid[sl] & (window.clearance[sl] < floor - 1e-9)
        grid[i, j] = False
    return grid


def plan_in_window(window: LocalWindow, start, goal, goal_tolerance: float,
                   inflation: int = 2) -> np.ndarray | None:
    """Collision-free 2D polyline from start toward goal inside the window.

    A goal outside the window is clipped to its border. When the goal cell
    is blocked, the closest free cell within ``goal_tolerance`` is used
    instead. Returns ``None`` if no path exists.
    """
    start = np.asarray(start, dtype=float)[:2]
    goal = np.asarray(goal, dtype=float)[:2]
    reach = window.extent - window.resolution
    off = goal - window.center
    inf_norm = np.abs(off).max()
    if inf_norm > reach:
        goal = window.center + off * (reach / inf_norm)
    grid = _relaxed(window, start, window.cells, inflation)
    gi, gj = window.cell_of(goal)
    goal_cell = (gi, gj)
    if grid[gi, gj]:
        r = int(math.ceil(goal_tolerance / window.resolution))
        ii, jj = np.mgrid[max(0, gi - r):min(window.size, gi + r + 1),
                          max(0, gj - r):min(window.size, gj + r + 1)]
        ii, jj = ii.ravel(), jj.ravel()
        centers = np.column_stack(window.point_of(ii, jj))
        dist = np.linalg.norm(centers - goal, axis=1)
        ok = (~grid[ii, jj]) & (dist <= goal_tolerance)
        if not ok.any():
            return None
        best = np.lexsort((jj[ok], ii[ok], dist[ok]))[0]
        goal_cell = (int(ii[ok][best]), int(jj[ok][best]))
        goal = window.point_of(*goal_cell)
    if window.segment_free(start, goal, grid):
        return np.array([start, goal])
    si, sj = window.cell_of(start)
    if not window.inside(si, sj):
        return None
    costs = np.where(grid, -1.0, 1.0)
    costs[si, sj] = 1.0
    mcp = MCP_Geometric(costs, fully_connected=True)
    cum, _ = mcp.find_costs([(si, sj)], [goal_cell])
    if not np.isfinite(cum[goal_cell]):
        return None
    cells = mcp.traceback(goal_cell)
    pts = [start]
    k = 0
    # greedy shortcutting along the cell path
    while k < len(cells) - 1:
        nxt = len(cells) - 1
        while nxt > k + 1 and not window.segment_free(pts[-1], window.point_of(*cells[nxt]), grid):
            nxt -= 1
        pts.append(window.point_of(*cells[nxt]))
        k = nxt
    pts[-1] = goal
    return np.array(pts)


@dataclass(frozen=True)
class StepResult:
    state: AgentState
    events: tuple[Event, ...]
    window: LocalWindow | None = None


def execute_step(g: TopoGraph, route: Route, state: AgentState, scan_points: np.ndarray,
                 desc: DepthDescriptor, limits: MotionLimits, dt: float,
                 params: LocalParams = LocalParams()) -> StepResult:
    """Advance the agent one ``dt`` toward the route target.

    ``scan_points`` are the latest valid points in the virtual frame and
    ``desc`` the descriptor built from them. Mutates ``route.index`` as graph
    nodes are passed.
    """
    target = route.target
    pos = state.position
    stopped = AgentState(pos.copy(), 0.0, state.t + dt, 0.0)
    inflation = int(math.ceil(limits.robot_radius / params.window_resolution))
    window = build_local_window(scan_points, pos, desc.config.d_max + params.window_margin,
                                params.window_resolution, limits.robot_radius)
    if route.index == 0 and len(route.path) > 1:
        first = g.nodes[route.path[0]].position
        if (np.linalg.norm(first[:2] - pos[:2]) < 1e-9
                or window.segment_free(pos, g.nodes[route.path[1]].position)):
            route.index = 1
    half_tol = 0.5 * params.arrival_tolerance
    while (route.path[route.index] != target
           and np.linalg.norm(g.nodes[route.path[route.index]].position[:2] - pos[:2]) <= half_tol):
        route.index += 1
    next_id = route.path[route.index]
    final = next_id == target
    if final and not check_target_validity(g, target, desc, pos):
        return StepResult(stopped, (Event("target_invalid", target),), window)
    goal = g.nodes[next_id].position[:2]
    if final and np.linalg.norm(goal - pos[:2]) <= params.arrival_tolerance:
        return StepResult(stopped, (Event("arrived", target),), window)
    tol = params.arrival_tolerance if final else half_tol
    poly = plan_in_window(window, pos, goal, tol, inflation)
    if poly is None:
        if final and np.linalg.norm(goal - pos[:2]) <= params.arrival_tolerance:
            return StepResult(stopped, (Event("arrived", target),), window)
        return StepResult(stopped, (Event("blocked", target),), window)

    # vertex index of each remaining graph node along the combined polyline
    tail = [g.nodes[nid].position[:2] for nid in route.path[route.index:]]
    end_gap = np.linalg.norm(poly[-1] - goal)
    if end_gap < 1e-9 or (final and end_gap <= tol):
        tail = tail[1:]
        node_vertex = [len(poly) - 1]
    else:
        node_vertex = [len(poly)]
    node_vertex += [node_vertex[0] + k for k in range(1, len(route.path) - route.index)]
    pts = np.vstack([poly, np.array(tail).reshape(-1, 2)])
    cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    remaining = float(cum[-1])
    dist, speed = trapezoid_advance(state.speed, remaining, limits.v_max, limits.a_max, dt)
    # graph edges past the window path are only followed once checked
    checked = len(poly) - 1
    while checked < len(pts) - 1 and window.segment_free(pts[checked], pts[checked + 1]):
        checked += 1
    if dist > cum[checked]:
        dist = float(cum[checked])
    if dist <= 1e-9 and remaining > 1e-9:
        if final and np.linalg.norm(goal - pos[:2]) <= params.arrival_tolerance:
            return StepResult(stopped, (Event("arrived", target),), window)
        return StepResult(stopped, (Event("blocked", target),), window)
    new_xy, _ = _walk(pts, dist)
    first_index = route.index
    for k, vtx in enumerate(node_vertex[:-1]):
        if cum[vtx] <= dist + 1e-9:
            route.index = first_index + k + 1
    new_state = AgentState(np.array([new_xy[0], new_xy[1], pos[2]]), speed, state.t + dt, 0.0)
    events = (Event("arrived", target),) if dist >= remaining - 1e-12 else ()
    return StepResult(new_state, events, window)


@dataclass(frozen=True)
class PlannerConfig:
    descriptor: DescriptorConfig = DescriptorConfig()
    frontier: FrontierConfig = FrontierConfig()
    limits: MotionLimits = MotionLimits()
    local: LocalParams = LocalParams()
    dt: float = 0.2
    max_blocked: int = 3
    prune_radius: float = 1.0


@dataclass
class IterationRecord:
    iteration: int
    t_sim: float
    t_map_update_ms: float
    t_global_ms: float
    t_local_ms: float
    coverage: float
    nodes: int
    frontiers: int
    edges: int
    graph_bytes: int
    traj_len_m: float
    plan_mode: str | None
    terminated: bool
    events: tuple[Event, ...] = ()


@dataclass
class Explorer:
    """One exploration episode; each :meth:`plan_iteration` is a full cycle
    of sense, map update, global guidance and local motion.

    ``faults`` maps iteration -> {ray index: forced range} for scripted
    sensor errors. ``clock`` of ``None`` records zero phase timings.
    """

    world: WorldMap
    sensor: SensorModel
    config: PlannerConfig
    start: tuple[float, float, float]
    seed: int = 0
    faults: Mapping[int, Mapping[int, float]] = field(default_factory=dict)
    clock: Callable[[], float] | None = time.perf_counter
    track_coverage: bool = True

    def __post_init__(self):
        self.graph = TopoGraph(self.config.descriptor)
        self.state = AgentState(self.start)
        self.iteration = 0
        self.current: int | None = None
        self.anchor: int | None = None
        self.previous: int | None = None
        self.route: Route | None = None
        self.terminated = False
        self.trajectory: list[np.ndarray] = [self.state.position.copy()]
        self.traj_len = 0.0
        self.coverage = CoverageTracker(self.world, self.sensor.d_max) if self.track_coverage else None
        self.candidate_log: list[tuple[int, float, float, float, str, int | None]] = []
        self.event_log: list[tuple[int, str, int]] = []
        self.waypoint_iteration: dict[int, int] = {}
        self.blocked_counts: dict[int, int] = {}
        self.peak_graph_bytes = 0
        self.last_window_bytes = 0
        self._arrived: int | None = None
        self.pruned: list[int] = []
        self._pruned_now: list[int] = []

    def _now(self) -> float:
        return self.clock() if self.clock is not None else 0.0

    def _scan_seed(self, it: int) -> int:
        return int(np.random.SeedSequence([self.seed, it]).generate_state(1)[0])

    def _add_waypoint_frontiers(self, desc: DepthDescriptor, it: int):
        g = self.graph
        cur = g.nodes[self.current]
        fcfg = self.config.frontier
        ivs = split_large(find_intervals(desc, fcfg), fcfg, desc.config.n)
        if self.previous is not None and self.previous in g.nodes:
            delta = g.nodes[self.previous].position - cur.position
            ivs = filter_by_last_heading(ivs, math.atan2(delta[1], delta[0]), desc)
        pts, kinds = candidates_with_kinds(desc, ivs, cur.position, fcfg)
        inserted = []
        for p, kind in zip(pts, kinds):
            ids = select_and_insert_frontiers(g, self.current, p[None, :])
            fid = ids[0] if ids else None
            inserted.extend(ids)
            self.candidate_log.append((it, float(p[0]), float(p[1]), float(p[2]), kind, fid))
        update_connectivity(g, self.current)
        if self.config.prune_radius > 0:
            self._pruned_now = prune_covered_frontiers(g, self.current, self.config.prune_radius,
                                                       set(inserted))
            self.pruned.extend(self._pruned_now)
        return inserted

    def _replan(self) -> str | None:
        # plan from the last node actually passed, which may differ from the
        # newest waypoint after an interrupted route
        start = self.anchor if self.anchor in self.graph.nodes else self.current
        plan = next_target(self.graph, start)
        if plan is None:
            self.route = None
            return None
        target = plan.order[0]
        _, path = astar_cost(self.graph, start, target)
        self.route = Route(target, path, 0, plan.mode)
        return plan.mode

    def plan_iteration(self) -> IterationRecord:
        if self.terminated:
            raise RuntimeError("episode already terminated")
        it = self.iteration
        g = self.graph
        cfg = self.config
        pos = self.state.position
        scan = raycast_scan(self.world, self.sensor, Pose(tuple(pos)), self._scan_seed(it),
                            overrides=self.faults.get(it), stamp=self.state.t)
        if self.coverage is not None:
            self.coverage.add(pos)
        events: list[Event] = []

        t0 = self._now()
        valid = extract_valid_points(scan, cfg.descriptor)
        desc = build_descriptor(valid, cfg.descriptor)
        if self.current is None:
            self.current = self.anchor = g.add_node(NodeType.WAYPOINT, pos, desc)
            self.waypoint_iteration[self.current] = it
            self._add_waypoint_frontiers(desc, it)
            self.route = None
        elif self._arrived is not None:
            tid = self._arrived
            self._arrived = None
            convert_to_waypoint(g, tid, desc, pos)
            self.waypoint_iteration[tid] = it
            self.previous, self.current = self.current, tid
            self.anchor = tid
            self._add_waypoint_frontiers(desc, it)
            self.route = None
        t1 = self._now()
        events.extend(Event("pruned", n) for n in self._pruned_now)
        self._pruned_now = []

        mode = None
        t_global = 0.0
        t_local = 0.0
        if g.frontier_index:
            if self.route is None or self.route.target not in g.frontier_index:
                mode = self._replan()
            t2 = self._now()
            t_global += t2 - t1
            while self.route is not None:
                result = execute_step(g, self.route, self.state, valid, desc, cfg.limits, cfg.dt, cfg.local)
                self.last_window_bytes = result.window.nbytes if result.window is not None else 0
                t3 = self._now()
                t_local += t3 - t2
                kinds = {e.kind for e in result.events}
                if "target_invalid" in kinds:
                    events.extend(result.events)
                    remove_invalid_node(g, self.route.target)
                    t2 = self._now()
                    mode = self._replan()
                    t3b = self._now()
                    t_global += t3b - t2
                    t2 = t3b
                    continue
                new_pos, hit = clamp_motion(self.world, self.state.position, result.state.position)
                if hit:
                    # the simulator stops the agent at contact; counts as blocked
                    result = StepResult(AgentState(new_pos, 0.0, result.state.t, 0.0),
                                        (Event("collision", self.route.target),), result.window)
                    kinds = {"blocked"}
                events.extend(result.events)
                if self.route.index > 0:
                    self.anchor = self.route.path[self.route.index - 1]
                moved = float(np.linalg.norm(result.state.position - self.state.position))
                self.state = result.state
                if moved > 0.0:
                    self.traj_len += moved
                    self.trajectory.append(self.state.position.copy())
                if "arrived" in kinds:
                    self._arrived = self.route.target
                    self.route = None
                elif "blocked" in kinds:
                    tid = self.route.target
                    self.blocked_counts[tid] = self.blocked_counts.get(tid, 0) + 1
                    self.route = None
                    if self.blocked_counts[tid] >= cfg.max_blocked:
                        remove_invalid_node(g, tid)
                        events.append(Event("abandoned", tid))
                break
        speed = self.state.speed if self.route is not None else 0.0
        self.state = AgentState(self.state.position, speed, (it + 1) * cfg.dt, 0.0)
        self.terminated = not g.frontier_index and self._arrived is None
        for e in events:
            self.event_log.append((it, e.kind, e.node))
        gb = graph_memory_bytes(g)
        self.peak_graph_bytes = max(self.peak_graph_bytes, gb)
        rec = IterationRecord(
            iteration=it, t_sim=self.state.t,
            t_map_update_ms=(t1 - t0) * 1e3, t_global_ms=t_global * 1e3, t_local_ms=t_local * 1e3,
            coverage=self.coverage.fraction if self.coverage is not None else float("nan"),
            nodes=len(g), frontiers=len(g.frontier_index), edges=g.edge_count, graph_bytes=gb,
            traj_len_m=self.traj_len, plan_mode=mode, terminated=self.terminated, events=tuple(events))
        self.iteration += 1
        return rec

    def run(self, max_iterations: int, on_iteration: Callable[[IterationRecord], None] | None = None
            ) -> list[IterationRecord]:
        records = []
        while not self.terminated and self.iteration < max_iterations:
            rec = self.plan_iteration()
            records.append(rec)
            if on_iteration is not None:
                on_iteration(rec)
        return records
