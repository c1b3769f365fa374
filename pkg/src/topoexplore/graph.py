"""Sparse topological graph of waypoint and frontier nodes.

Nodes keep a position, a type, an adjacency map of Euclidean edge costs and,
for visited (waypoint) nodes only, the depth descriptor captured there.
"""

from __future__ import annotations

import copy
import enum
import heapq
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .descriptor import DepthDescriptor, DescriptorConfig, covers_point
from .errors import ContractViolation, GraphParseError

HEADER_BYTES = 64
NODE_RECORD_BYTES = 48  # id, type tag, xyz, adjacency head
EDGE_RECORD_BYTES = 32  # one (neighbour id, cost) entry on each side


class NodeType(enum.Enum):
    WAYPOINT = "WAYPOINT"
    FRONTIER = "FRONTIER"


@dataclass(eq=False)
class TopoNode:
    id: int
    node_type: NodeType
    position: np.ndarray
    descriptor: DepthDescriptor | None = None
    adj: dict[int, float] = field(default_factory=dict)

    @property
    def is_frontier(self) -> bool:
        return self.node_type is NodeType.FRONTIER


class SpatialHash:
    """Uniform hash grid answering exact radius queries over node ids."""

    def __init__(self, cell_size: float):
        self.cell_size = float(cell_size)
        self._cells: dict[tuple[int, int], set[int]] = defaultdict(set)
        self._where: dict[int, tuple[int, int]] = {}
        self._pos: dict[int, tuple[float, float]] = {}

    def _key(self, x, y):
        return int(math.floor(x / self.cell_size)), int(math.floor(y / self.cell_size))

    def insert(self, key: int, x: float, y: float):
        cell = self._key(x, y)
        self._cells[cell].add(key)
        self._where[key] = cell
        self._pos[key] = (x, y)

    def remove(self, key: int):
        cell = self._where.pop(key)
        del self._pos[key]
        bucket = self._cells[cell]
        bucket.discard(key)
        if not bucket:
            del self._cells[cell]

    def move(self, key: int, x: float, y: float):
        self.remove(key)
        self.insert(key, x, y)

    def query(self, x: float, y: float, radius: float) -> list[int]:
        """Ids strictly closer than ``radius`` (planar), ascending."""
        cx0, cy0 = self._key(x - radius, y - radius)
        cx1, cy1 = self._key(x + radius, y + radius)
        r2 = radius * radius
        hits = []
        for cx in range(cx0, cx1 + 1):
            for cy in range(cy0, cy1 + 1):
                for key in self._cells.get((cx, cy), ()):
                    px, py = self._pos[key]
                    if (px - x) ** 2 + (py - y) ** 2 < r2:
                        hits.append(key)
        hits.sort()
        return hits


class TopoGraph:
    def __init__(self, config: DescriptorConfig):
        self.config = config
        self.nodes: dict[int, TopoNode] = {}
        self.frontier_index: set[int] = set()
        self.spatial_index = SpatialHash(config.d_max)
        self.next_id = 0

    def __len__(self):
        return len(self.nodes)

    def __contains__(self, node_id):
        return node_id in self.nodes

    def node(self, node_id: int) -> TopoNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise ContractViolation(f"unknown node id {node_id}") from None

    def add_node(self, node_type: NodeType, position, descriptor: DepthDescriptor | None = None) -> int:
        if (node_type is NodeType.WAYPOINT) != (descriptor is not None):
            raise ContractViolation("waypoints need a descriptor; frontiers must not carry one")
        nid = self.next_id
        self.next_id += 1
        pos = np.array(position, dtype=np.float64).reshape(3)
        self.nodes[nid] = TopoNode(nid, node_type, pos, descriptor)
        if node_type is NodeType.FRONTIER:
            self.frontier_index.add(nid)
        self.spatial_index.insert(nid, pos[0], pos[1])
        return nid

    def add_edge(self, i: int, j: int) -> float:
        if i == j:
            raise ContractViolation("self loops are not allowed")
        a, b = self.node(i), self.node(j)
        cost = float(np.linalg.norm(a.position - b.position))
        a.adj[j] = cost
        b.adj[i] = cost
        return cost

    def remove_node(self, node_id: int):
        node = self.node(node_id)
        for other in node.adj:
            del self.nodes[other].adj[node_id]
        del self.nodes[node_id]
        self.frontier_index.discard(node_id)
        self.spatial_index.remove(node_id)

    def nodes_within(self, point, radius: float) -> list[int]:
        """Ids with 3D distance to ``point`` below ``radius``, ascending."""
        p = np.asarray(point, dtype=np.float64)
        out = []
        for nid in self.spatial_index.query(p[0], p[1], radius):
            if np.linalg.norm(self.nodes[nid].position - p) < radius:
                out.append(nid)
        return out

    def waypoint_ids(self) -> list[int]:
        return sorted(nid for nid, n in self.nodes.items() if not n.is_frontier)

    def edges(self) -> Iterator[tuple[int, int, float]]:
        for i in sorted(self.nodes):
            for j, c in sorted(self.nodes[i].adj.items()):
                if i < j:
                    yield i, j, c

    @property
    def edge_count(self) -> int:
        return sum(len(n.adj) for n in self.nodes.values()) // 2

    def copy(self) -> "TopoGraph":
        return copy.deepcopy(self)

    def audit(self):
        """Raise ContractViolation naming the first broken structural invariant."""
        for nid, node in self.nodes.items():
            if node.id != nid:
                raise ContractViolation(f"node {nid} stored under wrong id")
            if node.is_frontier == (node.descriptor is not None):
                raise ContractViolation(f"node {nid}: descriptor presence does not match type")
            for j, c in node.adj.items():
                other = self.nodes.get(j)
                if other is None:
                    raise ContractViolation(f"edge {nid}-{j} points to a missing node")
                if other.adj.get(nid) != c:
                    raise ContractViolation(f"edge {nid}-{j} is not symmetric")
                if c != float(np.linalg.norm(node.position - other.position)):
                    raise ContractViolation(f"edge {nid}-{j} cost is not the Euclidean distance")
        expected = {nid for nid, n in self.nodes.items() if n.is_frontier}
        if expected != self.frontier_index:
            raise ContractViolation("frontier_index does not match node types")
        if any(nid >= self.next_id for nid in self.nodes):
            raise ContractViolation("node id at or above next_id")

    def structurally_equal(self, other: "TopoGraph") -> bool:
        if self.config != other.config or self.next_id != other.next_id:
            return False
        if self.nodes.keys() != other.nodes.keys():
            return False
        for nid, a in self.nodes.items():
            b = other.nodes[nid]
            if (a.node_type is not b.node_type or not np.array_equal(a.position, b.position)
                    or a.descriptor != b.descriptor or a.adj != b.adj):
                return False
        return self.frontier_index == other.frontier_index


def select_and_insert_frontiers(g: TopoGraph, current: int, candidates) -> list[int]:
    """Insert candidates not already observed by any historical waypoint.

    The current node is excluded from the coverage check: every candidate
    lies inside its own view by construction.
    """
    cur = g.node(current)
    if cur.is_frontier:
        raise ContractViolation(f"node {current} is not a waypoint")
    d_max = g.config.d_max
    inserted = []
    for w in np.asarray(candidates, dtype=np.float64).reshape(-1, 3):
        covered = False
        for nid in g.nodes_within(w, d_max):
            node = g.nodes[nid]
            if nid == current or node.is_frontier:
                continue
            if covers_point(node.descriptor, node.position, w):
                covered = True
                break
        if not covered:
            fid = g.add_node(NodeType.FRONTIER, w)
            g.add_edge(current, fid)
            inserted.append(fid)
    return inserted


def prune_covered_frontiers(g: TopoGraph, current: int, radius: float, keep=()) -> list[int]:
    """Remove older frontier nodes closer than ``radius`` to the waypoint
    ``current`` and inside its observed range.

    Such a frontier has effectively been visited: the candidates generated at
    ``current`` stand in for the ones it would have produced.
    """
    cur = g.node(current)
    if cur.descriptor is None:
        raise ContractViolation(f"node {current} has no descriptor")
    removed = []
    for nid in g.nodes_within(cur.position, min(radius, g.config.d_max)):
        if nid in keep or nid not in g.frontier_index:
            continue
        if covers_point(cur.descriptor, cur.position, g.nodes[nid].position):
            g.remove_node(nid)
            removed.append(nid)
    return removed


def convert_to_waypoint(g: TopoGraph, node_id: int, desc: DepthDescriptor, observed_position):
    node = g.node(node_id)
    if not node.is_frontier:
        raise ContractViolation(f"node {node_id} is not a frontier")
    node.node_type = NodeType.WAYPOINT
    node.descriptor = desc
    node.position = np.array(observed_position, dtype=np.float64).reshape(3)
    g.frontier_index.discard(node_id)
    g.spatial_index.move(node_id, node.position[0], node.position[1])
    for other in list(node.adj):
        g.add_edge(node_id, other)


def update_connectivity(g: TopoGraph, current: int) -> list[tuple[int, int, float]]:
    """Add edges from ``current`` to every node its descriptor sees."""
    cur = g.node(current)
    if cur.descriptor is None:
        raise ContractViolation(f"node {current} has no descriptor")
    added = []
    for nid in g.nodes_within(cur.position, g.config.d_max):
        if nid == current or nid in cur.adj:
            continue
        if covers_point(cur.descriptor, cur.position, g.nodes[nid].position):
            added.append((current, nid, g.add_edge(current, nid)))
    return added


def remove_invalid_node(g: TopoGraph, node_id: int):
    if not g.node(node_id).is_frontier:
        raise ContractViolation(f"refusing to remove waypoint {node_id}")
    g.remove_node(node_id)


def check_target_validity(g: TopoGraph, target: int, current_desc: DepthDescriptor, current_pos) -> bool:
    node = g.node(target)
    if np.linalg.norm(node.position - np.asarray(current_pos, dtype=np.float64)) >= g.config.d_max:
        return True
    return covers_point(current_desc, current_pos, node.position)


def astar_cost(g: TopoGraph, a: int, b: int) -> tuple[float, list[int]]:
    """Shortest path by summed edge cost; ``(inf, [])`` when unreachable."""
    g.node(a)
    goal = g.node(b).position
    best = {a: 0.0}
    parent: dict[int, int] = {}
    heap = [(float(np.linalg.norm(g.nodes[a].position - goal)), 0.0, a)]
    closed = set()
    while heap:
        _, cost, u = heapq.heappop(heap)
        if u in closed:
            continue
        if u == b:
            path = [u]
            while path[-1] != a:
                path.append(parent[path[-1]])
            return cost, path[::-1]
        closed.add(u)
        for v, c in g.nodes[u].adj.items():
            nc = cost + c
            if v not in closed and nc < best.get(v, math.inf):
                best[v] = nc
                parent[v] = u
                h = float(np.linalg.norm(g.nodes[v].position - goal))
                heapq.heappush(heap, (nc + h, nc, v))
    return math.inf, []


def pairwise_costs(g: TopoGraph, ids: Sequence[int]) -> np.ndarray:
    """Graph shortest-path costs between ``ids`` (rows/cols in that order).

    Uses one single-source search per row, which yields the same costs as
    pairwise :func:`astar_cost`.
    """
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import dijkstra

    order = sorted(g.nodes)
    index = {nid: k for k, nid in enumerate(order)}
    rows, cols, vals = [], [], []
    for i, j, c in g.edges():
        rows += [index[i], index[j]]
        cols += [index[j], index[i]]
        vals += [c, c]
    n = len(order)
    mat = csr_matrix((vals, (rows, cols)), shape=(n, n))
    src = [index[i] for i in ids]
    dist = dijkstra(mat, directed=True, indices=src)
    return dist[:, src]


def graph_memory_bytes(g: TopoGraph) -> int:
    total = HEADER_BYTES + NODE_RECORD_BYTES * len(g.nodes) + EDGE_RECORD_BYTES * g.edge_count
    total += sum(n.descriptor.nbytes for n in g.nodes.values() if n.descriptor is not None)
    return total


def serialize(g: TopoGraph) -> str:
    c = g.config
    lines = [f"topograph theta_deg={c.theta_deg!r} d_max={c.d_max!r} h={c.h!r} "
             f"delta_theta_deg={c.delta_theta_deg!r} next_id={g.next_id}"]
    for nid in sorted(g.nodes):
        n = g.nodes[nid]
        x, y, z = n.position.tolist()
        line = f"node {nid} {n.node_type.value} {x!r} {y!r} {z!r}"
        if n.descriptor is not None:
            line += " " + n.descriptor.to_text()
        lines.append(line)
    lines.extend(f"edge {i} {j} {c!r}" for i, j, c in g.edges())
    return "\n".join(lines) + "\n"


def deserialize(text: str) -> TopoGraph:
    lines = text.splitlines()
    if not lines:
        raise GraphParseError("line 1: empty graph text")
    head = lines[0].split()
    if not head or head[0] != "topograph":
        raise GraphParseError("line 1: expected 'topograph' header")
    try:
        meta = dict(tok.split("=", 1) for tok in head[1:])
        config = DescriptorConfig(float(meta["theta_deg"]), float(meta["d_max"]),
                                  float(meta["h"]), float(meta["delta_theta_deg"]))
        next_id = int(meta["next_id"])
    except (KeyError, ValueError) as exc:
        raise GraphParseError(f"line 1: malformed header ({exc})") from None
    g = TopoGraph(config)
    for lineno, line in enumerate(lines[1:], start=2):
        tok = line.split()
        if not tok:
            continue
        try:
            if tok[0] == "node":
                nid = int(tok[1])
                ntype = NodeType(tok[2])
                pos = np.array([float(v) for v in tok[3:6]])
                desc = None
                if ntype is NodeType.WAYPOINT:
                    desc = DepthDescriptor.from_text(" ".join(tok[6:10]), config)
                elif len(tok) != 6:
                    raise ValueError("frontier node with extra fields")
                if nid in g.nodes:
                    raise ValueError(f"duplicate node id {nid}")
                g.nodes[nid] = TopoNode(nid, ntype, pos, desc)
                if ntype is NodeType.FRONTIER:
                    g.frontier_index.add(nid)
                g.spatial_index.insert(nid, pos[0], pos[1])
            elif tok[0] == "edge":
                i, j, c = int(tok[1]), int(tok[2]), float(tok[3])
                if len(tok) != 4 or i not in g.nodes or j not in g.nodes or i == j:
                    raise ValueError("bad edge record")
                g.nodes[i].adj[j] = c
                g.nodes[j].adj[i] = c
            else:
                raise ValueError(f"unknown record {tok[0]!r}")
        except (ValueError, IndexError) as exc:
            raise GraphParseError(f"line {lineno}: {exc}") from None
    g.next_id = next_id
    return g
