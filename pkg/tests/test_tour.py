import itertools
import math

import numpy as np
import pytest

from topoexplore.descriptor import DepthDescriptor, DescriptorConfig
from topoexplore.errors import UnreachableFrontiersError
from topoexplore.graph import NodeType, TopoGraph
from topoexplore.planner import ATSP, SHORTCUT, next_target
from topoexplore.tour import solve_atsp, solve_heuristic, tour_cost

CFG = DescriptorConfig()
OPEN = DepthDescriptor(np.full(72, 5.0), CFG)


def brute_force(c):
    m = len(c) - 1
    if m == 0:
        return 0.0
    perms = np.array(list(itertools.permutations(range(1, m + 1))))
    cost = c[0, perms[:, 0]].copy()
    for k in range(m - 1):
        cost += c[perms[:, k], perms[:, k + 1]]
    return float(cost.min())


def euclid_matrix(rng, m, detour=0.3):
    pts = rng.uniform(0, 30, (m + 1, 2))
    base = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    # graph costs exceed straight lines by an asymmetric factor
    return base * (1.0 + rng.uniform(0, detour, base.shape))


def test_single_frontier():
    order, cost = solve_atsp([[0, 4.0], [7.0, 0]])
    assert order == [1] and cost == 4.0


def test_collinear_frontiers_in_distance_order():
    x = np.array([0.0, 2.0, 3.0, 1.0])
    c = np.abs(x[:, None] - x[None])
    order, cost = solve_atsp(c)
    assert order == [3, 1, 2] and cost == 3.0


def test_return_leg_is_free():
    c = np.array([[0, 1, 5], [100, 0, 1], [100, 1, 0]], dtype=float)
    assert solve_atsp(c) == ([1, 2], 2.0)


@pytest.mark.parametrize("block", range(4))
def test_exact_matches_brute_force(block):
    rng = np.random.default_rng(100 + block)
    for _ in range(50):
        m = int(rng.integers(1, 9))
        c = rng.uniform(0.1, 10.0, (m + 1, m + 1))
        order, cost = solve_atsp(c)
        assert sorted(order) == list(range(1, m + 1))
        c0 = c.copy()
        c0[:, 0] = 0.0
        assert cost == pytest.approx(brute_force(c0), rel=1e-12, abs=1e-12)
        assert cost == pytest.approx(tour_cost(c0, order))


def test_heuristic_within_bound_of_exact():
    rng = np.random.default_rng(7)
    worst = 1.0
    for _ in range(200):
        m = int(rng.integers(2, 13))
        c = euclid_matrix(rng, m)
        _, exact = solve_atsp(c)
        order, heur = solve_heuristic(c)
        assert sorted(order) == list(range(1, m + 1))
        worst = max(worst, heur / exact)
        assert heur <= 1.3 * exact + 1e-9
    print(f"worst heuristic/exact ratio {worst:.4f}")


def test_large_instance_uses_heuristic():
    rng = np.random.default_rng(1)
    c = euclid_matrix(rng, 40)
    order, cost = solve_atsp(c)
    assert sorted(order) == list(range(1, 41))
    assert cost == pytest.approx(solve_heuristic(c)[1])


def test_unreachable_listed():
    c = np.array([[0, 1, np.inf], [1, 0, np.inf], [np.inf, np.inf, 0]])
    with pytest.raises(UnreachableFrontiersError) as exc:
        solve_atsp(c)
    assert exc.value.node_ids == [2]


def _star():
    g = TopoGraph(CFG)
    cur = g.add_node(NodeType.WAYPOINT, (0, 0, 1), OPEN)
    return g, cur


def test_shortcut_to_nearest_adjacent():
    g, cur = _star()
    a = g.add_node(NodeType.FRONTIER, (3, 0, 1))
    b = g.add_node(NodeType.FRONTIER, (0, 2, 1))
    g.add_edge(cur, a)
    assert next_target(g, cur).order == (a,)
    g.add_edge(cur, b)
    plan = next_target(g, cur)
    assert plan.mode == SHORTCUT and plan.order == (b,) and plan.total_cost == 2.0


def test_shortcut_tie_goes_to_lowest_id():
    g, cur = _star()
    a = g.add_node(NodeType.FRONTIER, (2, 0, 1))
    b = g.add_node(NodeType.FRONTIER, (0, 2, 1))
    g.add_edge(cur, b)
    g.add_edge(cur, a)
    assert next_target(g, cur).order == (a,)


def test_atsp_plan_matches_enumeration():
    g, cur = _star()
    w1 = g.add_node(NodeType.WAYPOINT, (4, 0, 1), OPEN)
    w2 = g.add_node(NodeType.WAYPOINT, (-3, 0, 1), OPEN)
    g.add_edge(cur, w1)
    g.add_edge(cur, w2)
    fr = []
    for hub, off in ((w1, (1, 1)), (w1, (2, -1)), (w2, (-1, 2))):
        p = g.node(hub).position
        f = g.add_node(NodeType.FRONTIER, (p[0] + off[0], p[1] + off[1], 1))
        g.add_edge(hub, f)
        fr.append(f)
    g.add_edge(fr[0], fr[1])
    plan = next_target(g, cur)
    assert plan.mode == ATSP and sorted(plan.order) == sorted(fr)
    from topoexplore.graph import astar_cost
    best = math.inf
    for perm in itertools.permutations(fr):
        cost, prev = 0.0, cur
        for f in perm:
            cost += astar_cost(g, prev, f)[0]
            prev = f
        best = min(best, cost)
    assert plan.total_cost == pytest.approx(best)


def test_no_frontiers_means_done():
    g, cur = _star()
    assert next_target(g, cur) is None


def test_shortcut_dominance_on_random_graphs():
    rng = np.random.default_rng(5)
    for _ in range(30):
        g, cur = _star()
        for _ in range(int(rng.integers(1, 8))):
            f = g.add_node(NodeType.FRONTIER, (*rng.uniform(-5, 5, 2), 1))
            g.add_edge(cur, f)
        plan = next_target(g, cur)
        assert plan.mode == SHORTCUT and plan.order[0] in g.node(cur).adj


def test_disconnected_frontier_raises():
    g, cur = _star()
    g.add_node(NodeType.FRONTIER, (3, 0, 1))
    with pytest.raises(UnreachableFrontiersError) as exc:
        next_target(g, cur)
    assert exc.value.node_ids == [1]
