"""Rendezvous machinery: spanning tree, leader election, frame unification,
fusion, decomposition, and optimal assignment."""
import itertools
import math

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from softsearch.coordination import (
    DecompositionError,
    HistoryEntry,
    InteractionHistory,
    assign,
    assignment_cost,
    build_spanning_tree,
    closeness_centrality,
    decompose,
    elect_leader,
    fuse_sets,
    fusion_order,
    replicate_missions,
    tree_distances,
    unify_frames,
)
from softsearch.geometry import ExplorationRegion, SearchBudget
from softsearch.world import ContractError


def chain_adjacency(ids):
    adj = {i: set() for i in ids}
    for a, b in zip(ids, ids[1:]):
        adj[a].add(b)
        adj[b].add(a)
    return adj


# -- spanning tree / leader -------------------------------------------------


def test_spanning_tree_chain():
    tree = build_spanning_tree([3, 1, 2], chain_adjacency([1, 2, 3]))
    assert tree == {1: [2], 2: [1, 3], 3: [2]}


def test_spanning_tree_rejects_disconnected():
    adj = {1: {2}, 2: {1}, 3: set()}
    with pytest.raises(ContractError):
        build_spanning_tree([1, 2, 3], adj)
    with pytest.raises(ContractError):
        build_spanning_tree([], {})


def test_spanning_tree_deterministic_on_complete_graph():
    ids = [5, 2, 9, 7]
    adj = {i: set(ids) - {i} for i in ids}
    a = build_spanning_tree(ids, adj)
    b = build_spanning_tree(list(reversed(ids)), adj)
    assert a == b


def test_tree_distances_and_centrality():
    tree = {1: [2], 2: [1, 3], 3: [2]}
    assert tree_distances(tree, 1) == {1: 0, 2: 1, 3: 2}
    assert closeness_centrality(tree, 2) == 1.0  # distance 1 to both
    assert closeness_centrality(tree, 1) == pytest.approx(2 / 3)


def test_elect_leader_prefers_center_then_lowest_id():
    chain = {1: [2], 2: [1, 3], 3: [2]}
    assert elect_leader(chain) == 2
    pair = {4: [7], 7: [4]}
    assert elect_leader(pair) == 4  # tie broken by lowest id


# -- frame unification / fusion -----------------------------------------------


def test_unify_frames_composes_along_tree():
    # chain 1-2-3 with known relative translations
    tree = {1: [2], 2: [1, 3], 3: [2]}
    offsets = {(1, 2): (5, -2), (2, 1): (-5, 2), (3, 2): (1, 1), (2, 3): (-1, -1)}
    transforms = unify_frames(tree, 2, lambda i, j: offsets[(i, j)])
    assert transforms[2] == (0, 0)
    assert transforms[1] == (5, -2)
    assert transforms[3] == (1, 1)
    # re-rooting at 1 composes 3 -> 2 -> 1
    transforms1 = unify_frames(tree, 1, lambda i, j: offsets[(i, j)])
    assert transforms1[3] == (1 - 5, 1 + 2)


def test_fusion_order_ends_at_leader():
    tree = {1: [2], 2: [1, 3], 3: [2]}
    order = fusion_order(tree, 2)
    assert order[-1] == 2
    assert set(order) == {1, 2, 3}


def test_fuse_sets_unions_everything():
    tree = {1: [2], 2: [1, 3], 3: [2]}
    region = ExplorationRegion((0, 0), 5, 5)
    histories = {
        1: InteractionHistory([HistoryEntry(1, region, 3)]),
        2: InteractionHistory(),
        3: InteractionHistory([HistoryEntry(1, region, 9)]),
    }
    explored = {1: {(0, 0)}, 2: {(1, 1)}, 3: {(2, 2)}}
    hist, cells = fuse_sets(tree, 2, histories, explored)
    assert cells == {(0, 0), (1, 1), (2, 2)}
    assert hist.get(1).tick == 9  # newest entry wins


def test_history_newest_wins_and_merge():
    r1 = ExplorationRegion((0, 0), 5, 5)
    r2 = ExplorationRegion((10, 0), 5, 5)
    h = InteractionHistory([HistoryEntry(1, r1, 5)])
    h.update(HistoryEntry(1, r2, 7))
    assert h.get(1).region == r2
    h.update(HistoryEntry(1, r1, 6))  # older: ignored
    assert h.get(1).region == r2
    other = InteractionHistory([HistoryEntry(2, r1, 1)])
    h.merge(other)
    assert len(h) == 2 and h.regions().count(r1) == 1


# -- assignment ----------------------------------------------------------------


def brute_force_min(cost):
    n = cost.shape[0]
    return min(
        sum(cost[i, p[i]] for i in range(n)) for p in itertools.permutations(range(n))
    )


def test_assignment_matches_brute_force_on_regions():
    rng = np.random.default_rng(0)
    for trial in range(30):
        n = int(rng.integers(2, 7))
        regions = [
            ExplorationRegion((int(rng.integers(0, 200)), int(rng.integers(0, 200))), 10, 10)
            for _ in range(n)
        ]
        poses = {i: (int(rng.integers(0, 200)), int(rng.integers(0, 200))) for i in range(n)}
        result = assign(regions, poses)
        cost = np.array(
            [
                [math.hypot(poses[i][0] - r.centroid[0], poses[i][1] - r.centroid[1]) for r in regions]
                for i in sorted(poses)
            ]
        )
        assert assignment_cost(result, poses) == pytest.approx(brute_force_min(cost))


def test_assign_requires_matching_counts():
    with pytest.raises(ContractError):
        assign([ExplorationRegion((0, 0), 5, 5)], {0: (0, 0), 1: (1, 1)})


def test_linear_sum_assignment_matches_brute_force_random_matrices():
    rng = np.random.default_rng(123)
    for _ in range(50):
        n = int(rng.integers(2, 8))
        cost = rng.random((n, n)) * 100
        rows, cols = linear_sum_assignment(cost)
        assert cost[rows, cols].sum() == pytest.approx(brute_force_min(cost))


# -- decomposition ---------------------------------------------------------------


def budgets(n, tau=500):
    return [SearchBudget(tau=tau, r=20) for _ in range(n)]


@pytest.mark.parametrize("n", [1, 2, 3, 4, 7, 8, 10])
def test_decompose_disjoint_with_margin_gap(n):
    regions = decompose(n, budgets(n), m=40, centroid=(0.0, 0.0), avoid=[], max_extent=4000)
    assert len(regions) == n
    for i, a in enumerate(regions):
        for b in regions[i + 1 :]:
            assert not a.intersects(b)
            assert a.gap_to(b) >= 40


def test_decompose_avoids_given_regions():
    avoid = [ExplorationRegion((-300, -300), 600, 600)]
    regions = decompose(3, budgets(3), m=40, centroid=(0.0, 0.0), avoid=avoid, max_extent=4000)
    for r in regions:
        assert not r.intersects(avoid[0])


def test_decompose_respects_feasibility_veto():
    # forbid everything below y = 500: placement must move up
    ok = lambda r: r.origin[1] >= 500
    regions = decompose(2, budgets(2), m=40, centroid=(0.0, 0.0), avoid=[], max_extent=4000, feasible=ok)
    assert all(ok(r) for r in regions)


def test_decompose_raises_when_no_placement():
    with pytest.raises(DecompositionError):
        decompose(2, budgets(2), m=40, centroid=(0.0, 0.0), avoid=[], max_extent=100,
                  feasible=lambda r: False)


def test_decompose_validates_inputs():
    with pytest.raises(ContractError):
        decompose(0, [], m=40, centroid=(0, 0), avoid=[], max_extent=100)
    with pytest.raises(ContractError):
        decompose(11, budgets(11), m=40, centroid=(0, 0), avoid=[], max_extent=100)
    with pytest.raises(ContractError):
        decompose(2, budgets(3), m=40, centroid=(0, 0), avoid=[], max_extent=100)


def test_region_sizes_match_budgets():
    mixed = [SearchBudget(tau=500, r=20), SearchBudget(tau=100, r=20)]
    regions = decompose(2, mixed, m=40, centroid=(0.0, 0.0), avoid=[], max_extent=4000)
    assert regions[0].area >= 2 * 20 * 500
    assert regions[1].area >= 2 * 20 * 100


# -- replication -----------------------------------------------------------------


def test_replicate_missions_gives_everyone_everything():
    regions = decompose(3, budgets(3), m=40, centroid=(0.0, 0.0), avoid=[], max_extent=4000)
    assignment = {i: regions[i] for i in range(3)}
    updates = replicate_missions(0, InteractionHistory(), assignment, tick=17)
    for i, up in updates.items():
        assert up.region == assignment[i]
        assert len(up.history) == 3
        assert up.history.get(i).tick == 17
        assert set(up.new_interference) == {r for j, r in assignment.items() if j != i}
