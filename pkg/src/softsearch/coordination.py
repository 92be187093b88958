"""Rendezvous machinery: spanning tree, closeness-centrality leader election,
frame unification, data fusion, cellular decomposition with margins, optimal
region assignment, and mission replication.

A coordination event is a synchronous transaction run by the simulation
engine: tree -> leader -> unify frames -> fuse -> decompose -> assign ->
replicate, with the involved robots stationary for its duration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, TypeVar

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import ExplorationRegion, SearchBudget, region_side_for_budget
from .world import Cell, ContractError

T = TypeVar("T")

Translation = tuple[int, int]


class DecompositionError(RuntimeError):
    """No feasible region placement within the allowed search window."""


# ---------------------------------------------------------------------------
# Interaction history


@dataclass(frozen=True)
class HistoryEntry:
    robot_id: int
    region: ExplorationRegion
    tick: int  # assignment time; newer assignments replace older ones


class InteractionHistory:
    """Latest known exploration region per robot (at most one entry each)."""

    def __init__(self, entries: Iterable[HistoryEntry] = ()):
        self._by_robot: dict[int, HistoryEntry] = {}
        for e in entries:
            self.update(e)

    def update(self, entry: HistoryEntry) -> None:
        cur = self._by_robot.get(entry.robot_id)
        if cur is None or entry.tick >= cur.tick:
            self._by_robot[entry.robot_id] = entry

    def merge(self, other: "InteractionHistory") -> None:
        for e in other._by_robot.values():
            self.update(e)

    def copy(self) -> "InteractionHistory":
        return InteractionHistory(self._by_robot.values())

    def regions(self) -> list[ExplorationRegion]:
        return [e.region for e in self._by_robot.values()]

    def entries(self) -> list[HistoryEntry]:
        return sorted(self._by_robot.values(), key=lambda e: e.robot_id)

    def get(self, robot_id: int) -> HistoryEntry | None:
        return self._by_robot.get(robot_id)

    def __len__(self) -> int:
        return len(self._by_robot)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, InteractionHistory) and self._by_robot == other._by_robot


@dataclass
class EncounterGroup:
    members: list[int]
    tree: dict[int, list[int]]
    leader: int
    delta_t: int


# ---------------------------------------------------------------------------
# Spanning tree and leader election


def build_spanning_tree(
    members: Iterable[int], comm_adjacency: dict[int, set[int]]
) -> dict[int, list[int]]:
    """Deterministic BFS spanning tree rooted at the lowest robot id;
    neighbors visited in ascending id order. Raises if disconnected."""
    members = sorted(members)
    if not members:
        raise ContractError("no members")
    root = members[0]
    member_set = set(members)
    tree: dict[int, list[int]] = {m: [] for m in members}
    seen = {root}
    queue = [root]
    while queue:
        node = queue.pop(0)
        for nbr in sorted(comm_adjacency.get(node, ())):
            if nbr in member_set and nbr not in seen:
                seen.add(nbr)
                tree[node].append(nbr)
                tree[nbr].append(node)
                queue.append(nbr)
    if seen != member_set:
        raise ContractError(f"members {sorted(member_set - seen)} unreachable from {root}")
    return tree


def tree_distances(tree: dict[int, list[int]], source: int) -> dict[int, int]:
    dist = {source: 0}
    queue = [source]
    while queue:
        node = queue.pop(0)
        for nbr in tree[node]:
            if nbr not in dist:
                dist[nbr] = dist[node] + 1
                queue.append(nbr)
    return dist


def closeness_centrality(tree: dict[int, list[int]], node: int) -> float:
    """Reciprocal average tree distance to all other nodes (1.0 for a
    two-node tree; defined as inf for a singleton)."""
    dist = tree_distances(tree, node)
    others = len(dist) - 1
    if others == 0:
        return math.inf
    return others / sum(dist.values())


def elect_leader(tree: dict[int, list[int]]) -> int:
    """Node with the highest closeness centrality; ties by lowest id."""
    if not tree:
        raise ContractError("empty tree")
    return max(sorted(tree), key=lambda n: (closeness_centrality(tree, n), -n))


# ---------------------------------------------------------------------------
# Frame unification and data fusion


def unify_frames(
    tree: dict[int, list[int]],
    leader: int,
    edge_offsets: Callable[[int, int], Translation],
) -> dict[int, Translation]:
    """Per-robot translation into the leader frame, composed from noise-free
    relative observations along tree edges.

    ``edge_offsets(i, j)`` is the translation from i's frame to j's frame
    (rotations are identity: all robots share a compass). The returned
    transform t_i satisfies leader_cell = member_cell + t_i.
    """
    transforms: dict[int, Translation] = {leader: (0, 0)}
    queue = [leader]
    while queue:
        node = queue.pop(0)
        for nbr in tree[node]:
            if nbr not in transforms:
                rel = edge_offsets(nbr, node)  # nbr frame -> node frame
                tx, ty = transforms[node]
                transforms[nbr] = (tx + rel[0], ty + rel[1])
                queue.append(nbr)
    return transforms


def fusion_order(tree: dict[int, list[int]], leader: int) -> list[int]:
    """Children-before-parents order ending at the leader (lower-degree
    robots send first; the leader is the last to receive)."""
    order: list[int] = []
    seen = {leader}
    queue = [leader]
    while queue:
        node = queue.pop(0)
        order.append(node)
        for nbr in sorted(tree[node]):
            if nbr not in seen:
                seen.add(nbr)
                queue.append(nbr)
    return list(reversed(order))


def fuse(
    tree: dict[int, list[int]],
    leader: int,
    histories: dict[int, InteractionHistory],
    explored: dict[int, T],
    union: Callable[[T, T], T],
) -> tuple[InteractionHistory, T]:
    """Leaf-to-leader fusion: the leader ends up with the union of all
    explored maps and the newest-wins union of all interaction histories."""
    order = fusion_order(tree, leader)
    fused_history = InteractionHistory()
    fused_explored: T | None = None
    for node in order:
        fused_history.merge(histories[node])
        e = explored[node]
        fused_explored = e if fused_explored is None else union(fused_explored, e)
    return fused_history, fused_explored  # type: ignore[return-value]


def fuse_sets(
    tree: dict[int, list[int]],
    leader: int,
    histories: dict[int, InteractionHistory],
    explored: dict[int, set[Cell]],
) -> tuple[InteractionHistory, set[Cell]]:
    return fuse(tree, leader, histories, explored, lambda a, b: a | b)


# ---------------------------------------------------------------------------
# Cellular decomposition


def _spiral_offsets(step: int, max_radius: float):
    yield (0, 0)
    ring = 1
    while ring * step <= max_radius:
        d = ring * step
        for x in range(-ring, ring + 1):
            yield (x * step, d)
            yield (x * step, -d)
        for y in range(-ring + 1, ring):
            yield (d, y * step)
            yield (-d, y * step)
        ring += 1


def decompose(
    n_regions: int,
    budgets: list[SearchBudget],
    m: int,
    centroid: tuple[float, float],
    avoid: list[ExplorationRegion],
    max_extent: float,
    feasible: Callable[[ExplorationRegion], bool] | None = None,
) -> list[ExplorationRegion]:
    """Place ``n_regions`` square regions sized from each robot's remaining
    budget in a block layout around the encounter centroid, pairwise
    separated by at least ``m`` cells and disjoint from every region in
    ``avoid``. Candidate block positions are enumerated on a deterministic
    spiral; regions may extend into unknown space (virtual world). The
    optional ``feasible`` predicate lets the leader veto single regions from
    its fused map (e.g. regions behind a discovered world wall).
    """
    if n_regions < 1:
        raise ContractError("need at least one region")
    if n_regions > 10:
        raise ContractError("coordination supports at most ten robots")
    if len(budgets) != n_regions:
        raise ContractError("one budget per region required")
    sides = [region_side_for_budget(b) for b in budgets]
    side = max(sides)
    pitch = side + m
    # candidate grid shapes: square-ish first, then increasingly elongated
    # (a narrow world may only admit a single-row or single-column layout)
    shapes = sorted(
        {(c, math.ceil(n_regions / c)) for c in range(1, n_regions + 1)},
        key=lambda cr: (abs(cr[0] - cr[1]), cr[0]),
    )
    cx, cy = centroid
    step = max(1, m, side // 4)

    for off_x, off_y in _spiral_offsets(step, max_extent):
        for cols, rows in shapes:
            block_w = cols * side + (cols - 1) * m
            block_h = rows * side + (rows - 1) * m
            base_x = int(round(cx - block_w / 2))
            base_y = int(round(cy - block_h / 2))
            regions = []
            for i in range(n_regions):
                row, col = divmod(i, cols)
                origin = (base_x + off_x + col * pitch, base_y + off_y + row * pitch)
                regions.append(ExplorationRegion(origin, sides[i], sides[i], margin_width=m))
            if all(not r.intersects(a) for r in regions for a in avoid) and (
                feasible is None or all(feasible(r) for r in regions)
            ):
                return regions
    raise DecompositionError(
        f"no placement for {n_regions} regions within extent {max_extent}"
    )


# ---------------------------------------------------------------------------
# Assignment and replication


def assign(
    regions: list[ExplorationRegion], poses: dict[int, Cell]
) -> dict[int, ExplorationRegion]:
    """Perfect matching of robots to regions minimizing total Euclidean
    robot-to-centroid distance (Hungarian method)."""
    if len(regions) != len(poses):
        raise ContractError("need exactly one region per robot")
    ids = sorted(poses)
    cost = np.array(
        [
            [math.hypot(poses[i][0] - r.centroid[0], poses[i][1] - r.centroid[1]) for r in regions]
            for i in ids
        ]
    )
    rows, cols = linear_sum_assignment(cost)
    return {ids[int(i)]: regions[int(j)] for i, j in zip(rows, cols)}


def assignment_cost(assignment: dict[int, ExplorationRegion], poses: dict[int, Cell]) -> float:
    return sum(
        math.hypot(poses[i][0] - r.centroid[0], poses[i][1] - r.centroid[1])
        for i, r in assignment.items()
    )


@dataclass
class MissionUpdate:
    """What one member takes away from a coordination event."""

    robot_id: int
    history: InteractionHistory
    region: ExplorationRegion
    new_interference: list[ExplorationRegion] = field(default_factory=list)


def replicate_missions(
    leader: int,
    fused_history: InteractionHistory,
    assignment: dict[int, ExplorationRegion],
    tick: int,
) -> dict[int, MissionUpdate]:
    """Per-member mission updates: everyone adopts the leader's history
    (extended with the fresh assignments), its own region, and adds all other
    members' regions to its interference set."""
    history = fused_history.copy()
    for robot_id, region in assignment.items():
        history.update(HistoryEntry(robot_id, region, tick))
    updates = {}
    for robot_id, region in assignment.items():
        others = [r for j, r in assignment.items() if j != robot_id]
        updates[robot_id] = MissionUpdate(
            robot_id=robot_id,
            history=history.copy(),
            region=region,
            new_interference=others,
        )
    return updates
