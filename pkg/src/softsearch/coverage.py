"""In-region search behaviors: serpentine (zigzag) sweeps, unexplored-area
estimation by uniform seeding, and frontier detection/selection."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .geometry import ExplorationRegion
from .world import Cell, ContractError

BlockedFn = Callable[[Cell], bool]


class SweepPlan:
    """Back-and-forth sweep of a region along west-east lanes progressing
    northward, lane spacing = sensor diameter (2r) for exact cover.

    Lane legs are clipped against the caller's known map at query time: a
    known obstacle (or sensed boundary) on the current lane ends the leg at
    the pre-obstacle cell and the plan advances to the next lane. The plan is
    done when the last lane completes; a fully blocked region is done
    immediately (zero coverage).
    """

    # longest blocked stretch (in sensor radii) worth detouring around to
    # resume a lane; longer ones are skipped
    RESUME_CAP = 3

    def __init__(self, region: ExplorationRegion, r: int, start_near: Cell | None = None):
        if r < 1:
            raise ContractError("sensor radius must be >= 1")
        self.region = region
        self.r = r
        self.lane_spacing = 2 * r
        ox, oy = region.origin
        n_lanes = max(1, math.ceil(region.height / self.lane_spacing))
        self.lane_ys = [
            min(oy + r + self.lane_spacing * i, oy + region.height - 1)
            for i in range(n_lanes)
        ]
        # Enter the first lane at whichever end is nearer the robot, so the
        # approach leg does not pre-scan ground the lanes will cover again.
        self._flip = start_near is not None and abs(start_near[0] - ox) > abs(
            start_near[0] - (ox + region.width - 1)
        )
        self._idx = 0
        self._stage = "start"
        self._pending: Cell | None = None  # sticky travel target
        self._cursor: int | None = None  # progress along the current lane

    @property
    def current_leg(self) -> int:
        return self._idx

    def _lane(self, i: int) -> tuple[int, int, int, int]:
        """(y, x_from, x_to, step) serpentine: even lanes go east."""
        ox = self.region.origin[0]
        x_w, x_e = ox, ox + self.region.width - 1
        if (i % 2 == 0) != self._flip:
            return self.lane_ys[i], x_w, x_e, 1
        return self.lane_ys[i], x_e, x_w, -1

    def current_target(self, pos: Cell, blocked: BlockedFn) -> Cell | None:
        """Next leg endpoint given the robot position and known map, or None
        when the sweep is complete. Travel targets are sticky so detours that
        pull the robot off its lane never restart the lane from its start."""
        while self._idx < len(self.lane_ys):
            y, x_from, x_to, step = self._lane(self._idx)
            if self._pending is not None:
                if pos == self._pending or blocked(self._pending):
                    self._pending = None
                else:
                    return self._pending
            if self._stage == "start":
                begin = self._cursor if self._cursor is not None else x_from
                entry = self._first_free(y, begin, x_to, step, blocked)
                if entry is None:
                    self._next_lane()
                    continue
                if pos == entry:
                    self._stage = "end"
                    self._cursor = entry[0]
                    continue
                self._pending = entry
                return entry
            # end stage: clip the leg ahead of the robot
            if pos[1] != y:
                self._stage = "start"  # pushed off the lane; re-enter at cursor
                continue
            x = pos[0]
            while x != x_to and not blocked((x + step, y)):
                x += step
            self._cursor = pos[0]
            if (x, y) == pos:
                if x != x_to:
                    # short blocked stretch ahead: resume the lane beyond it
                    # (long ones are skipped; detouring costs more than the
                    # missed cells are worth)
                    entry = self._first_free(y, x + step, x_to, step, blocked)
                    if entry is not None and abs(entry[0] - x) <= self.RESUME_CAP * self.r:
                        self._pending = entry
                        self._cursor = entry[0]
                        return entry
                self._next_lane()
                continue
            return (x, y)
        return None

    def _next_lane(self) -> None:
        self._idx += 1
        self._stage = "start"
        self._pending = None
        self._cursor = None

    @staticmethod
    def _first_free(y: int, x_from: int, x_to: int, step: int, blocked: BlockedFn) -> Cell | None:
        for x in range(x_from, x_to + step, step):
            if not blocked((x, y)):
                return (x, y)
        return None

    def skip_current_lane(self) -> None:
        """Abandon the current lane (e.g. its endpoint proved unreachable)."""
        self._next_lane()

    @property
    def done(self) -> bool:
        return self._idx >= len(self.lane_ys)


def next_sweep_target(plan: SweepPlan, pos: Cell, blocked: BlockedFn) -> Cell | None:
    """Next leg endpoint for the sweep, or None when done."""
    return plan.current_target(pos, blocked)


def margin_sweep_plans(region: ExplorationRegion, r: int) -> list[SweepPlan]:
    """Sweep plans for the four strips of the width-m frame around a region
    (south, north, west, east), each treated as its own exploration region."""
    m = region.margin_width
    if m <= 0:
        return []
    ox, oy = region.origin
    w, h = region.width, region.height
    strips = [
        ExplorationRegion((ox - m, oy - m), w + 2 * m, m),
        ExplorationRegion((ox - m, oy + h), w + 2 * m, m),
        ExplorationRegion((ox - m, oy), m, h),
        ExplorationRegion((ox + w, oy), m, h),
    ]
    return [SweepPlan(s, r) for s in strips]


@dataclass
class UnexploredEstimate:
    sampled_seeds: int
    unexplored_hits: int
    hit_cells: list[Cell] = field(default_factory=list)

    @property
    def fraction(self) -> float:
        return self.unexplored_hits / self.sampled_seeds


def estimate_unexplored(
    region: ExplorationRegion,
    is_unexplored: Callable[[Cell], bool],
    n_seeds: int = 200,
    seed: int = 0,
) -> UnexploredEstimate:
    """Estimate the unexplored fraction of a region by ``n_seeds`` uniform
    samples; deterministic per RNG seed."""
    if n_seeds < 1:
        raise ContractError("n_seeds must be >= 1")
    rng = np.random.default_rng(seed)
    ox, oy = region.origin
    xs = rng.integers(ox, ox + region.width, size=n_seeds)
    ys = rng.integers(oy, oy + region.height, size=n_seeds)
    hits = [(int(x), int(y)) for x, y in zip(xs, ys) if is_unexplored((int(x), int(y)))]
    return UnexploredEstimate(n_seeds, len(hits), hits)


def detect_frontiers(codes: np.ndarray) -> list[Cell]:
    """All frontier cells of a classified map: known-free cells 4-adjacent to
    at least one unknown cell. ``codes[y, x]`` uses 0 unknown / 1 free /
    2 obstacle / 3 boundary; cells outside the array count as unknown.
    Returned sorted by (y, x)."""
    if codes.size == 0:
        raise ContractError("map must be nonempty")
    padded = np.zeros((codes.shape[0] + 2, codes.shape[1] + 2), dtype=codes.dtype)
    padded[1:-1, 1:-1] = codes
    nb_unknown = (
        (padded[:-2, 1:-1] == 0)
        | (padded[2:, 1:-1] == 0)
        | (padded[1:-1, :-2] == 0)
        | (padded[1:-1, 2:] == 0)
    )
    mask = (codes == 1) & nb_unknown
    return [(int(x), int(y)) for y, x in np.argwhere(mask)]


def select_frontier(
    frontiers: Sequence[Cell],
    pose: Cell,
    prohibited: Callable[[Cell], bool] | None = None,
) -> Cell:
    """Nearest frontier by Euclidean distance among those not prohibited
    (ties: lowest y, then x). If every frontier is prohibited, the nearest
    prohibited one is returned (a trapped robot may cross soft obstacles)."""
    if not frontiers:
        raise ContractError("frontier list is empty")
    def key(cell: Cell) -> tuple[float, int, int]:
        return (math.hypot(cell[0] - pose[0], cell[1] - pose[1]), cell[1], cell[0])
    if prohibited is not None:
        allowed = [c for c in frontiers if not prohibited(c)]
        if allowed:
            return min(allowed, key=key)
    return min(frontiers, key=key)
