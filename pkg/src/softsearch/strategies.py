"""The three robot controllers, driven tick-by-tick by the engine:

- SOS: zigzag sweep of assigned exploration regions, soft-obstacle avoidance,
  margin sweeps, and self-assignment of fresh regions.
- ARS: greedy nearest-frontier exploration with soft angular-sector
  preferences assigned at accidental encounters.
- PRS: frontier exploration punctuated by scheduled rendezvous, with full
  interruptibility accounting.

Controllers own per-robot strategy state; the engine owns time, sensing,
encounter detection, and the coordination transactions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import coverage
from .coordination import HistoryEntry, InteractionHistory, _spiral_offsets
from .geometry import ExplorationRegion, SearchBudget, margin_time, region_for_budget, region_side_for_budget
from .mapping import KnownMap
from .navigation import GoalUnreachableError, chebyshev, distance_bug
from .world import Cell


@dataclass
class TickLedger:
    """Per-robot accounting: every tick of the budget lands in exactly one
    bucket, so explore + protocol + interrupt = tau at the end of a run."""

    explore: int = 0
    protocol: int = 0
    interrupt: int = 0

    @property
    def total(self) -> int:
        return self.explore + self.protocol + self.interrupt


@dataclass
class RobotState:
    id: int
    pose: Cell
    frame_offset: tuple[int, int]  # internal frame: internal = truth + offset
    map: KnownMap
    tau: int
    r: int
    gamma: float
    history: InteractionHistory = field(default_factory=InteractionHistory)
    interference: list[ExplorationRegion] = field(default_factory=list)
    region: ExplorationRegion | None = None
    phase: str = "init"
    ledger: TickLedger = field(default_factory=TickLedger)
    tau0: float | None = None
    hold_until: int = 0

    def add_interference(self, regions: list[ExplorationRegion]) -> None:
        seen = {z.as_tuple() for z in self.interference}
        for reg in regions:
            if reg.as_tuple() not in seen:
                self.interference.append(reg)
                seen.add(reg.as_tuple())

    def in_interference(self, cell: Cell) -> bool:
        return any(z.contains(cell) for z in self.interference)


# ---------------------------------------------------------------------------
# Movement helper


class _PlanView:
    """Static view over a blocked-predicate for offline replanning."""

    def __init__(self, blocked):
        self.blocked = blocked

    def sense_from(self, pos: Cell) -> None:
        pass


class Walker:
    """Follows a cached Distance-Bug path toward a target, replanning when
    newly sensed obstacles invalidate it. Gives up (returns "unreachable")
    when the target is sealed off or the detour becomes uneconomical."""

    def __init__(self):
        self.target: Cell | None = None
        self._path: list[Cell] = []
        self._idx = 0
        self._from: Cell | None = None

    def set_target(self, target: Cell) -> None:
        self.target = target
        self._path = []
        self._idx = 0
        self._from = None

    def _replan(self, pos: Cell, blocked) -> bool:
        try:
            path, _ = distance_bug(_PlanView(blocked), pos, self.target)
        except (GoalUnreachableError, RuntimeError):
            return False
        if len(path) > 4 * chebyshev(pos, self.target) + 800:
            return False  # pathological detour; not worth the budget
        self._path, self._idx, self._from = path, 0, pos
        return True

    def step(self, pos: Cell, blocked) -> tuple[str, Cell | None]:
        if self.target is None or pos == self.target:
            return ("arrived", None)
        valid = (
            self._idx < len(self._path)
            and (self._path[self._idx - 1] if self._idx else self._from) == pos
            and not blocked(self._path[self._idx])
        )
        if not valid:
            if not self._replan(pos, blocked):
                return ("unreachable", None)
        nxt = self._path[self._idx]
        self._idx += 1
        return ("move", nxt)


# ---------------------------------------------------------------------------
# SOS


class SOSController:
    """Soft-obstacle strategy: sweep the assigned region, estimate leftovers,
    sweep the margin when the region was largely inaccessible, then follow
    the frontier of the soft obstacles to self-assign a fresh region."""

    RESWEEP_FRACTION = 0.10
    MARGIN_IF_SCANNED_BELOW = 0.7
    MAX_RESWEEPS = 2
    MAX_RELOCATIONS = 12

    def __init__(self, robot: RobotState, margin: int, seed_base: int):
        self.robot = robot
        self.margin = margin
        self.seed_base = seed_base
        self.mode = "sweep"
        self.walker = Walker()
        self._soft = True  # per-target flag: False once trapped by soft obstacles
        self.plan: coverage.SweepPlan | None = None
        self.margin_queue: list[coverage.SweepPlan] = []
        self.resweeps = 0
        self.relocations = 0
        self._est_count = 0
        robot.region = region_for_budget(
            robot.pose, SearchBudget(robot.tau, 0, 0, robot.r, robot.gamma), m=margin
        )
        self.plan = coverage.SweepPlan(robot.region, robot.r, start_near=robot.pose)

    # engine hook after a coordination transaction
    def reset_for_region(self, t: int, delta_t: int) -> None:
        rb = self.robot
        self.mode = "sweep"
        self.plan = coverage.SweepPlan(rb.region, rb.r, start_near=rb.pose)
        self.margin_queue = []
        self.resweeps = 0
        self.walker = Walker()
        budget = SearchBudget(rb.tau, min(t, rb.tau), delta_t, rb.r, rb.gamma)
        m = rb.region.margin_width
        rb.tau0 = margin_time(m, budget) if m >= 2 * rb.r and budget.remaining >= 0 else None

    def _travel_blocked(self, cell: Cell) -> bool:
        rb = self.robot
        if rb.map.blocked(cell):
            return True
        if rb.region is not None and rb.region.outer().contains(cell):
            return False  # own region and margin are never soft-blocked
        return rb.in_interference(cell)

    def tick(self, t: int) -> tuple[Cell, str]:
        rb = self.robot
        for _ in range(6):  # bounded same-tick stage transitions
            if self.mode == "done":
                rb.phase = "done"
                return rb.pose, "explore"
            if self.plan is None:
                self._next_plan(t)
                continue
            target = self.plan.current_target(rb.pose, rb.map.blocked)
            if target is None:
                self.plan = None
                continue
            if target != self.walker.target:
                self.walker.set_target(target)
                self._soft = True
            blocked = self._travel_blocked if self._soft else rb.map.blocked
            kind, cell = self.walker.step(rb.pose, blocked)
            if kind == "unreachable" and self._soft:
                # Trapped by soft obstacles: a robot may cross them rather
                # than give up on the target.
                self._soft = False
                kind, cell = self.walker.step(rb.pose, rb.map.blocked)
            if kind == "move":
                rb.phase = self.mode
                return cell, "explore"
            if kind == "unreachable":
                self.plan.skip_current_lane()
                continue
            # arrived: the plan advances on the next current_target call
        rb.phase = self.mode
        return rb.pose, "explore"

    def _next_plan(self, t: int) -> None:
        rb = self.robot
        if self.mode == "margin":
            if self.margin_queue:
                self.plan = self.margin_queue.pop(0)
                return
            self._relocate(t)
            return
        # a region sweep just finished
        region = rb.region
        est = coverage.estimate_unexplored(
            region, rb.map.is_unexplored, n_seeds=200, seed=self._next_seed()
        )
        min_area = math.pi * rb.r * rb.r
        if (
            est.fraction > self.RESWEEP_FRACTION
            and est.fraction * region.area >= min_area
            and self.resweeps < self.MAX_RESWEEPS
        ):
            self.resweeps += 1
            self.plan = coverage.SweepPlan(region, rb.r, start_near=rb.pose)
            return
        if (
            region.margin_width > 0
            and rb.map.scanned_fraction_in(*region.bounds()) < self.MARGIN_IF_SCANNED_BELOW
        ):
            self.mode = "margin"
            self.margin_queue = coverage.margin_sweep_plans(region, rb.r)
            self.plan = None
            return
        self._relocate(t)

    def _next_seed(self) -> int:
        self._est_count += 1
        return (self.seed_base * 1_000_003 + self.robot.id * 8191 + self._est_count) % (2**31)

    def _relocate(self, t: int) -> None:
        """Self-assign a fresh region beyond the complement of the soft
        obstacles, per the direction of the nearest admissible frontier."""
        rb = self.robot
        self.plan = None
        self.relocations += 1
        remaining = rb.tau - t
        if (
            remaining <= 2 * rb.r
            or self.relocations > self.MAX_RELOCATIONS
            or not rb.map.frontiers
        ):
            self.mode = "done"
            return
        frontier = coverage.select_frontier(
            list(rb.map.frontiers), rb.pose, prohibited=rb.in_interference
        )
        side = region_side_for_budget(SearchBudget(rb.tau, t, 0, rb.r, rb.gamma))
        dx, dy = frontier[0] - rb.pose[0], frontier[1] - rb.pose[1]
        norm = math.hypot(dx, dy) or 1.0
        center = (
            int(round(frontier[0] + dx / norm * side / 2)),
            int(round(frontier[1] + dy / norm * side / 2)),
        )
        region = self._place_region(center, side)
        if region is None:
            self.mode = "done"
            return
        rb.region = region
        rb.history.update(HistoryEntry(rb.id, region, t))
        self.mode = "sweep"
        self.resweeps = 0
        self.plan = coverage.SweepPlan(region, rb.r, start_near=rb.pose)
        self.walker = Walker()

    def _place_region(self, center: Cell, side: int) -> ExplorationRegion | None:
        rb = self.robot
        avoid = list(rb.interference) + rb.history.regions()
        world = rb.map.world
        max_extent = 2.0 * math.hypot(world.width, world.height)
        step = max(1, self.margin, side // 4)
        for off_x, off_y in _spiral_offsets(step, max_extent):
            origin = (center[0] + off_x - side // 2, center[1] + off_y - side // 2)
            cand = ExplorationRegion(origin, side, side, margin_width=self.margin)
            if any(cand.intersects(a) for a in avoid):
                continue
            if rb.map.known_fraction_in(*cand.bounds()) >= 0.8:
                continue  # mostly known already: not fresh space
            if rb.map.boundary_fraction_in(*cand.bounds()) > 0.1:
                continue  # mostly behind a discovered wall
            return cand
        return None


# ---------------------------------------------------------------------------
# Frontier exploration core (ARS and PRS between meetings)


class FrontierExplorer:
    def __init__(self, robot: RobotState):
        self.robot = robot
        self.walker = Walker()
        self.target: Cell | None = None
        self.blacklist: set[Cell] = set()

    def pick(self, frontiers: set[Cell]) -> Cell | None:
        """Nearest frontier (subclasses may weight); default greedy."""
        cands = [c for c in frontiers if c not in self.blacklist]
        if not cands:
            return None
        return coverage.select_frontier(cands, self.robot.pose)

    def explore_step(self) -> Cell:
        rb = self.robot
        for _ in range(4):
            frontiers = rb.map.frontiers
            if not frontiers:
                return rb.pose
            if self.target is None or self.target not in frontiers:
                self.target = self.pick(frontiers)
                if self.target is None:
                    self.blacklist.clear()  # give blacklisted cells another chance
                    self.target = self.pick(frontiers)
                    if self.target is None:
                        return rb.pose
                self.walker.set_target(self.target)
            kind, cell = self.walker.step(rb.pose, rb.map.blocked)
            if kind == "move":
                return cell
            if kind == "unreachable":
                self.blacklist.add(self.target)
            self.target = None  # arrived or unreachable: retarget
        return rb.pose


# ---------------------------------------------------------------------------
# ARS


@dataclass
class Sector:
    """Soft angular preference: an unbounded wedge around an encounter
    point. Frontiers outside the wedge cost 50% extra, not forbidden."""

    center: tuple[float, float]
    a0: float
    a1: float  # radians, a0 < a1, wedge spans [a0, a1)

    def contains(self, cell: Cell) -> bool:
        ang = math.atan2(cell[1] - self.center[1], cell[0] - self.center[0])
        span = (ang - self.a0) % (2 * math.pi)
        return span < (self.a1 - self.a0)


class ARSController(FrontierExplorer):
    SECTOR_PENALTY = 1.5

    def __init__(self, robot: RobotState):
        super().__init__(robot)
        self.sector: Sector | None = None

    def pick(self, frontiers: set[Cell]) -> Cell | None:
        cands = [c for c in frontiers if c not in self.blacklist]
        if not cands:
            return None
        if self.sector is None:
            return coverage.select_frontier(cands, self.robot.pose)
        px, py = self.robot.pose
        pts = np.array(cands, dtype=np.int64)
        dist = np.hypot(pts[:, 0] - px, pts[:, 1] - py)
        outside = np.array([not self.sector.contains((int(x), int(y))) for x, y in pts])
        cost = dist * np.where(outside, self.SECTOR_PENALTY, 1.0)
        order = np.lexsort((pts[:, 0], pts[:, 1], cost))
        x, y = pts[order[0]]
        return (int(x), int(y))

    def tick(self, t: int) -> tuple[Cell, str]:
        self.robot.phase = "explore"
        return self.explore_step(), "explore"


def assign_sectors(
    poses: dict[int, Cell], centroid: tuple[float, float], r: int
) -> dict[int, Sector]:
    """Split the plane around the encounter centroid into equal angular
    sectors, matched to robots by the Hungarian method on the distances from
    robots to probe points on the sector bisectors."""
    from scipy.optimize import linear_sum_assignment

    ids = sorted(poses)
    n = len(ids)
    width = 2 * math.pi / n
    sectors = [Sector(centroid, i * width, (i + 1) * width) for i in range(n)]
    probe_r = 3.0 * r
    cost = np.array(
        [
            [
                math.hypot(
                    poses[i][0] - (centroid[0] + probe_r * math.cos((j + 0.5) * width)),
                    poses[i][1] - (centroid[1] + probe_r * math.sin((j + 0.5) * width)),
                )
                for j in range(n)
            ]
            for i in ids
        ]
    )
    rows, cols = linear_sum_assignment(cost)
    return {ids[int(i)]: sectors[int(j)] for i, j in zip(rows, cols)}


# ---------------------------------------------------------------------------
# PRS


@dataclass
class RendezvousSchedule:
    point: Cell
    time: int  # t_r
    a: int
    participants: list[int]


class PRSController(FrontierExplorer):
    """Frontier exploration between scheduled meetings; travel to the
    rendezvous point when the deadline minus travel time arrives.
    Interruptibility covers abandonment through meeting end."""

    ARRIVE_DIST = 2

    def __init__(self, robot: RobotState):
        super().__init__(robot)
        self.schedule: RendezvousSchedule | None = None
        self.mode = "explore"
        self._rdv_walker = Walker()

    def adopt_schedule(self, schedule: RendezvousSchedule) -> None:
        self.schedule = schedule
        self.mode = "explore"
        self._rdv_walker = Walker()
        self._rdv_walker.set_target(schedule.point)
        self.target = None

    def tick(self, t: int) -> tuple[Cell, str]:
        rb = self.robot
        sched = self.schedule
        if sched is not None and self.mode == "explore":
            travel = math.ceil(chebyshev(rb.pose, sched.point) / rb.gamma)
            if t + travel >= sched.time:
                self.mode = "heading"
        if self.mode == "heading":
            if chebyshev(rb.pose, sched.point) <= self.ARRIVE_DIST:
                self.mode = "waiting"
            else:
                kind, cell = self._rdv_walker.step(rb.pose, rb.map.blocked)
                rb.phase = "rendezvous"
                if kind == "move":
                    return cell, "interrupt"
                if kind == "unreachable":
                    self.mode = "waiting"  # stand by; grace window will expire
        if self.mode == "waiting":
            rb.phase = "waiting"
            return rb.pose, "interrupt"
        rb.phase = "explore"
        return self.explore_step(), "explore"

    @property
    def at_rendezvous(self) -> bool:
        return self.mode == "waiting"
