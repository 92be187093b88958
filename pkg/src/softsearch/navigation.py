"""Point-to-goal motion on partially known grids.

Straight-line travel uses 8-connected digital lines (a diagonal step costs one
tick, so path lengths are Chebyshev distances; the Euclidean metric is
distorted by at most sqrt(2)). Obstacle avoidance uses three Bug planners:

- ``bug1``: circumnavigate each obstacle fully, return to the boundary point
  closest to the goal, then head for the goal again.
- ``bug2``: wall-follow until the original start-goal line is re-met at a
  point strictly closer to the goal.
- ``distance_bug``: pick the wall-follow direction greedily and leave the
  boundary at the first point strictly closer to the goal from which the next
  step toward the goal is free.

Obstacles are unknown until sensed on contact; planners operate on a view of
the cells sensed so far. Each run yields a BugCertificate whose perimeter
entries are measured wall-follow loop lengths and whose crossing counts use
the re-encounter convention: every boundary-following episode on an obstacle
counts as one entry/exit pair (n += 2), which coincides with the
segment-crossing count for a convex obstacle sitting on the line.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .world import Cell, GridWorld, disk_offsets

# Cardinal headings in counterclockwise order: E, N, W, S.
_CARD: tuple[Cell, ...] = ((1, 0), (0, 1), (-1, 0), (0, -1))


class GoalUnreachableError(RuntimeError):
    """The goal is sealed off from the start position."""


def euclid(a: Cell, b: Cell) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def chebyshev(a: Cell, b: Cell) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


def plan_straight(start: Cell, goal: Cell) -> list[Cell]:
    """8-connected digital line from start to goal (Bresenham), excluding
    start, including goal. Length equals the Chebyshev distance."""
    x, y = start
    x1, y1 = goal
    dx, dy = abs(x1 - x), -abs(y1 - y)
    sx = 1 if x < x1 else -1
    sy = 1 if y < y1 else -1
    err = dx + dy
    path: list[Cell] = []
    while (x, y) != (x1, y1):
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy
        path.append((x, y))
    return path


def point_segment_distance(p: Cell, a: Cell, b: Cell) -> float:
    """Distance from cell center p to the continuous segment a-b."""
    ax, ay = a
    vx, vy = b[0] - ax, b[1] - ay
    wx, wy = p[0] - ax, p[1] - ay
    vv = vx * vx + vy * vy
    t = 0.0 if vv == 0 else max(0.0, min(1.0, (wx * vx + wy * vy) / vv))
    return math.hypot(wx - t * vx, wy - t * vy)


# ---------------------------------------------------------------------------
# World views


class OnlineSensingView:
    """Planner-side view of a world where blocked cells (obstacles and
    out-of-world boundary) are learned on sensor contact within ``radius``."""

    def __init__(self, world: GridWorld, radius: int = 2):
        self.world = world
        self.radius = radius
        self._known_blocked: set[Cell] = set()
        self._sensed_from: set[Cell] = set()
        self._offsets = list(zip(*disk_offsets(radius)))

    def sense_from(self, pos: Cell) -> None:
        if pos in self._sensed_from:
            return
        self._sensed_from.add(pos)
        px, py = pos
        for dx, dy in self._offsets:
            cell = (px + int(dx), py + int(dy))
            if not self.world.is_accessible(cell):
                self._known_blocked.add(cell)

    def blocked(self, cell: Cell) -> bool:
        return cell in self._known_blocked


# ---------------------------------------------------------------------------
# Certificates


@dataclass
class BugCertificate:
    """Record of one planner run, sufficient to check the worst-case bounds.

    obstacles_met holds one (perimeter, crossings) pair per distinct obstacle
    encountered; perimeters are measured wall-follow loop lengths.
    """

    start: Cell
    goal: Cell
    steps_taken: int
    obstacles_met: list[tuple[float, int]] = field(default_factory=list)

    @property
    def delta(self) -> float:
        return euclid(self.start, self.goal)

    @property
    def slack(self) -> float:
        """Discretization allowance: 4 cells per obstacle encountered."""
        return 4.0 * len(self.obstacles_met)

    def bound(self, variant: str) -> float:
        if variant == "bug1":
            # 1.5 * perimeter per boundary-following episode: on a grid the
            # planner can re-encounter an obstacle it already left (the
            # continuous guarantee of at most one episode per obstacle does
            # not survive discretization), and each episode costs at most a
            # full loop plus a half-loop return
            extra = 1.5 * sum(n * p for p, n in self.obstacles_met)
        elif variant == "bug2":
            extra = 0.5 * sum(n * p for p, n in self.obstacles_met)
        elif variant == "distance_bug":
            extra = sum(n * p for p, n in self.obstacles_met) / 3.0
        else:
            raise ValueError(f"unknown variant {variant!r}")
        return self.delta + extra + self.slack


def obstacle_component(world: GridWorld, seed_cell: Cell) -> frozenset[Cell]:
    """8-connected component of blocked cells (obstacle or out-of-world)
    containing ``seed_cell``. Out-of-world seed cells represent the boundary
    and are returned as singleton components."""
    if world.in_bounds(seed_cell) and not world.obstacle_mask[seed_cell[1], seed_cell[0]]:
        raise ValueError(f"{seed_cell} is not blocked")
    if not world.in_bounds(seed_cell):
        return frozenset([seed_cell])
    stack = [seed_cell]
    seen = {seed_cell}
    while stack:
        x, y = stack.pop()
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                nxt = (x + dx, y + dy)
                if nxt in seen or not world.in_bounds(nxt):
                    continue
                if world.obstacle_mask[nxt[1], nxt[0]]:
                    seen.add(nxt)
                    stack.append(nxt)
    return frozenset(seen)


def ring_length(world: GridWorld, component: frozenset[Cell]) -> float:
    """Length of the closed 4-connected wall-follow path around an obstacle
    component: the discrete perimeter a circumnavigating robot measures.

    Falls back to the bounding-box perimeter if the component touches the
    world boundary (no closed free ring exists there).
    """
    xs = [c[0] for c in component]
    ys = [c[1] for c in component]
    bbox_perimeter = 2.0 * (max(xs) - min(xs) + 1 + max(ys) - min(ys) + 1) + 4.0
    anchor = min(component, key=lambda c: (c[1], c[0]))
    start = (anchor[0], anchor[1] - 1)  # south of the lowest-leftmost cell
    if not world.is_accessible(start):
        return bbox_perimeter
    blocked = lambda c: not world.is_accessible(c)
    heading = 0  # east, wall (the component) on the left
    pos = start
    steps = 0
    limit = 8 * (len(component) + bbox_perimeter) + 64
    seen: set[tuple[Cell, int]] = set()
    while (pos, heading) not in seen:
        seen.add((pos, heading))
        for turn in (1, 0, -1, 2):  # left, straight, right, back
            h = (heading + turn) % 4
            nxt = (pos[0] + _CARD[h][0], pos[1] + _CARD[h][1])
            if not blocked(nxt):
                pos, heading = nxt, h
                steps += 1
                break
        else:
            return bbox_perimeter
        if steps > limit:
            return bbox_perimeter
    return float(steps)


# ---------------------------------------------------------------------------
# Planner core


class _BugRun:
    """Shared machinery for the three Bug variants."""

    def __init__(self, view, start: Cell, goal: Cell, variant: str):
        self.view = view
        self.start = start
        self.goal = goal
        self.variant = variant
        self.pos = start
        self.path: list[Cell] = []
        self.episodes: list[tuple[Cell, float]] = []  # (blocking cell, follow length)
        self.used_leave_points: set[Cell] = set()
        self._line_cache: list[Cell] = []
        self._line_idx = 0
        world = getattr(view, "world", None)
        self._step_limit = 20 * world.width * world.height if world else 4_000_000

    # -- movement helpers ------------------------------------------------

    def _move(self, cell: Cell) -> None:
        self.pos = cell
        self.path.append(cell)
        self.view.sense_from(cell)
        if len(self.path) > self._step_limit:
            raise RuntimeError("bug planner exceeded the step limit")

    def _next_line_cell(self) -> Cell:
        if self._line_idx < len(self._line_cache) and (
            self._line_idx == 0
            or self._line_cache[self._line_idx - 1] == self.pos
        ):
            pass
        else:
            self._line_cache = plan_straight(self.pos, self.goal)
            self._line_idx = 0
        return self._line_cache[self._line_idx]

    def _advance_line(self) -> None:
        self._line_idx += 1

    def _invalidate_line(self) -> None:
        self._line_cache = []
        self._line_idx = 0

    # -- wall following ---------------------------------------------------

    def _follow_order(self, heading: int, side: str) -> tuple[int, ...]:
        if side == "left":  # wall kept on the left, try left first
            return ((heading + 1) % 4, heading, (heading - 1) % 4, (heading + 2) % 4)
        return ((heading - 1) % 4, heading, (heading + 1) % 4, (heading + 2) % 4)

    def _follow_step(self, heading: int, side: str) -> tuple[Cell, int] | None:
        for h in self._follow_order(heading, side):
            nxt = (self.pos[0] + _CARD[h][0], self.pos[1] + _CARD[h][1])
            if not self.view.blocked(nxt):
                return nxt, h
        return None

    def _initial_heading(self, blocked_dir: int, side: str) -> int:
        # Put the blocking cell on the chosen hand side.
        return (blocked_dir - 1) % 4 if side == "left" else (blocked_dir + 1) % 4

    def _choose_side(self, blocked_dir: int) -> str:
        if self.variant != "distance_bug":
            return "left"
        # Greedy: one-step lookahead, take the side whose first follow cell
        # is closer to the goal.
        best = ("left", math.inf)
        for side in ("left", "right"):
            step = self._peek_first_follow(blocked_dir, side)
            if step is not None and euclid(step, self.goal) < best[1]:
                best = (side, euclid(step, self.goal))
        return best[0]

    def _peek_first_follow(self, blocked_dir: int, side: str) -> Cell | None:
        heading = self._initial_heading(blocked_dir, side)
        nxt = self._follow_step(heading, side)
        return nxt[0] if nxt else None

    # -- episode ----------------------------------------------------------

    def _run_episode(self, blocked_dir: int, blocking_cell: Cell) -> None:
        side = self._choose_side(blocked_dir)
        heading = self._initial_heading(blocked_dir, side)
        hit_pos = self.pos
        hit_dist = euclid(hit_pos, self.goal)
        ring: list[Cell] = []
        dists: list[float] = []
        seen: set[tuple[Cell, int]] = set()
        start_len = len(self.path)

        while True:
            state = (self.pos, heading)
            if state in seen:
                # Full circumnavigation. Bug 1 heads for the best boundary
                # point; for the others a completed loop without a leave
                # point means the same fallback (completeness guard).
                self._finish_loop(hit_pos, hit_dist, ring, dists, blocking_cell, start_len)
                return
            seen.add(state)
            step = self._follow_step(heading, side)
            if step is None:
                raise GoalUnreachableError(
                    f"trapped at {self.pos} while avoiding obstacle near {blocking_cell}"
                )
            self._move(step[0])
            heading = step[1]
            ring.append(self.pos)
            dists.append(euclid(self.pos, self.goal))
            if self.pos == self.goal:
                self.episodes.append((blocking_cell, float(len(self.path) - start_len)))
                return
            if self.variant != "bug1" and self._may_leave(hit_dist):
                self.used_leave_points.add(self.pos)
                self.episodes.append((blocking_cell, float(len(self.path) - start_len)))
                self._invalidate_line()
                return

    def _may_leave(self, hit_dist: float) -> bool:
        if self.pos in self.used_leave_points:
            return False
        d = euclid(self.pos, self.goal)
        if d >= hit_dist - 1e-9:
            return False
        if self.variant == "bug2":
            # Back on the original start-goal line (within half a cell of
            # the continuous segment).
            return point_segment_distance(self.pos, self.start, self.goal) <= 0.75
        # distance_bug: closer to the goal and the next step toward it is free
        nxt = plan_straight(self.pos, self.goal)[0]
        return not self.view.blocked(nxt)

    def _finish_loop(
        self,
        hit_pos: Cell,
        hit_dist: float,
        ring: list[Cell],
        dists: list[float],
        blocking_cell: Cell,
        start_len: int,
    ) -> None:
        if not ring:
            raise GoalUnreachableError(f"no free boundary around {blocking_cell}")
        best = min(range(len(ring)), key=lambda i: (dists[i], i))
        if dists[best] >= hit_dist - 1e-9:
            raise GoalUnreachableError(
                f"goal {self.goal} unreachable: full boundary of obstacle near "
                f"{blocking_cell} has no point closer than the hit point"
            )
        # Return to the best point the short way. The forward shortcut is only
        # adjacency-safe if the loop closed back at the hit point; otherwise
        # retrace the recorded ring backwards.
        forward = best + 1
        backward = len(ring) - 1 - best
        if self.pos == hit_pos and forward <= backward:
            walk = ring[: best + 1]
        else:
            walk = list(reversed(ring[best:-1]))
        for cell in walk:
            if cell != self.pos:
                self._move(cell)
        self.used_leave_points.add(self.pos)
        self.episodes.append((blocking_cell, float(len(self.path) - start_len)))
        self._invalidate_line()

    # -- main loop ----------------------------------------------------------

    def run(self) -> tuple[list[Cell], BugCertificate]:
        self.view.sense_from(self.pos)
        world = getattr(self.view, "world", None)
        if world is not None and not world.is_accessible(self.goal):
            raise GoalUnreachableError(f"goal {self.goal} is not accessible")
        while self.pos != self.goal:
            nxt = self._next_line_cell()
            if not self.view.blocked(nxt):
                self._advance_line()
                self._move(nxt)
                continue
            dx, dy = nxt[0] - self.pos[0], nxt[1] - self.pos[1]
            if dx != 0 and dy != 0:
                # Blocked diagonal: try the two cardinal decompositions first.
                cands = sorted(
                    ((self.pos[0] + dx, self.pos[1]), (self.pos[0], self.pos[1] + dy)),
                    key=lambda c: euclid(c, self.goal),
                )
                free = [c for c in cands if not self.view.blocked(c)]
                if free:
                    self._invalidate_line()
                    self._move(free[0])
                    continue
                blocked_cell = cands[0]
            else:
                blocked_cell = nxt
            bdx = blocked_cell[0] - self.pos[0]
            bdy = blocked_cell[1] - self.pos[1]
            blocked_dir = _CARD.index((bdx, bdy))
            self._invalidate_line()
            self._run_episode(blocked_dir, blocked_cell)
        return self.path, self._certificate()

    def _certificate(self) -> BugCertificate:
        world = getattr(self.view, "world", None)
        obstacles: list[tuple[float, int]] = []
        if world is None:
            # No ground truth available: report measured follow lengths.
            for _, follow_len in self.episodes:
                obstacles.append((follow_len, 2))
        else:
            by_component: dict[frozenset[Cell], int] = {}
            for blocking_cell, _ in self.episodes:
                comp = next(
                    (c for c in by_component if blocking_cell in c), None
                ) or obstacle_component(world, blocking_cell)
                by_component[comp] = by_component.get(comp, 0) + 1
            for comp, n_episodes in by_component.items():
                obstacles.append((ring_length(world, comp), 2 * n_episodes))
        return BugCertificate(
            start=self.start,
            goal=self.goal,
            steps_taken=len(self.path),
            obstacles_met=obstacles,
        )


def bug1(view, start: Cell, goal: Cell) -> tuple[list[Cell], BugCertificate]:
    return _BugRun(view, start, goal, "bug1").run()


def bug2(view, start: Cell, goal: Cell) -> tuple[list[Cell], BugCertificate]:
    return _BugRun(view, start, goal, "bug2").run()


def distance_bug(view, start: Cell, goal: Cell) -> tuple[list[Cell], BugCertificate]:
    return _BugRun(view, start, goal, "distance_bug").run()
