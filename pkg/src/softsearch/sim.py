"""Deterministic time-stepped engine: sensing, encounter detection,
coordination transactions, metrics, and batch aggregation.

Tick order is fixed for determinism: sense -> encounter detection ->
coordination transactions -> movement, robots always in id order. A run is a
pure function of its config; repeated runs produce byte-identical traces.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .coordination import (
    DecompositionError,
    InteractionHistory,
    assign,
    build_spanning_tree,
    decompose,
    elect_leader,
    fuse,
    replicate_missions,
    unify_frames,
)
from .geometry import SearchBudget, max_area
from .mapping import BOUNDARY, FREE, UNKNOWN, KnownMap
from .navigation import chebyshev, euclid
from .strategies import (
    ARSController,
    PRSController,
    RendezvousSchedule,
    RobotState,
    SOSController,
    assign_sectors,
)
from .world import Cell, ContractError, GridWorld, ObstacleSpec, generate_random

STRATEGIES = ("sos", "ars", "prs")

METRICS_HEADER = "strategy,world,seed,N,robot,coverage_cells,coverage_norm,overlap_cells,interrupt_ticks"
METRICS_SCHEMA = "# schema=1"


def search_time(
    width: int, height: int, r: int, gamma: float, n_robots: int, k: float
) -> int:
    """Upper-bound search time per robot, truncated to whole ticks:
    tau = k * (w*h / (2*gamma*r*N) - pi*r / (2*gamma))."""
    if n_robots < 1:
        raise ContractError("need at least one robot")
    if not 0.5 <= k <= 0.8:
        raise ContractError(f"k must be in [0.5, 0.8], got {k}")
    tau = k * (width * height / (2.0 * gamma * r * n_robots) - math.pi * r / (2.0 * gamma))
    tau = int(tau)
    if tau <= 0:
        raise ContractError(f"nonpositive search time {tau} for this configuration")
    return tau


@dataclass
class RunConfig:
    strategy: str = "sos"
    n_robots: int = 2
    seed: int = 0
    width: int = 480
    height: int = 600
    r: int = 20
    gamma: float = 1.0
    k: float = 0.6
    tau: int | None = None  # default: search_time(...)
    margin: int | None = None  # default: 2r
    b: int = 50  # inter-rendezvous exploration slack (PRS)
    start: Cell | None = None  # default: world center
    spawn_radius: int | None = None  # default: r // 2 (guarantees initial contact)
    world_file: str | None = None
    world_name: str = "world"
    world_seed: int = 0
    obstacles: ObstacleSpec | None = None
    record_trace: bool = True

    def validate(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ContractError(f"unknown strategy {self.strategy!r}")
        if self.n_robots < 1:
            raise ContractError("n_robots must be >= 1")
        if self.r < 1 or self.gamma <= 0:
            raise ContractError("need r >= 1 and gamma > 0")
        if not 0.5 <= self.k <= 0.8:
            raise ContractError(f"k must be in [0.5, 0.8], got {self.k}")


@dataclass
class RobotMetrics:
    robot: int
    coverage_cells: int
    coverage_norm: float
    overlap_cells: int
    explore_ticks: int
    protocol_ticks: int
    interrupt_ticks: int


@dataclass
class RunResult:
    config: RunConfig
    tau: int
    max_area: int
    metrics: list[RobotMetrics]
    trace: list[str]
    encounters: list[dict]
    robots: list[RobotState] = field(default_factory=list)

    @property
    def mean_coverage(self) -> float:
        return float(np.mean([m.coverage_norm for m in self.metrics]))

    @property
    def std_coverage(self) -> float:
        vals = [m.coverage_norm for m in self.metrics]
        return float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0


def make_world(config: RunConfig) -> GridWorld:
    if config.world_file is not None:
        return GridWorld.load(config.world_file)
    return generate_random(config.world_seed, config.width, config.height, config.obstacles)


class Simulation:
    """One deterministic run of N robots for tau ticks."""

    def __init__(self, config: RunConfig, world: GridWorld | None = None):
        config.validate()
        self.cfg = config
        self.world = world if world is not None else make_world(config)
        if self.world.width != config.width or self.world.height != config.height:
            config = replace(config, width=self.world.width, height=self.world.height)
            self.cfg = config
        self.tau = (
            config.tau
            if config.tau is not None
            else search_time(
                self.world.width, self.world.height, config.r, config.gamma,
                config.n_robots, config.k,
            )
        )
        if self.tau <= 0:
            raise ContractError("search time must be positive")
        self.margin = config.margin if config.margin is not None else 2 * config.r
        self.rng = np.random.default_rng([config.seed, 0x5EED])
        poses = self._spawn()
        self.robots = [
            RobotState(
                id=i,
                pose=p,
                frame_offset=(-p[0], -p[1]),  # internal frame anchored at start
                map=KnownMap(self.world, config.r),
                tau=self.tau,
                r=config.r,
                gamma=config.gamma,
            )
            for i, p in enumerate(poses)
        ]
        self.controllers: list = []
        for rb in self.robots:
            if config.strategy == "sos":
                self.controllers.append(SOSController(rb, self.margin, config.seed))
            elif config.strategy == "ars":
                self.controllers.append(ARSController(rb))
            else:
                self.controllers.append(PRSController(rb))
        self.contact: set[frozenset] = set()
        self.trace: list[str] = []
        self.encounters: list[dict] = []
        self._prs_schedule: RendezvousSchedule | None = None

    # -- placement ---------------------------------------------------------

    def _spawn(self) -> list[Cell]:
        cfg = self.cfg
        center = self._nearest_accessible(cfg.start or (self.world.width // 2, self.world.height // 2))
        radius = cfg.spawn_radius if cfg.spawn_radius is not None else max(1, cfg.r // 2)
        while True:
            cands = self._disk_cells(center, radius)
            if len(cands) >= cfg.n_robots:
                idx = sorted(self.rng.choice(len(cands), size=cfg.n_robots, replace=False))
                return [cands[i] for i in idx]
            radius += max(1, cfg.r // 2)
            if radius > self.world.width + self.world.height:
                raise ContractError("not enough accessible cells to place robots")

    def _nearest_accessible(self, cell: Cell) -> Cell:
        if self.world.is_accessible(cell):
            return cell
        for d in range(1, self.world.width + self.world.height):
            ring = []
            for dx in range(-d, d + 1):
                for dy in (-d, d):
                    ring.append((cell[0] + dx, cell[1] + dy))
            for dy in range(-d + 1, d):
                for dx in (-d, d):
                    ring.append((cell[0] + dx, cell[1] + dy))
            for c in sorted(ring, key=lambda c: (c[1], c[0])):
                if self.world.is_accessible(c):
                    return c
        raise ContractError("world has no accessible cell")

    def _disk_cells(self, center: Cell, radius: int) -> list[Cell]:
        out = []
        cx, cy = center
        for y in range(cy - radius, cy + radius + 1):
            for x in range(cx - radius, cx + radius + 1):
                if (x - cx) ** 2 + (y - cy) ** 2 <= radius * radius and self.world.is_accessible((x, y)):
                    out.append((x, y))
        return out

    # -- main loop -----------------------------------------------------------

    def run(self) -> RunResult:
        strategy = self.cfg.strategy
        for t in range(self.tau):
            for rb in self.robots:
                rb.map.sense(rb.pose)
            if self.cfg.record_trace:
                for rb in self.robots:
                    self.trace.append(
                        f"R {t} {rb.id} {rb.pose[0]} {rb.pose[1]} {rb.phase} {rb.map.scanned_count}"
                    )
            if strategy == "prs":
                self._prs_step(t)
            else:
                for group in self._new_encounter_groups():
                    if strategy == "sos":
                        self._coordinate_sos(t, group)
                    else:
                        self._coordinate_ars(t, group)
            for rb, ctrl in zip(self.robots, self.controllers):
                if rb.hold_until > t:
                    rb.ledger.protocol += 1
                    rb.phase = "protocol"
                    continue
                pose, kind = ctrl.tick(t)
                if not self.world.is_accessible(pose) or chebyshev(pose, rb.pose) > 1:
                    raise ContractError(
                        f"robot {rb.id} produced an illegal move {rb.pose} -> {pose}"
                    )
                rb.pose = pose
                if kind == "interrupt":
                    rb.ledger.interrupt += 1
                else:
                    rb.ledger.explore += 1
        for rb in self.robots:
            rb.map.sense(rb.pose)
            if self.cfg.record_trace:
                self.trace.append(
                    f"R {self.tau} {rb.id} {rb.pose[0]} {rb.pose[1]} {rb.phase} {rb.map.scanned_count}"
                )
            if rb.ledger.total != self.tau:
                raise ContractError(
                    f"tick ledger of robot {rb.id} does not close: {rb.ledger}"
                )
        return RunResult(
            config=self.cfg,
            tau=self.tau,
            max_area=max_area(self.tau, self.cfg.r, self.cfg.gamma),
            metrics=self._metrics(),
            trace=self.trace,
            encounters=self.encounters,
            robots=self.robots,
        )

    # -- encounters --------------------------------------------------------

    def _current_pairs(self) -> set[frozenset]:
        pairs = set()
        n = len(self.robots)
        for i in range(n):
            for j in range(i + 1, n):
                if euclid(self.robots[i].pose, self.robots[j].pose) <= self.cfg.r:
                    pairs.add(frozenset((i, j)))
        return pairs

    def _new_encounter_groups(self) -> list[list[int]]:
        """Connected components of the distance<=r graph that contain at
        least one newly formed pair (rising-edge triggering)."""
        pairs = self._current_pairs()
        new = pairs - self.contact
        self.contact = pairs
        if not new:
            return []
        adj: dict[int, set[int]] = {i: set() for i in range(len(self.robots))}
        for p in pairs:
            a, b = sorted(p)
            adj[a].add(b)
            adj[b].add(a)
        seen: set[int] = set()
        groups = []
        for p in sorted(new, key=sorted):
            seed = min(p)
            if seed in seen:
                continue
            comp = {seed}
            stack = [seed]
            while stack:
                node = stack.pop()
                for nbr in adj[node]:
                    if nbr not in comp:
                        comp.add(nbr)
                        stack.append(nbr)
            if comp & seen:
                continue
            seen |= comp
            if len(comp) >= 2:
                groups.append(sorted(comp))
        return groups

    def _comm_adjacency(self, members: list[int]) -> dict[int, set[int]]:
        return {
            i: {
                j
                for j in members
                if j != i and euclid(self.robots[i].pose, self.robots[j].pose) <= self.cfg.r
            }
            for i in members
        }

    def _log_encounter(self, t: int, members: list[int], leader: int, delta_t: int, regions) -> None:
        rec = {
            "tick": t,
            "members": list(members),
            "leader": leader,
            "delta_t": delta_t,
            "regions": [r.as_tuple() for r in regions],
        }
        self.encounters.append(rec)
        if self.cfg.record_trace:
            reg = ";".join(":".join(str(v) for v in r) for r in rec["regions"])
            self.trace.append(
                f"E {t} members={','.join(str(m) for m in members)} "
                f"leader={leader} dt={delta_t} regions={reg}"
            )

    # -- SOS coordination -----------------------------------------------------

    def _coordinate_sos(self, t: int, members: list[int]) -> None:
        delta_t = len(members) - 1
        if self.tau - t - delta_t <= 0:
            return  # too little time left to re-plan
        tree = build_spanning_tree(members, self._comm_adjacency(members))
        leader = elect_leader(tree)
        offs = {i: self.robots[i].frame_offset for i in members}
        transforms = unify_frames(
            tree, leader, lambda i, j: (offs[j][0] - offs[i][0], offs[j][1] - offs[i][1])
        )
        assert all(
            (offs[i][0] + transforms[i][0], offs[i][1] + transforms[i][1]) == offs[leader]
            for i in members
        )
        fused_history, merged_codes = fuse(
            tree,
            leader,
            {i: self.robots[i].history for i in members},
            {i: self.robots[i].map.codes for i in members},
            np.maximum,
        )
        avoid = list(fused_history.regions())
        seen = {r.as_tuple() for r in avoid}
        for i in members:
            for z in self.robots[i].interference:
                if z.as_tuple() not in seen:
                    avoid.append(z)
                    seen.add(z.as_tuple())
        poses = {i: self.robots[i].pose for i in members}
        centroid = (
            sum(p[0] for p in poses.values()) / len(poses),
            sum(p[1] for p in poses.values()) / len(poses),
        )
        budgets = [
            SearchBudget(self.tau, t, delta_t, self.cfg.r, self.cfg.gamma) for _ in members
        ]
        pad = self.robots[leader].map.pad
        ch, cw = merged_codes.shape

        def region_ok(reg) -> bool:
            # veto regions the fused map already knows to be mostly
            # out-of-world (discovered walls and unrepresentable space)
            x0, y0, x1, y1 = reg.bounds()
            a0, a1 = max(y0 + pad, 0), min(y1 + pad, ch)
            b0, b1 = max(x0 + pad, 0), min(x1 + pad, cw)
            bad = reg.area - max(0, a1 - a0) * max(0, b1 - b0)
            if a1 > a0 and b1 > b0:
                bad += int((merged_codes[a0:a1, b0:b1] == BOUNDARY).sum())
            return bad <= 0.1 * reg.area

        try:
            regions = decompose(
                len(members), budgets, self.margin, centroid, avoid,
                max_extent=3.0 * math.hypot(self.world.width, self.world.height),
                feasible=region_ok,
            )
        except DecompositionError:
            return  # no feasible layout; robots carry on with current missions
        assignment = assign(regions, poses)
        updates = replicate_missions(leader, fused_history, assignment, t)
        for i in members:
            rb = self.robots[i]
            rb.map.adopt_codes(merged_codes)
            rb.history = updates[i].history
            rb.region = updates[i].region
            rb.add_interference(updates[i].new_interference)
            rb.frame_offset = offs[leader]
            rb.hold_until = t + delta_t
            self.controllers[i].reset_for_region(t, delta_t)
        self._log_encounter(t, members, leader, delta_t, [updates[i].region for i in members])

    # -- ARS coordination -----------------------------------------------------

    def _coordinate_ars(self, t: int, members: list[int]) -> None:
        delta_t = len(members) - 1
        tree = build_spanning_tree(members, self._comm_adjacency(members))
        leader = elect_leader(tree)
        merged = KnownMap.merge_codes([self.robots[i].map for i in members])
        poses = {i: self.robots[i].pose for i in members}
        centroid = (
            sum(p[0] for p in poses.values()) / len(poses),
            sum(p[1] for p in poses.values()) / len(poses),
        )
        sectors = assign_sectors(poses, centroid, self.cfg.r)
        for i in members:
            rb = self.robots[i]
            rb.map.adopt_codes(merged)
            rb.hold_until = t + delta_t
            ctrl = self.controllers[i]
            ctrl.sector = sectors[i]
            ctrl.target = None  # retarget under the new sector
        self._log_encounter(t, members, leader, delta_t, [])

    # -- PRS ---------------------------------------------------------------

    def _prs_step(self, t: int) -> None:
        if t == 0:
            self._prs_meeting(0, list(range(len(self.robots))), first=True)
            return
        g = self._prs_schedule
        if g is None or t < g.time:
            return
        point, r = g.point, self.cfg.r
        within = [rb.id for rb in self.robots if chebyshev(rb.pose, point) <= r]
        if len(within) == len(self.robots) or t >= g.time + 2 * g.a:
            self._prs_meeting(t, within)

    def _prs_meeting(self, t: int, attendees: list[int], first: bool = False) -> None:
        delta_t = max(len(attendees) - 1, 0)
        if len(attendees) >= 2:
            # Everyone at the meeting circle can talk to everyone else.
            full = {i: set(attendees) - {i} for i in attendees}
            tree = build_spanning_tree(attendees, full)
            leader = elect_leader(tree)
            merged = KnownMap.merge_codes([self.robots[i].map for i in attendees])
            for i in attendees:
                self.robots[i].map.adopt_codes(merged)
                self.robots[i].hold_until = t + delta_t
        else:
            leader = attendees[0] if attendees else 0
        ref = self.robots[leader].map
        pad = ref.pad
        inner = ref.codes[pad:-pad, pad:-pad]
        free_ys, free_xs = np.nonzero(inner == FREE)
        if len(free_xs) == 0:
            point = self.robots[leader].pose
        else:
            cx, cy = free_xs.mean(), free_ys.mean()
            i = int(np.argmin((free_xs - cx) ** 2 + (free_ys - cy) ** 2))
            point = (int(free_xs[i]), int(free_ys[i]))
        if first:
            a = 50
        else:
            known_ys, known_xs = np.nonzero(inner != UNKNOWN)
            reach = max(
                int(np.abs(known_xs - point[0]).max()),
                int(np.abs(known_ys - point[1]).max()),
            )
            a = max(1, math.ceil(reach / self.cfg.gamma))
        time = t + delta_t + 2 * a + self.cfg.b
        schedule = RendezvousSchedule(point=point, time=time, a=a, participants=[rb.id for rb in self.robots])
        self._prs_schedule = schedule
        for ctrl in self.controllers:
            ctrl.adopt_schedule(schedule)
        self._log_encounter(t, attendees, leader, delta_t, [])

    # -- metrics ------------------------------------------------------------

    def _metrics(self) -> list[RobotMetrics]:
        area = max_area(self.tau, self.cfg.r, self.cfg.gamma)
        masks = [rb.map.scanned for rb in self.robots]
        out = []
        for rb, own in zip(self.robots, masks):
            others = [m for j, m in enumerate(masks) if j != rb.id]
            overlap = int((own & np.logical_or.reduce(others)).sum()) if others else 0
            out.append(
                RobotMetrics(
                    robot=rb.id,
                    coverage_cells=rb.map.scanned_count,
                    coverage_norm=rb.map.scanned_count / area,
                    overlap_cells=overlap,
                    explore_ticks=rb.ledger.explore,
                    protocol_ticks=rb.ledger.protocol,
                    interrupt_ticks=rb.ledger.interrupt,
                )
            )
        return out


def run(config: RunConfig, world: GridWorld | None = None) -> RunResult:
    """One deterministic run; convenience wrapper around Simulation."""
    return Simulation(config, world).run()


# ---------------------------------------------------------------------------
# Metrics serialization and batch aggregation


def metrics_lines(result: RunResult) -> list[str]:
    cfg = result.config
    lines = []
    for m in result.metrics:
        lines.append(
            f"{cfg.strategy},{cfg.world_name},{cfg.seed},{cfg.n_robots},"
            f"{m.robot},{m.coverage_cells},{m.coverage_norm:.6f},"
            f"{m.overlap_cells},{m.interrupt_ticks}"
        )
    return lines


def metrics_text(result: RunResult) -> str:
    return "\n".join([METRICS_SCHEMA, METRICS_HEADER, *metrics_lines(result)]) + "\n"


def parse_metrics(text: str) -> list[dict]:
    rows = []
    header: list[str] | None = None
    for line in text.splitlines():
        if not line or line.startswith("#"):
            continue
        if header is None:
            if line != METRICS_HEADER:
                raise ContractError(f"unexpected metrics header {line!r}")
            header = line.split(",")
            continue
        vals = line.split(",")
        row = dict(zip(header, vals))
        for key in ("seed", "N", "robot", "coverage_cells", "overlap_cells", "interrupt_ticks"):
            row[key] = int(row[key])
        row["coverage_norm"] = float(row["coverage_norm"])
        rows.append(row)
    return rows


def aggregate(rows: list[dict]) -> dict[str, tuple[float, float, int]]:
    """Per-strategy (mean, std, n) of normalized coverage pooled across
    robots and replications. Order-invariant: rows are sorted first."""
    by_strategy: dict[str, list[float]] = {}
    key = lambda r: (r["strategy"], r["world"], r["seed"], r["robot"])
    for row in sorted(rows, key=key):
        by_strategy.setdefault(row["strategy"], []).append(row["coverage_norm"])
    out = {}
    for strat, vals in sorted(by_strategy.items()):
        mean = float(np.mean(vals))
        std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        out[strat] = (mean, std, len(vals))
    return out
