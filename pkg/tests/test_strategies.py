"""Per-robot controllers: tick ledger, walker, sectors, and rendezvous
scheduling."""
import math

import numpy as np
import pytest

from softsearch.mapping import KnownMap
from softsearch.strategies import (
    ARSController,
    PRSController,
    RendezvousSchedule,
    RobotState,
    Sector,
    SOSController,
    TickLedger,
    Walker,
    assign_sectors,
)
from softsearch.geometry import ExplorationRegion
from softsearch.world import GridWorld

from conftest import world_from_rows

EMPTY_40 = ["." * 40] * 40


def make_robot(world, pos, rid=0, tau=200, r=4):
    kmap = KnownMap(world, r)
    kmap.sense(pos)
    return RobotState(
        id=rid, pose=pos, frame_offset=(0, 0), map=kmap, tau=tau, r=r, gamma=1.0
    )


def test_ledger_totals():
    led = TickLedger()
    led.explore += 3
    led.protocol += 2
    led.interrupt += 1
    assert led.total == 6


def test_interference_dedupe_and_membership():
    world = world_from_rows(EMPTY_40)
    rb = make_robot(world, (20, 20))
    region = ExplorationRegion((0, 0), 10, 10)
    rb.add_interference([region])
    rb.add_interference([region, ExplorationRegion((20, 0), 5, 5)])
    assert len(rb.interference) == 2
    assert rb.in_interference((5, 5))
    assert not rb.in_interference((15, 15))


def test_walker_reaches_target_straight():
    walker = Walker()
    walker.set_target((5, 3))
    pos = (0, 0)
    for _ in range(10):
        kind, cell = walker.step(pos, lambda c: False)
        if kind == "arrived":
            break
        assert kind == "move"
        pos = cell
    assert pos == (5, 3)


def test_walker_detours_and_reports_unreachable():
    wall = {(3, y) for y in range(-10, 11)}
    walker = Walker()
    walker.set_target((6, 0))
    # sealed target: a box around it
    box = {(x, y) for x in (5, 6, 7) for y in (-1, 0, 1) if (x, y) != (6, 0)}
    walker2 = Walker()
    walker2.set_target((6, 0))
    kind, _ = walker2.step((0, 0), lambda c: c in box)
    assert kind == "unreachable"
    # plain wall with an end is passable
    pos = (0, 0)
    blocked = lambda c: c in wall and abs(c[1]) < 8
    for _ in range(60):
        kind, cell = walker.step(pos, blocked)
        if kind == "arrived":
            break
        pos = cell
    assert pos == (6, 0)


def test_sector_contains_wraps_angles():
    sec = Sector((0.0, 0.0), -math.pi / 4, math.pi / 4)  # wedge around +x
    assert sec.contains((10, 0))
    assert sec.contains((10, 9))
    assert not sec.contains((0, 10))
    assert not sec.contains((-10, 0))


def test_assign_sectors_partition_and_stability():
    poses = {0: (10, 0), 1: (-10, 0), 2: (0, 10), 3: (0, -10)}
    sectors = assign_sectors(poses, (0.0, 0.0), r=5)
    assert len(sectors) == 4
    # equal widths tiling the full circle
    widths = sorted(s.a1 - s.a0 for s in sectors.values())
    assert all(w == pytest.approx(math.pi / 2) for w in widths)
    # each robot's own position lies in its sector (poses on bisectors)
    for rid, sec in sectors.items():
        assert sec.contains(poses[rid])


def test_ars_pick_penalizes_outside_sector():
    world = world_from_rows(EMPTY_40)
    rb = make_robot(world, (20, 20))
    ctrl = ARSController(rb)
    ctrl.sector = Sector((20.0, 20.0), -math.pi / 4, math.pi / 4)
    inside = (26, 20)  # dist 6, in sector
    outside = (15, 20)  # dist 5, outside; 5 * 1.5 = 7.5 > 6
    assert ctrl.pick({inside, outside}) == inside
    # without a sector the plain nearest wins
    ctrl.sector = None
    assert ctrl.pick({inside, outside}) == outside


def test_prs_heading_and_waiting_are_interrupt():
    world = world_from_rows(EMPTY_40)
    rb = make_robot(world, (20, 20), tau=100)
    ctrl = PRSController(rb)
    ctrl.adopt_schedule(RendezvousSchedule(point=(30, 20), time=12, participants=[0, 1], a=5))
    # far from the deadline: exploring
    _, kind = ctrl.tick(0)
    assert kind == "explore" and rb.phase == "explore"
    # at t + travel >= time the robot abandons exploration
    t_abandon = 12 - 10  # Chebyshev distance 10
    _, kind = ctrl.tick(t_abandon)
    assert kind == "interrupt" and ctrl.mode == "heading"
    pos = rb.pose
    for t in range(t_abandon + 1, 20):
        cell, kind = ctrl.tick(t)
        assert kind == "interrupt"
        rb.pose = cell
        if ctrl.at_rendezvous:
            break
    assert ctrl.at_rendezvous
    assert max(abs(rb.pose[0] - 30), abs(rb.pose[1] - 20)) <= ctrl.ARRIVE_DIST


def test_sos_initial_region_covers_budget_and_sweeps():
    world = world_from_rows(EMPTY_40)
    rb = make_robot(world, (20, 20), tau=50, r=4)
    ctrl = SOSController(rb, margin=8, seed_base=1)
    region = rb.region
    assert region is not None
    assert region.area >= 2 * rb.r * rb.tau  # sized for the full budget
    cx, cy = region.centroid
    assert abs(cx - 20) <= 1 and abs(cy - 20) <= 1
    # ticking moves the robot and logs explore time
    for t in range(10):
        cell, kind = ctrl.tick(t)
        assert kind == "explore"
        rb.pose = cell
        rb.map.sense(cell)
    assert rb.map.scanned_count > 0
