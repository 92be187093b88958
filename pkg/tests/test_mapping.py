"""Per-robot knowledge map: sensing, frontiers, fusion, wall inference."""
import numpy as np
import pytest

from softsearch.mapping import BOUNDARY, FREE, OBSTACLE, UNKNOWN, KnownMap
from softsearch.world import GridWorld, disk_offsets

from conftest import world_from_rows


def make_map(rows, r=3):
    world = world_from_rows(rows)
    return world, KnownMap(world, r)


EMPTY_20 = ["." * 20] * 20


def test_sense_classifies_disk():
    world, kmap = make_map(EMPTY_20, r=3)
    kmap.sense((10, 10))
    dx, dy = disk_offsets(3)
    for ox, oy in zip(dx, dy):
        assert kmap.code_at((10 + int(ox), 10 + int(oy))) == FREE
    assert kmap.code_at((10, 14)) == UNKNOWN
    assert kmap.scanned_count == len(dx)


def test_scanned_counts_only_new_in_world_cells():
    world, kmap = make_map(EMPTY_20, r=3)
    kmap.sense((3, 3))
    first = kmap.scanned_count
    kmap.sense((3, 3))
    assert kmap.scanned_count == first  # re-scan adds nothing
    kmap.sense((0, 0))  # disk partially out of world
    assert kmap.scanned_count == int(kmap.scanned.sum())


def test_blocked_and_unknown_semantics():
    rows = ["." * 10] * 10
    rows[5] = "...##....."
    world, kmap = make_map(rows, r=2)
    kmap.sense((4, 4))
    assert kmap.blocked((3, 5)) and kmap.blocked((4, 5))
    assert not kmap.blocked((9, 9))  # unknown cells are optimistically free
    assert kmap.is_unexplored((9, 9))
    assert kmap.is_known_free((4, 4))


def test_frontiers_match_definition_incrementally():
    world, kmap = make_map(EMPTY_20, r=3)
    for pos in [(5, 5), (10, 8), (3, 14)]:
        kmap.sense(pos)
        # reference: free cells 4-adjacent to an unknown cell
        expected = set()
        for cell in map(tuple, np.argwhere(kmap.codes == FREE)[:, ::-1] - kmap.pad):
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                if kmap.code_at((cell[0] + dx, cell[1] + dy)) == UNKNOWN:
                    expected.add((int(cell[0]), int(cell[1])))
                    break
        assert kmap.frontiers == expected


def test_merge_codes_is_union():
    world = world_from_rows(EMPTY_20)
    a, b = KnownMap(world, 3), KnownMap(world, 3)
    a.sense((4, 4))
    b.sense((15, 15))
    merged = KnownMap.merge_codes([a, b])
    a.adopt_codes(merged)
    assert a.code_at((15, 15)) == FREE and a.code_at((4, 4)) == FREE
    # frontier set is rebuilt for the merged knowledge
    assert (15, 18) in a.frontiers


def test_wall_inference_pins_whole_wall():
    world, kmap = make_map(EMPTY_20, r=4)
    kmap.sense((2, 10))  # west wall enters the scan on the robot's own row
    assert kmap.code_at((-1, 0)) == BOUNDARY
    assert kmap.code_at((-1, 19)) == BOUNDARY
    assert kmap.code_at((0, 0)) != BOUNDARY  # in-world cells untouched


def test_no_wall_inference_away_from_walls():
    world, kmap = make_map(EMPTY_20, r=4)
    kmap.sense((10, 10))  # interior scan: nothing out of world in range
    assert kmap.code_at((-1, 10)) == UNKNOWN
    assert kmap.code_at((10, 20)) == UNKNOWN


def test_obstacle_cells_never_mistaken_for_walls():
    rows = ["." * 20] * 20
    rows[10] = "....#..............."
    world, kmap = make_map(rows, r=4)
    kmap.sense((7, 10))  # obstacle on the same row, within range
    assert kmap.code_at((4, 10)) == OBSTACLE
    assert kmap.code_at((0, 10)) == UNKNOWN  # no wall inferred from it


def test_region_fraction_queries():
    world, kmap = make_map(EMPTY_20, r=3)
    kmap.sense((10, 10))
    assert kmap.known_fraction_in(8, 8, 13, 13) == 1.0
    assert kmap.known_fraction_in(0, 0, 3, 3) == 0.0
    assert 0 < kmap.scanned_fraction_in(0, 0, 20, 20) < 1
    # rectangles hanging past the world edge count the outside as bad
    kmap.sense((2, 10))
    assert kmap.boundary_fraction_in(-10, 8, 10, 12) == pytest.approx(0.5)
