"""Gridworld construction, sensing, generation, and text round-trips."""
import numpy as np
import pytest

from softsearch.world import (
    ContractError,
    GenerationError,
    GridWorld,
    MAX_OBSTACLE_FRACTION,
    ObstacleSpec,
    SenseClass,
    SensorFootprint,
    disk_offsets,
    generate_random,
)

from conftest import world_from_rows


def test_dimensions_validated():
    with pytest.raises(ContractError):
        GridWorld(0, 5, np.zeros((5, 0), dtype=bool))
    with pytest.raises(ContractError):
        GridWorld(4, 4, np.zeros((3, 4), dtype=bool))


def test_accessibility_and_bounds():
    world = world_from_rows(["....", ".#..", "...."])
    assert world.is_accessible((0, 0))
    assert not world.is_accessible((1, 1))
    assert not world.is_accessible((-1, 0))
    assert not world.is_accessible((4, 0))
    assert world.free_cell_count == 11


def test_mask_is_immutable():
    world = world_from_rows(["..", ".."])
    with pytest.raises(ValueError):
        world.obstacle_mask[0, 0] = True


def test_sense_classifies_all_three_kinds():
    world = world_from_rows(["....", ".#..", "...."])
    out = world.sense(SensorFootprint((0, 0), 2))
    assert out[(0, 0)] == SenseClass.FREE
    assert out[(1, 1)] == SenseClass.OBSTACLE
    assert out[(-1, 0)] == SenseClass.BOUNDARY
    assert out[(0, -2)] == SenseClass.BOUNDARY
    # footprint is the Euclidean disk
    dx, dy = disk_offsets(2)
    assert len(out) == len(dx)


def test_sense_from_blocked_cell_rejected():
    world = world_from_rows(["....", ".#..", "...."])
    with pytest.raises(ContractError):
        world.sense(SensorFootprint((1, 1), 2))


def test_disk_offsets_euclidean():
    dx, dy = disk_offsets(3)
    assert ((dx**2 + dy**2) <= 9).all()
    assert len(dx) == sum(
        1 for x in range(-3, 4) for y in range(-3, 4) if x * x + y * y <= 9
    )


def test_text_roundtrip():
    world = world_from_rows(["..#.", "....", "#..#"])
    again = GridWorld.from_text(world.to_text())
    assert again == world


def test_text_rejects_bad_rows():
    with pytest.raises(ContractError):
        GridWorld.from_text("2 2\n..\n.x\n")
    with pytest.raises(ContractError):
        GridWorld.from_text("3 2\n..\n..\n")
    with pytest.raises(ContractError):
        GridWorld.from_text("")


def test_generation_deterministic():
    spec = ObstacleSpec(rect_count=(3, 6), rect_width=(4, 10), rect_height=(4, 10),
                        circle_count=(1, 3), circle_radius=(3, 6))
    a = generate_random(7, 120, 90, spec)
    b = generate_random(7, 120, 90, spec)
    c = generate_random(8, 120, 90, spec)
    assert a == b
    assert a != c


def test_generation_respects_area_cap():
    spec = ObstacleSpec(rect_count=(10, 10), rect_width=(8, 16), rect_height=(8, 16))
    world = generate_random(3, 100, 100, spec)
    assert world.obstacle_mask.mean() <= MAX_OBSTACLE_FRACTION


def test_generation_keeps_clearance():
    """No two obstacle components touch and none touches the walls."""
    spec = ObstacleSpec(rect_count=(6, 6), rect_width=(5, 12), rect_height=(5, 12),
                        circle_count=(2, 2), circle_radius=(3, 8))
    world = generate_random(11, 150, 150, spec)
    mask = world.obstacle_mask
    assert not mask[0].any() and not mask[-1].any()
    assert not mask[:, 0].any() and not mask[:, -1].any()
    # components stay separated: dilating every obstacle by one cell must not
    # merge any two components (clearance is at least two cells)
    from scipy.ndimage import binary_dilation, label

    eight = np.ones((3, 3))
    n_direct = label(mask, structure=eight)[1]
    n_dilated = label(binary_dilation(mask, structure=eight), structure=eight)[1]
    assert n_direct == n_dilated


def test_generation_fails_on_impossible_spec():
    with pytest.raises(GenerationError):
        generate_random(1, 20, 20, ObstacleSpec(rect_count=(1, 1), rect_width=(30, 30), rect_height=(5, 5)))
