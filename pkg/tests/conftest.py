"""Shared helpers for the test suite."""
from __future__ import annotations

import collections

import numpy as np
import pytest

from softsearch.world import Cell, GridWorld


def bfs_reachable(world: GridWorld, start: Cell) -> set[Cell]:
    """All cells reachable from start by 8-connected moves on free cells."""
    seen = {start}
    queue = collections.deque([start])
    while queue:
        x, y = queue.popleft()
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                nxt = (x + dx, y + dy)
                if nxt not in seen and world.is_accessible(nxt):
                    seen.add(nxt)
                    queue.append(nxt)
    return seen


def world_from_rows(rows: list[str]) -> GridWorld:
    """Build a world from '.'/'#' strings; rows[0] is y = 0 (south)."""
    width = len(rows[0])
    mask = np.zeros((len(rows), width), dtype=bool)
    for y, row in enumerate(rows):
        mask[y] = np.frombuffer(row.encode(), dtype="S1") == b"#"
    return GridWorld(width, len(rows), mask)


@pytest.fixture
def empty_world() -> GridWorld:
    return GridWorld(60, 60, np.zeros((60, 60), dtype=bool))
