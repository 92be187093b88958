"""Static 2-D gridworld: occupancy, circular sensing, random generation, text I/O.

Coordinate conventions:
- A cell is an ``(x, y)`` integer pair; ``x`` indexes columns, ``y`` rows.
- Row ``y = 0`` is the southern edge of the world.
- Occupancy is stored as a numpy bool array indexed ``mask[y, x]``
  (True = obstacle).
- Any coordinate outside ``[0, width) x [0, height)`` is inaccessible; robots
  learn about the hard boundary only through sensing, never a priori.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from pathlib import Path

import numpy as np

Cell = tuple[int, int]


class GenerationError(RuntimeError):
    """Obstacle placement could not satisfy the spec within the retry budget."""


class ContractError(ValueError):
    """A caller violated an operation precondition."""


class SenseClass(Enum):
    FREE = "free"
    OBSTACLE = "obstacle"
    BOUNDARY = "boundary"


@dataclass(frozen=True)
class SensorFootprint:
    """Circular sensor footprint: all cells within Euclidean distance
    ``radius`` of ``center`` (center-to-center)."""

    center: Cell
    radius: int

    def __post_init__(self) -> None:
        if self.radius < 1:
            raise ContractError(f"sensor radius must be >= 1, got {self.radius}")


@lru_cache(maxsize=64)
def disk_offsets(radius: int) -> tuple[np.ndarray, np.ndarray]:
    """Integer offsets (dx, dy) of all cells within Euclidean distance
    ``radius`` of the origin. Cached per radius."""
    r = int(radius)
    span = np.arange(-r, r + 1)
    dx, dy = np.meshgrid(span, span)
    inside = dx * dx + dy * dy <= r * r
    return dx[inside].ravel(), dy[inside].ravel()


class GridWorld:
    """Immutable 2-D occupancy environment with a hard implicit boundary."""

    def __init__(self, width: int, height: int, obstacle_mask: np.ndarray):
        if width <= 0 or height <= 0:
            raise ContractError(f"world dimensions must be positive, got {width}x{height}")
        mask = np.asarray(obstacle_mask, dtype=bool)
        if mask.shape != (height, width):
            raise ContractError(
                f"obstacle_mask shape {mask.shape} != (height={height}, width={width})"
            )
        self.width = width
        self.height = height
        self.obstacle_mask = mask
        self.obstacle_mask.setflags(write=False)

    # -- accessibility -------------------------------------------------

    def in_bounds(self, cell: Cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def is_accessible(self, cell: Cell) -> bool:
        """False iff the cell is outside the boundary or occupied."""
        x, y = cell
        if not (0 <= x < self.width and 0 <= y < self.height):
            return False
        return not self.obstacle_mask[y, x]

    @property
    def free_cell_count(self) -> int:
        return int(self.width * self.height - self.obstacle_mask.sum())

    # -- sensing -------------------------------------------------------

    def sense(self, footprint: SensorFootprint) -> dict[Cell, SenseClass]:
        """Classify every cell in the footprint.

        Out-of-world cells are reported as BOUNDARY, distinct from OBSTACLE,
        so robots learn world limits only on contact.
        """
        cx, cy = footprint.center
        if not self.is_accessible((cx, cy)):
            raise ContractError(f"sense center {footprint.center} is inaccessible")
        dx, dy = disk_offsets(footprint.radius)
        out: dict[Cell, SenseClass] = {}
        for ox, oy in zip(dx + cx, dy + cy):
            cell = (int(ox), int(oy))
            if not self.in_bounds(cell):
                out[cell] = SenseClass.BOUNDARY
            elif self.obstacle_mask[cell[1], cell[0]]:
                out[cell] = SenseClass.OBSTACLE
            else:
                out[cell] = SenseClass.FREE
        return out

    # -- text format ---------------------------------------------------
    # First line "width height"; then height rows of width characters,
    # '.' free and '#' obstacle; the first data row is y = 0 (south).

    def to_text(self) -> str:
        rows = ["%d %d" % (self.width, self.height)]
        chars = np.where(self.obstacle_mask, "#", ".")
        rows.extend("".join(row) for row in chars)
        return "\n".join(rows) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "GridWorld":
        lines = text.splitlines()
        if not lines:
            raise ContractError("empty environment text")
        try:
            width, height = (int(tok) for tok in lines[0].split())
        except ValueError as exc:
            raise ContractError(f"bad header line {lines[0]!r}") from exc
        if len(lines) - 1 < height:
            raise ContractError(f"expected {height} rows, got {len(lines) - 1}")
        mask = np.zeros((height, width), dtype=bool)
        for y in range(height):
            row = lines[1 + y]
            if len(row) != width or set(row) - {".", "#"}:
                raise ContractError(f"bad row {y}: {row!r}")
            mask[y] = np.frombuffer(row.encode(), dtype="S1") == b"#"
        return cls(width, height, mask)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path: str | Path) -> "GridWorld":
        return cls.from_text(Path(path).read_text())

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, GridWorld)
            and self.width == other.width
            and self.height == other.height
            and bool(np.array_equal(self.obstacle_mask, other.obstacle_mask))
        )

    def __repr__(self) -> str:
        return f"GridWorld({self.width}x{self.height}, {int(self.obstacle_mask.sum())} obstacle cells)"


@dataclass(frozen=True)
class ObstacleSpec:
    """Counts and size ranges for random obstacle placement.

    Ranges are inclusive (lo, hi) pairs. Shapes are axis-aligned rectangles
    and rasterized circles, placed fully inside the boundary with a small
    clearance gap so obstacle rings never touch each other or the walls.
    """

    rect_count: tuple[int, int] = (0, 0)
    rect_width: tuple[int, int] = (4, 4)
    rect_height: tuple[int, int] = (4, 4)
    circle_count: tuple[int, int] = (0, 0)
    circle_radius: tuple[int, int] = (3, 3)
    clearance: int = 2

    def is_empty(self) -> bool:
        return self.rect_count[1] == 0 and self.circle_count[1] == 0


MAX_OBSTACLE_FRACTION = 0.2
PLACEMENT_RETRIES = 200


def _draw(rng: np.random.Generator, lo_hi: tuple[int, int]) -> int:
    lo, hi = lo_hi
    if lo > hi:
        raise ContractError(f"empty range {lo_hi}")
    return int(rng.integers(lo, hi + 1))


def generate_random(
    seed: int,
    width: int,
    height: int,
    spec: ObstacleSpec | None = None,
    max_fraction: float = MAX_OBSTACLE_FRACTION,
    max_retries: int = PLACEMENT_RETRIES,
) -> GridWorld:
    """Deterministically generate a world: non-overlapping rectangles and
    circles fully inside the boundary, total obstacle area capped at
    ``max_fraction`` of the world area."""
    if width <= 0 or height <= 0:
        raise ContractError("world dimensions must be positive")
    spec = spec or ObstacleSpec()
    rng = np.random.default_rng(seed)
    mask = np.zeros((height, width), dtype=bool)
    # occupied-with-clearance footprint used for the non-overlap test
    halo = np.zeros((height, width), dtype=bool)
    area_budget = int(max_fraction * width * height)
    gap = spec.clearance

    def try_place(stamp: np.ndarray, x0: int, y0: int) -> bool:
        h, w = stamp.shape
        if halo[y0 : y0 + h, x0 : x0 + w][stamp].any():
            return False
        if int(mask.sum()) + int(stamp.sum()) > area_budget:
            return False
        mask[y0 : y0 + h, x0 : x0 + w] |= stamp
        gy0, gy1 = max(0, y0 - gap), min(height, y0 + h + gap)
        gx0, gx1 = max(0, x0 - gap), min(width, x0 + w + gap)
        halo[gy0:gy1, gx0:gx1] = True
        return True

    def place_shapes(count: int, make_stamp) -> None:
        for _ in range(count):
            for attempt in range(max_retries + 1):
                if attempt == max_retries:
                    raise GenerationError(
                        f"could not place obstacle after {max_retries} retries"
                    )
                stamp = make_stamp()
                h, w = stamp.shape
                if w + 2 * gap > width or h + 2 * gap > height:
                    raise GenerationError("obstacle too large for the world")
                x0 = _draw(rng, (gap, width - w - gap))
                y0 = _draw(rng, (gap, height - h - gap))
                if try_place(stamp, x0, y0):
                    break

    def rect_stamp() -> np.ndarray:
        w = _draw(rng, spec.rect_width)
        h = _draw(rng, spec.rect_height)
        return np.ones((h, w), dtype=bool)

    def circle_stamp() -> np.ndarray:
        radius = _draw(rng, spec.circle_radius)
        dx, dy = np.meshgrid(*(np.arange(-radius, radius + 1),) * 2)
        return dx * dx + dy * dy <= radius * radius

    place_shapes(_draw(rng, spec.rect_count), rect_stamp)
    place_shapes(_draw(rng, spec.circle_count), circle_stamp)
    return GridWorld(width, height, mask)
