"""Per-robot knowledge map: sensed classifications, scanned-area ledger, and
incrementally maintained frontier set.

The map is a padded code array so sensing near (and just beyond) the world
boundary needs no special cases. Codes: 0 unknown, 1 free, 2 obstacle,
3 boundary (out-of-world). Cells beyond the padding are treated as unknown.
"""
from __future__ import annotations

import numpy as np

from .world import Cell, GridWorld, disk_offsets

UNKNOWN, FREE, OBSTACLE, BOUNDARY = 0, 1, 2, 3

def truth_codes(world: GridWorld, pad: int) -> np.ndarray:
    """Ground-truth classification of the padded grid, cached on the world
    instance so all robots of a run share one array per pad width."""
    cache: dict[int, np.ndarray] = world.__dict__.setdefault("_truth_codes", {})
    cached = cache.get(pad)
    if cached is not None:
        return cached
    h, w = world.height, world.width
    codes = np.full((h + 2 * pad, w + 2 * pad), BOUNDARY, dtype=np.uint8)
    inner = np.where(world.obstacle_mask, OBSTACLE, FREE).astype(np.uint8)
    codes[pad : pad + h, pad : pad + w] = inner
    cache[pad] = codes
    return codes


def _disk_mask(radius: int) -> np.ndarray:
    span = np.arange(-radius, radius + 1)
    dx, dy = np.meshgrid(span, span)
    return dx * dx + dy * dy <= radius * radius


class KnownMap:
    """What one robot knows about the world, plus its own scanned-area mask."""

    def __init__(self, world: GridWorld, r: int):
        self.world = world
        self.r = r
        self.pad = r + 3
        h, w = world.height, world.width
        shape = (h + 2 * self.pad, w + 2 * self.pad)
        self.codes = np.zeros(shape, dtype=np.uint8)
        self.frontier_mask = np.zeros(shape, dtype=bool)
        self.frontiers: set[Cell] = set()
        self.scanned = np.zeros((h, w), dtype=bool)
        self.scanned_count = 0
        self._truth = truth_codes(world, self.pad)
        self._disk = _disk_mask(r)
        # Discovered world walls (the world is an axis-aligned rectangle, so
        # one same-row/column boundary sighting pins down the whole wall).
        self._walls: dict[str, int | None] = {"e": None, "w": None, "n": None, "s": None}

    # -- queries ---------------------------------------------------------

    def code_at(self, cell: Cell) -> int:
        x, y = cell[0] + self.pad, cell[1] + self.pad
        if 0 <= x < self.codes.shape[1] and 0 <= y < self.codes.shape[0]:
            return int(self.codes[y, x])
        # Beyond the stored array: known out-of-world once a wall on that
        # side has been discovered, otherwise unknown.
        if (
            (self._walls["w"] is not None and x < self._walls["w"])
            or (self._walls["e"] is not None and x > self._walls["e"])
            or (self._walls["s"] is not None and y < self._walls["s"])
            or (self._walls["n"] is not None and y > self._walls["n"])
        ):
            return BOUNDARY
        return UNKNOWN

    def blocked(self, cell: Cell) -> bool:
        """Known-impassable: sensed obstacle or sensed boundary. Unknown
        cells are optimistically considered passable."""
        return self.code_at(cell) in (OBSTACLE, BOUNDARY)

    def is_known_free(self, cell: Cell) -> bool:
        return self.code_at(cell) == FREE

    def is_unexplored(self, cell: Cell) -> bool:
        return self.code_at(cell) == UNKNOWN

    # NavView protocol: planning on current knowledge does not sense.
    def sense_from(self, pos: Cell) -> None:
        pass

    # -- sensing ----------------------------------------------------------

    def sense(self, pos: Cell) -> None:
        """Integrate one circular scan at ``pos`` (must be in-world):
        classify unknown cells in range, credit newly scanned in-world cells,
        and refresh the frontier set around the scan."""
        r, p = self.r, self.pad
        x, y = pos
        px0, px1 = x - r + p, x + r + 1 + p
        py0, py1 = y - r + p, y + r + 1 + p
        sub = self.codes[py0:py1, px0:px1]
        new = (sub == UNKNOWN) & self._disk
        sub[new] = self._truth[py0:py1, px0:px1][new]

        # scanned-area ledger (in-world part of the disk only)
        h, w = self.world.height, self.world.width
        wx0, wx1 = max(0, x - r), min(w, x + r + 1)
        wy0, wy1 = max(0, y - r), min(h, y + r + 1)
        disk_in = self._disk[wy0 - (y - r) : wy1 - (y - r), wx0 - (x - r) : wx1 - (x - r)]
        scan = self.scanned[wy0:wy1, wx0:wx1]
        newly = disk_in & ~scan
        self.scanned_count += int(newly.sum())
        scan |= disk_in

        self._refresh_frontiers(py0 - 2, py1 + 2, px0 - 2, px1 + 2)
        self._infer_walls(pos)

    def _infer_walls(self, pos: Cell) -> None:
        """Extend sensed boundary cells into full walls. Out-of-world space is
        the complement of a rectangle, so a boundary cell on the robot's own
        row (or column) fixes an entire vertical (horizontal) wall."""
        r, p = self.r, self.pad
        x, y = pos[0] + p, pos[1] + p
        full = False
        if self._walls["e"] is None:
            row = self.codes[y, x + 1 : x + r + 1]
            hits = np.flatnonzero(row == BOUNDARY)
            if hits.size:
                wall = x + 1 + int(hits[0])
                self._walls["e"] = wall
                self.codes[:, wall:] = BOUNDARY
                full = True
        if self._walls["w"] is None:
            row = self.codes[y, max(0, x - r) : x]
            hits = np.flatnonzero(row == BOUNDARY)
            if hits.size:
                wall = max(0, x - r) + int(hits[-1])
                self._walls["w"] = wall
                self.codes[:, : wall + 1] = BOUNDARY
                full = True
        if self._walls["n"] is None:
            col = self.codes[y + 1 : y + r + 1, x]
            hits = np.flatnonzero(col == BOUNDARY)
            if hits.size:
                wall = y + 1 + int(hits[0])
                self._walls["n"] = wall
                self.codes[wall:, :] = BOUNDARY
                full = True
        if self._walls["s"] is None:
            col = self.codes[max(0, y - r) : y, x]
            hits = np.flatnonzero(col == BOUNDARY)
            if hits.size:
                wall = max(0, y - r) + int(hits[-1])
                self._walls["s"] = wall
                self.codes[: wall + 1, :] = BOUNDARY
                full = True
        if full:
            self.recompute_frontiers()

    # -- frontiers ----------------------------------------------------------

    def _refresh_frontiers(self, a0: int, a1: int, b0: int, b1: int) -> None:
        """Recompute frontier status inside a padded-index window (exclusive
        of its one-cell halo) and sync the incremental set."""
        a0, b0 = max(a0, 0), max(b0, 0)
        a1 = min(a1, self.codes.shape[0])
        b1 = min(b1, self.codes.shape[1])
        win = self.codes[a0:a1, b0:b1]
        inner = win[1:-1, 1:-1]
        nb_unknown = (
            (win[:-2, 1:-1] == UNKNOWN)
            | (win[2:, 1:-1] == UNKNOWN)
            | (win[1:-1, :-2] == UNKNOWN)
            | (win[1:-1, 2:] == UNKNOWN)
        )
        fnew = (inner == FREE) & nb_unknown
        fslice = self.frontier_mask[a0 + 1 : a1 - 1, b0 + 1 : b1 - 1]
        changed = fslice ^ fnew
        if changed.any():
            for cy, cx in np.argwhere(changed):
                cell = (int(cx) + b0 + 1 - self.pad, int(cy) + a0 + 1 - self.pad)
                if fnew[cy, cx]:
                    self.frontiers.add(cell)
                else:
                    self.frontiers.discard(cell)
            fslice[:] = fnew

    def recompute_frontiers(self) -> None:
        """Full rebuild of the frontier mask and set (used after map merges)."""
        self._refresh_frontiers(0, self.codes.shape[0], 0, self.codes.shape[1])
        # the one-cell halo of the full window is never a frontier (padding
        # edge cells are unknown, hence not FREE), so the window recompute
        # above is exhaustive

    # -- fusion ---------------------------------------------------------

    def adopt_codes(self, merged: np.ndarray) -> None:
        """Replace knowledge with a fused code array (noise-free system:
        classifications never conflict, so elementwise max is a union)."""
        self.codes = merged.copy()
        # Carry over walls inferred by any contributor: a fully-boundary
        # outermost row/column can only come from wall inference.
        if self._walls["w"] is None and (self.codes[:, 0] == BOUNDARY).all():
            self._walls["w"] = 0
        if self._walls["e"] is None and (self.codes[:, -1] == BOUNDARY).all():
            self._walls["e"] = self.codes.shape[1] - 1
        if self._walls["s"] is None and (self.codes[0, :] == BOUNDARY).all():
            self._walls["s"] = 0
        if self._walls["n"] is None and (self.codes[-1, :] == BOUNDARY).all():
            self._walls["n"] = self.codes.shape[0] - 1
        self.recompute_frontiers()

    @staticmethod
    def merge_codes(maps: list["KnownMap"]) -> np.ndarray:
        return np.maximum.reduce([m.codes for m in maps])

    # -- regions ----------------------------------------------------------

    def known_fraction_in(self, x0: int, y0: int, x1: int, y1: int) -> float:
        """Fraction of the rectangle already classified (clamped to the
        padded array; cells beyond it count as unknown)."""
        p = self.pad
        a0, a1 = max(y0 + p, 0), min(y1 + p, self.codes.shape[0])
        b0, b1 = max(x0 + p, 0), min(x1 + p, self.codes.shape[1])
        total = (y1 - y0) * (x1 - x0)
        if total <= 0 or a1 <= a0 or b1 <= b0:
            return 0.0
        known = int((self.codes[a0:a1, b0:b1] != UNKNOWN).sum())
        return known / total

    def boundary_fraction_in(self, x0: int, y0: int, x1: int, y1: int) -> float:
        """Fraction of the rectangle known to be out-of-world (sensed or
        inferred boundary, plus anything beyond the representable map)."""
        p = self.pad
        a0, a1 = max(y0 + p, 0), min(y1 + p, self.codes.shape[0])
        b0, b1 = max(x0 + p, 0), min(x1 + p, self.codes.shape[1])
        total = (y1 - y0) * (x1 - x0)
        if total <= 0:
            return 0.0
        bad = total - max(0, a1 - a0) * max(0, b1 - b0)
        if a1 > a0 and b1 > b0:
            bad += int((self.codes[a0:a1, b0:b1] == BOUNDARY).sum())
        return bad / total

    def scanned_fraction_in(self, x0: int, y0: int, x1: int, y1: int) -> float:
        h, w = self.world.height, self.world.width
        a0, a1 = max(y0, 0), min(y1, h)
        b0, b1 = max(x0, 0), min(x1, w)
        total = (y1 - y0) * (x1 - x0)
        if total <= 0 or a1 <= a0 or b1 <= b0:
            return 0.0
        return int(self.scanned[a0:a1, b0:b1].sum()) / total
