"""Closed-form scannable-area/time formulas and exploration-region construction.

All areas are in cells squared; times in ticks; one cell = one distance unit.
Exploration regions are axis-aligned squares sized so their area matches the
remaining scannable-area budget; reported areas truncate to whole cells.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .world import Cell, ContractError


@dataclass(frozen=True)
class ExplorationRegion:
    """Axis-aligned rectangular region assigned to one robot.

    ``origin`` is the left-lower corner. The centroid is always derived from
    origin and size, never stored. ``margin_width`` is the width of the
    unassigned band reserved around the region (0 = no margin).
    """

    origin: Cell
    width: int
    height: int
    margin_width: int = 0

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ContractError(f"region size must be >= 1, got {self.width}x{self.height}")
        if self.margin_width < 0:
            raise ContractError("margin_width must be >= 0")

    @property
    def centroid(self) -> tuple[float, float]:
        return (self.origin[0] + self.width / 2.0, self.origin[1] + self.height / 2.0)

    @property
    def area(self) -> int:
        return self.width * self.height

    def contains(self, cell: Cell) -> bool:
        x, y = cell
        ox, oy = self.origin
        return ox <= x < ox + self.width and oy <= y < oy + self.height

    def bounds(self) -> tuple[int, int, int, int]:
        """(x0, y0, x1, y1) with x1/y1 exclusive."""
        ox, oy = self.origin
        return ox, oy, ox + self.width, oy + self.height

    def outer(self) -> "ExplorationRegion":
        """The region grown by its margin on all four sides."""
        m = self.margin_width
        ox, oy = self.origin
        return ExplorationRegion((ox - m, oy - m), self.width + 2 * m, self.height + 2 * m)

    def intersects(self, other: "ExplorationRegion") -> bool:
        ax0, ay0, ax1, ay1 = self.bounds()
        bx0, by0, bx1, by1 = other.bounds()
        return ax0 < bx1 and bx0 < ax1 and ay0 < by1 and by0 < ay1

    def gap_to(self, other: "ExplorationRegion") -> float:
        """Minimum axis gap between the two rectangles (0 if they touch or
        overlap): the Chebyshev separation distance."""
        ax0, ay0, ax1, ay1 = self.bounds()
        bx0, by0, bx1, by1 = other.bounds()
        dx = max(bx0 - ax1, ax0 - bx1, 0)
        dy = max(by0 - ay1, ay0 - by1, 0)
        return float(max(dx, dy))

    def as_tuple(self) -> tuple[int, int, int, int, int]:
        return (self.origin[0], self.origin[1], self.width, self.height, self.margin_width)


@dataclass(frozen=True)
class SearchBudget:
    """Time/sensing budget of one robot.

    tau: total search time; t: time already elapsed; delta_t: duration of the
    coordination event being accounted for; r: perception range; gamma:
    motion scale (cells scanned along a line per tick).
    """

    tau: float
    t: float = 0.0
    delta_t: float = 0.0
    r: int = 20
    gamma: float = 1.0

    def __post_init__(self) -> None:
        if not 0 <= self.t <= self.tau:
            raise ContractError(f"need 0 <= t <= tau, got t={self.t}, tau={self.tau}")
        if self.r < 1:
            raise ContractError("r must be >= 1")
        if self.gamma <= 0:
            raise ContractError("gamma must be > 0")

    @property
    def remaining(self) -> float:
        """Time left after the coordination event: tau - t - delta_t."""
        return self.tau - self.t - self.delta_t


def max_area_exact(tau: float, r: int, gamma: float = 1.0) -> float:
    """Maximum area a robot can scan in ``tau`` ticks: pi*r^2 + 2*gamma*r*tau."""
    if tau < 0:
        raise ContractError(f"tau must be >= 0, got {tau}")
    return math.pi * r * r + 2.0 * gamma * r * tau

def max_area(tau: float, r: int, gamma: float = 1.0) -> int:
    """``max_area_exact`` truncated to whole cells (areas are reported floored)."""
    return int(max_area_exact(tau, r, gamma))


def margin_time(m: int, budget: SearchBudget) -> float:
    """Time to explore a width-m margin frame around a region sized for the
    remaining budget: (2/(r*gamma)) * (m^2 + m*sqrt(pi*r^2 + 2*gamma*r*rem)).

    Exact real value; callers round up to whole ticks at scheduling time.
    """
    if m < 2 * budget.r:
        raise ContractError(f"margin width {m} < 2r = {2 * budget.r}")
    rem = budget.remaining
    if rem < 0:
        raise ContractError(f"negative remaining time {rem}")
    side = math.sqrt(max_area_exact(rem, budget.r, budget.gamma))
    return (2.0 / (budget.r * budget.gamma)) * (m * m + m * side)


def augmented_area(budget: SearchBudget, tau0: float) -> float:
    """Area of the region-plus-margin: pi*r^2 + 2*gamma*r*(tau + tau0 - t - dT)."""
    return max_area_exact(budget.remaining + tau0, budget.r, budget.gamma)


def region_side_for_budget(budget: SearchBudget) -> int:
    """Side of the square region whose area covers the remaining scannable
    area: ceil(sqrt(max_area(remaining)))."""
    rem = budget.remaining
    if rem < 0:
        raise ContractError(f"negative remaining time {rem}")
    return int(math.ceil(math.sqrt(max_area_exact(rem, budget.r, budget.gamma))))


def region_for_budget(anchor: Cell, budget: SearchBudget, m: int = 0) -> ExplorationRegion:
    """Square exploration region for the remaining budget, centered on
    ``anchor``, with margin width ``m``. Region area >= remaining scannable
    area by construction."""
    if budget.remaining <= 0:
        raise ContractError("remaining time must be > 0")
    side = region_side_for_budget(budget)
    ox = anchor[0] - side // 2
    oy = anchor[1] - side // 2
    return ExplorationRegion((ox, oy), side, side, margin_width=m)
