"""Closed-form per-step FLOP counts for the full, information, and low-rank filters.

The polynomials are evaluated exactly as modeled (fractional values kept as
reals), together with the crossover rank below which the low-rank filter is
cheaper per step than the full filter, and the boundary curve of that
crossover over a grid of state dimensions.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence


@dataclass(frozen=True)
class CostQuery:
    """Problem dimensions for a per-step cost evaluation.

    ``r`` (filter rank) and ``s`` (Euler substeps per sampling interval) are
    only meaningful for the low-rank filter and may be left unset otherwise.
    """

    n: int
    p: int
    r: Optional[int] = None
    s: Optional[int] = None

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise ValueError(f"n and p must be >= 1, got n={self.n}, p={self.p}")
        if self.r is not None and not 1 <= self.r <= self.n:
            raise ValueError(f"rank must be in [1, {self.n}], got {self.r}")
        if self.s is not None and self.s < 1:
            raise ValueError(f"substeps must be >= 1, got {self.s}")


@dataclass(frozen=True)
class BoundaryPoint:
    """One point of the crossover boundary: largest advantageous rank at n."""

    n: int
    r_star: int
    flops_kf: float
    flops_lkf_at_rstar: float


def flops_kf(q: CostQuery) -> float:
    """Per-step cost of the full filter."""
    n, p = q.n, q.p
    return (
        4 * n**3
        + 3.5 * n**2
        - 1.5 * n
        + 4 * n**2 * p
        + n * p
        + 3 * n * p**2
        + (16 * p**3 - 3 * p**2 - p) / 6
    )


def flops_if(q: CostQuery) -> float:
    """Per-step cost of the information filter (reference only)."""
    n, p = q.n, q.p
    return (50 * n**3 + 45 * n**2 - 23 * n) / 6 + 2 * n**2 * p + n * p


def flops_lkf(q: CostQuery) -> float:
    """Per-step cost of the low-rank filter at rank r with s Euler substeps."""
    if q.r is None or q.s is None:
        raise ValueError("low-rank cost needs both r and s")
    n, p, r, s = q.n, q.p, q.r, q.s
    return (
        (4 * r + s * r + 2 * p + 4 - s / 2) * n**2
        + (3 * r**2 + 4 * s * r**2 - r + 4 * p * r + p - 2 + s / 2) * n
        + (5 * r + 0.5) * p**2
        + (7 * r**2 - 3 * r - 0.5) * p
        + (56 * r**3 - 15 * r**2 - 5 * r) / 6
    )


def crossover_rank(n: int, p: int, s: int) -> int:
    """Largest rank r in [1, n] with flops_lkf <= flops_kf, or 0 if none.

    The low-rank cost is strictly increasing in r, so the boundary is found
    by bisection.
    """
    if n < 1 or p < 1 or s < 1:
        raise ValueError(f"n, p, s must be >= 1, got {(n, p, s)}")
    budget = flops_kf(CostQuery(n=n, p=p))

    def affordable(r: int) -> bool:
        return flops_lkf(CostQuery(n=n, p=p, r=r, s=s)) <= budget

    if not affordable(1):
        return 0
    lo, hi = 1, n
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if affordable(mid):
            lo = mid
        else:
            hi = mid - 1
    return lo


def boundary_curve(p: int, s: int, n_grid: Sequence[int] | Iterable[int]) -> list[BoundaryPoint]:
    """Tabulate the crossover rank over a grid of state dimensions.

    ``flops_lkf_at_rstar`` is NaN on grid points where even rank 1 is more
    expensive than the full filter.
    """
    grid = list(n_grid)
    if not grid:
        raise ValueError("grid of state dimensions must be nonempty")
    points = []
    for n in grid:
        r_star = crossover_rank(n, p, s)
        cost_kf = flops_kf(CostQuery(n=n, p=p))
        cost_lkf = (
            flops_lkf(CostQuery(n=n, p=p, r=r_star, s=s)) if r_star >= 1 else float("nan")
        )
        points.append(BoundaryPoint(n=n, r_star=r_star, flops_kf=cost_kf, flops_lkf_at_rstar=cost_lkf))
    return points
