"""Group-parameter selection for an IGC(3x3) + GC(1x1) block.

The per-location cost ``A*L*M/g1 + N*L/g2`` is minimised over divisor pairs
subject to the full-channel-receptive-field rule ``g1 * g2 <= L``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConstraintError

# (M, L, N) -> (g1, g2) for A = 9
TABLE1_ROWS: tuple[tuple[tuple[int, int, int], tuple[int, int]], ...] = (
    ((32, 32, 64), (16, 2)),
    ((64, 64, 128), (16, 4)),
    ((128, 128, 256), (32, 4)),
    ((256, 256, 512), (32, 8)),
    ((512, 512, 1024), (64, 8)),
    ((64, 64, 64), (32, 2)),
    ((128, 128, 128), (32, 4)),
    ((256, 256, 256), (64, 4)),
    ((512, 512, 512), (64, 8)),
    ((1024, 1024, 1024), (128, 8)),
)


@dataclass(frozen=True)
class CostQuery:
    M: int
    L: int
    N: int
    A: int = 9

    def __post_init__(self) -> None:
        for name in ("M", "L", "N", "A"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ConstraintError(f"{name} must be a positive integer, got {v!r}")


@dataclass(frozen=True)
class CostResult:
    g1: int
    g2: int
    cost: int


def divisors(n: int) -> list[int]:
    small, large = [], []
    for d in range(1, math.isqrt(n) + 1):
        if n % d == 0:
            small.append(d)
            if d * d != n:
                large.append(n // d)
    return small + large[::-1]


def check_constraints(q: CostQuery, g1: int, g2: int, require_fcrf: bool = True) -> None:
    if not 1 <= g1 <= min(q.M, q.L):
        raise ConstraintError(f"g1={g1} outside [1, min(M, L)={min(q.M, q.L)}]")
    if not 1 <= g2 <= min(q.L, q.N):
        raise ConstraintError(f"g2={g2} outside [1, min(L, N)={min(q.L, q.N)}]")
    if q.M % g1 or q.L % g1:
        raise ConstraintError(f"g1={g1} must divide M={q.M} and L={q.L}")
    if q.L % g2 or q.N % g2:
        raise ConstraintError(f"g2={g2} must divide L={q.L} and N={q.N}")
    if require_fcrf and g1 * g2 > q.L:
        raise ConstraintError(f"g1*g2={g1 * g2} exceeds L={q.L}; the block would lose FCRF")


def cost(q: CostQuery, g1: int, g2: int) -> int:
    check_constraints(q, g1, g2)
    return _cost(q, g1, g2)


def _cost(q: CostQuery, g1: int, g2: int) -> int:
    return q.A * q.L * q.M // g1 + q.N * q.L // g2


def feasible_pairs(q: CostQuery, require_fcrf: bool = True) -> list[tuple[int, int]]:
    """All admissible (g1, g2) in lexicographic order."""
    g1s = divisors(math.gcd(q.M, q.L))
    g2s = divisors(math.gcd(q.L, q.N))
    return [(a, b) for a in g1s for b in g2s if not require_fcrf or a * b <= q.L]


def minimize_cost(q: CostQuery, require_fcrf: bool = True) -> CostResult:
    """Exhaustive search; ties go to the lexicographically smallest pair.

    ``require_fcrf=False`` drops the ``g1*g2 <= L`` constraint, which is only
    useful as a lower bound for comparison.
    """
    best = None
    for g1, g2 in feasible_pairs(q, require_fcrf):
        c = _cost(q, g1, g2)
        if best is None or c < best.cost:
            best = CostResult(g1, g2, c)
    if best is None:
        raise ConstraintError(f"no feasible (g1, g2) for {q}")
    return best


def table1(area: int = 9) -> list[CostResult]:
    return [minimize_cost(CostQuery(m, l, n, area)) for (m, l, n), _ in TABLE1_ROWS]


def fixed_g2_policy(q: CostQuery, g2_fixed: int) -> CostResult:
    """Best g1 with g2 pinned, as used for every block of the network."""
    if g2_fixed < 1 or q.L % g2_fixed or q.N % g2_fixed or g2_fixed > min(q.L, q.N):
        raise ConstraintError(f"g2={g2_fixed} must divide L={q.L} and N={q.N}")
    best = None
    for g1 in divisors(math.gcd(q.M, q.L)):
        if g1 * g2_fixed > q.L:
            break
        c = _cost(q, g1, g2_fixed)
        if best is None or c < best.cost:
            best = CostResult(g1, g2_fixed, c)
    assert best is not None  # g1 = 1 is always admissible here
    return best
