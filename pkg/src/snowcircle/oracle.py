"""Exhaustive reference for the chain metric on small grids.

Every minimal chain of intervals with level ``<= B`` is enumerated by depth
first search, a chain being extended one interval at a time along the
positive orientation and abandoned as soon as it stops being minimal.  This
records the cheapest chain covering each arc exactly; a second pass takes the
minimum over arcs containing a given pair.  Nothing here shares code with the
recursion in :mod:`snowcircle.metric`.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .dyadic import CIRCLE, Dyadic, DyadicPoint
from .metric import MetricKind, _as_kind
from .rules import DiameterRule

MAX_BUDGET = 8


class BudgetError(ValueError):
    """Level budget too large for exhaustive search."""


def _merges(chain: list[tuple[int, int]], B: int, period: int, circle: bool) -> bool:
    """Whether the last interval completes a tiling of some dyadic interval.

    ``chain`` holds ``(level, unwrapped_start)`` pairs; only unions involving
    the newest member need checking because older prefixes already passed.
    """
    level, start = chain[-1]
    pos = start % period if circle else start
    for anc_level in range(level - 1, -1, -1):
        size = 1 << (B - anc_level)
        lo = (pos // size) * size
        hi = lo + size
        covered = 0
        for lv, st in chain:
            p = st % period if circle else st
            length = 1 << (B - lv)
            if lo <= p and p + length <= hi:
                covered += length
        if covered == size:
            return True
    return False


def arc_costs(rule: DiameterRule, kind: MetricKind, B: int) -> np.ndarray:
    """``C[p, e]``: cheapest minimal chain whose union is the arc from ``p`` of length ``e`` (units ``2**-B``)."""
    circle = rule.topology is CIRCLE
    N = 1 << B
    weights = [np.left_shift(np.int64(1), B - rule.truncated_exponents(kind.truncation, m))
               for m in range(B + 1)]
    inf = np.iinfo(np.int64).max
    C = np.full((N + 1, N + 1), inf, dtype=np.int64)

    def extend(p: int, cur: int, cost: int, chain: list[tuple[int, int]]):
        limit = p + N
        pos = cur % N if circle else cur
        for lv in range(B + 1):
            length = 1 << (B - lv)
            if pos % length or cur + length > limit:
                continue
            if not circle and pos + length > N:
                continue
            chain.append((lv, cur))
            if not _merges(chain, B, N, circle):
                c = cost + int(weights[lv][pos // length])
                e = cur + length - p
                if c < C[p, e]:
                    C[p, e] = c
                extend(p, cur + length, c, chain)
            chain.pop()

    starts = range(N) if circle else range(N + 1)
    for p in starts:
        extend(p, p, 0, [])
    return C


class BruteForceOracle:
    """All pairwise distances of ``D_A`` (``A <= B``) by exhaustive chain search."""

    def __init__(self, rule: DiameterRule, kind: MetricKind | str | int | None, B: int):
        if B > MAX_BUDGET:
            raise BudgetError(f"level budget {B} exceeds {MAX_BUDGET}")
        if B < 1:
            raise BudgetError("level budget must be at least 1")
        self.rule = rule
        self.kind = _as_kind(kind)
        self.B = B
        self.circle = rule.topology is CIRCLE
        self._G = self._containing_costs(arc_costs(rule, self.kind, B))

    def _containing_costs(self, C: np.ndarray) -> np.ndarray:
        """``G[s, e]``: cheapest arc containing the arc from ``s`` of length ``e``."""
        N = 1 << self.B
        G = C.copy()
        if self.circle:
            G[:, N] = min(int(C[:, N].min()), 1 << self.B)
            for e in range(N - 1, -1, -1):
                s = np.arange(N)
                G[s, e] = np.minimum.reduce([C[s, e], G[(s - 1) % N, e + 1], G[s, e + 1]])
        else:
            for e in range(N - 1, -1, -1):
                for s in range(N + 1 - e):
                    best = C[s, e]
                    if s >= 1:
                        best = min(best, G[s - 1, e + 1])
                    if s + e + 1 <= N:
                        best = min(best, G[s, e + 1])
                    G[s, e] = best
        return G

    def dist_units(self, x: int, y: int) -> int:
        """Distance in units of ``2**-B`` between grid indices of ``D_B``."""
        N = 1 << self.B
        if x == y:
            return 0
        if self.circle:
            return int(min(self._G[x % N, (y - x) % N], self._G[y % N, (x - y) % N]))
        lo, hi = min(x, y), max(x, y)
        return int(self._G[lo, hi - lo])

    def dist(self, x: DyadicPoint, y: DyadicPoint) -> Dyadic:
        return Dyadic.from_units(self.dist_units(x.units(self.B), y.units(self.B)), self.B)


@lru_cache(maxsize=32)
def _cached_oracle(rule_hash: str, rule: DiameterRule, kind: MetricKind, B: int) -> BruteForceOracle:
    return BruteForceOracle(rule, kind, B)


def brute_force_dist(rule: DiameterRule, kind, x: DyadicPoint, y: DyadicPoint, B: int) -> Dyadic:
    """Minimum cost over all minimal chains of level ``<= B`` joining ``x`` and ``y``."""
    kind = _as_kind(kind)
    if max(x.level, y.level) > B:
        raise BudgetError("points must lie in D_B")
    return _cached_oracle(rule.hash, rule, kind, B).dist(x, y)


__all__ = ["BruteForceOracle", "BudgetError", "MAX_BUDGET", "arc_costs", "brute_force_dist"]
