"""Exact chain metrics ``d_Delta`` and ``d_n`` on the dyadic grid ``D_L``.

All quantities are integers in units of ``2**-L``; every value of ``delta`` on
intervals of level ``<= L`` is a multiple of that unit.

The engine rests on two structural facts about chains of dyadic intervals
joining ``x`` and ``y``:

* only intervals of level ``<= L`` matter for points of ``D_L``, because a
  family of deeper intervals tiling a level-``L`` interval never costs less
  than the interval itself (children values are at least half the parent);
* let ``J`` be the smallest dyadic interval containing both points, with
  children ``J'`` holding ``x`` and ``J''`` holding ``y``.  A cheapest chain is
  either ``[J]`` or passes through the midpoint of ``J`` and stays inside the
  two children.  On the circle the root also allows passage through ``0``.

Writing ``R_K(x)`` for the cheapest chain inside ``K`` covering ``x`` up to the
right endpoint of ``K`` (and ``L_K`` for the left one) this gives::

    d(x, y) = min(delta(J), R_J'(x) + L_J''(y))
    R_K(x)  = min(delta(K), R_K'(x) + delta(K''))   for x in K'
    R_K(x)  = min(delta(K), R_K''(x))                for x in K''

Single queries descend the tree in ``O(L)`` steps; :meth:`MetricIndex.matrix`
evaluates the recursion bottom-up for all pairs at once in ``O(4**L)``.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .dyadic import (ARC, CIRCLE, Dyadic, DyadicInterval, DyadicPoint, Topology,
                     from_units, grid_size, to_units)
from .rules import DiameterRule, RuleError, max_depth

Chain = list[DyadicInterval]


@dataclass(frozen=True)
class MetricKind:
    """``full`` (``truncation is None``) or ``truncated(n)``."""

    truncation: int | None = None

    @classmethod
    def full(cls) -> "MetricKind":
        return cls(None)

    @classmethod
    def truncated(cls, n: int) -> "MetricKind":
        if n < 0:
            raise ValueError("truncation level must be nonnegative")
        return cls(n)

    @classmethod
    def parse(cls, text: str) -> "MetricKind":
        text = text.strip()
        if text == "full":
            return cls.full()
        if text.startswith("trunc:"):
            try:
                return cls.truncated(int(text[6:]))
            except ValueError:
                pass
        raise ValueError(f"metric must be 'full' or 'trunc:N', got {text!r}")

    @property
    def is_full(self) -> bool:
        return self.truncation is None

    def __str__(self):
        return "full" if self.truncation is None else f"trunc:{self.truncation}"


FULL = MetricKind.full()


def _as_kind(kind) -> MetricKind:
    if kind is None:
        return FULL
    if isinstance(kind, MetricKind):
        return kind
    if isinstance(kind, int):
        return MetricKind.truncated(kind)
    return MetricKind.parse(kind)


@dataclass(frozen=True)
class SubarcDiameter:
    value: Dyadic
    side: str  # "forward", "backward", "tie" or "arc"


@dataclass(frozen=True)
class TurningConstant:
    ratio: Fraction
    witness: tuple[DyadicPoint, DyadicPoint]
    subarc: Dyadic
    distance: Dyadic


class MetricIndex:
    """Exact distance oracle for one rule, grid depth and metric kind."""

    def __init__(self, rule: DiameterRule, depth: int, kind: MetricKind | str | int | None = None):
        if depth < 1:
            raise RuleError("grid depth must be at least 1")
        if depth > max_depth():
            raise RuleError(f"depth {depth} exceeds the configured maximum {max_depth()}")
        self.rule = rule
        self.depth = depth
        self.kind = _as_kind(kind)
        self.topology = rule.topology
        self.circle = self.topology is CIRCLE
        self.period = 1 << depth
        # weights[m][i] = delta (or delta_n) of interval (m, i) in units of 2**-L
        self.weights = tuple(
            np.left_shift(np.int64(1), depth - rule.truncated_exponents(self.kind.truncation, m))
            for m in range(depth + 1)
        )

    # sizes and edges

    @property
    def vertex_count(self) -> int:
        return grid_size(self.depth, self.topology)

    @property
    def edge_count(self) -> int:
        return (1 << (self.depth + 1)) - 1

    def edges(self) -> Iterable[tuple[DyadicInterval, DyadicPoint, DyadicPoint, Dyadic]]:
        """Endpoint-graph edges: one per interval of level ``<= L``."""
        for m, w in enumerate(self.weights):
            for i, units in enumerate(w):
                iv = DyadicInterval(m, i)
                a, b = iv.endpoints(self.topology)
                yield iv, a, b, Dyadic.from_units(int(units), self.depth)

    def weight(self, interval: DyadicInterval) -> Dyadic:
        return Dyadic.from_units(int(self.weights[interval.level][interval.index]), self.depth)

    # point conversion

    def index_of(self, p: DyadicPoint) -> int:
        if p.level > self.depth:
            raise ValueError(f"point {p} is not representable at depth {self.depth}")
        return to_units(p, self.depth, self.topology)

    def point_of(self, k: int) -> DyadicPoint:
        return from_units(int(k), self.depth, self.topology)

    def points(self) -> list[DyadicPoint]:
        return [self.point_of(k) for k in range(self.vertex_count)]

    def to_dyadic(self, units) -> Dyadic:
        return Dyadic.from_units(int(units), self.depth)

    # single-pair recursion

    def _right_cost(self, m: int, i: int, x: int) -> int:
        """Cheapest chain inside (m, i) covering x up to the right endpoint."""
        w = self.weights
        L = self.depth
        s = 1 << (L - m)
        a, b = i * s, (i + 1) * s
        if x == b:
            return 0
        if x == a:
            return int(w[m][i])
        c = a + s // 2
        if x <= c:
            return min(int(w[m][i]), self._right_cost(m + 1, 2 * i, x) + int(w[m + 1][2 * i + 1]))
        return min(int(w[m][i]), self._right_cost(m + 1, 2 * i + 1, x))

    def _left_cost(self, m: int, i: int, y: int) -> int:
        """Cheapest chain inside (m, i) covering the left endpoint up to y."""
        w = self.weights
        L = self.depth
        s = 1 << (L - m)
        a, b = i * s, (i + 1) * s
        if y == a:
            return 0
        if y == b:
            return int(w[m][i])
        c = a + s // 2
        if y >= c:
            return min(int(w[m][i]), int(w[m + 1][2 * i]) + self._left_cost(m + 1, 2 * i + 1, y))
        return min(int(w[m][i]), self._left_cost(m + 1, 2 * i, y))

    def _smallest_common(self, x: int, y: int) -> tuple[int, int]:
        """Deepest (m, i) whose unwrapped range contains x < y."""
        for m in range(self.depth, -1, -1):
            s = 1 << (self.depth - m)
            i = x // s
            if y <= (i + 1) * s:
                return m, i
        raise AssertionError("root contains every pair")

    def dist_units(self, x: int, y: int) -> int:
        if x == y:
            return 0
        if x > y:
            x, y = y, x
        m, i = self._smallest_common(x, y)
        w = self.weights
        if m == self.depth:
            return int(w[m][i])
        best = min(int(w[m][i]),
                   self._right_cost(m + 1, 2 * i, x) + self._left_cost(m + 1, 2 * i + 1, y))
        if m == 0 and self.circle:
            best = min(best, self._left_cost(1, 0, x) + self._right_cost(1, 1, y))
        return best

    def dist(self, x: DyadicPoint, y: DyadicPoint) -> Dyadic:
        return self.to_dyadic(self.dist_units(self.index_of(x), self.index_of(y)))

    # chains

    def _right_chain(self, m: int, i: int, x: int) -> Chain:
        w = self.weights
        s = 1 << (self.depth - m)
        a, b = i * s, (i + 1) * s
        if x == b:
            return []
        if x == a:
            return [DyadicInterval(m, i)]
        c = a + s // 2
        if x <= c:
            inner = self._right_cost(m + 1, 2 * i, x) + int(w[m + 1][2 * i + 1])
            if int(w[m][i]) <= inner:
                return [DyadicInterval(m, i)]
            return self._right_chain(m + 1, 2 * i, x) + [DyadicInterval(m + 1, 2 * i + 1)]
        if int(w[m][i]) <= self._right_cost(m + 1, 2 * i + 1, x):
            return [DyadicInterval(m, i)]
        return self._right_chain(m + 1, 2 * i + 1, x)

    def _left_chain(self, m: int, i: int, y: int) -> Chain:
        w = self.weights
        s = 1 << (self.depth - m)
        a, b = i * s, (i + 1) * s
        if y == a:
            return []
        if y == b:
            return [DyadicInterval(m, i)]
        c = a + s // 2
        if y >= c:
            inner = int(w[m + 1][2 * i]) + self._left_cost(m + 1, 2 * i + 1, y)
            if int(w[m][i]) <= inner:
                return [DyadicInterval(m, i)]
            return [DyadicInterval(m + 1, 2 * i)] + self._left_chain(m + 1, 2 * i + 1, y)
        if int(w[m][i]) <= self._left_cost(m + 1, 2 * i, y):
            return [DyadicInterval(m, i)]
        return self._left_chain(m + 1, 2 * i, y)

    def minimal_chain(self, x: DyadicPoint, y: DyadicPoint) -> Chain:
        """A cost-minimal chain joining ``x`` to ``y``, listed from ``x`` towards ``y``.

        Ties prefer fewer intervals, then the chain through the midpoint of the
        smallest common interval over the one through ``0``.
        """
        xi, yi = self.index_of(x), self.index_of(y)
        if xi == yi:
            return []
        swap = xi > yi
        if swap:
            xi, yi = yi, xi
        m, i = self._smallest_common(xi, yi)
        top = DyadicInterval(m, i)
        if m == self.depth:
            chain = [top]
        else:
            left = self._right_chain(m + 1, 2 * i, xi)
            right = self._left_chain(m + 1, 2 * i + 1, yi)
            best, chain = self.dist_units(xi, yi), None
            through_mid = (self._right_cost(m + 1, 2 * i, xi)
                           + self._left_cost(m + 1, 2 * i + 1, yi))
            candidates = []
            if int(self.weights[m][i]) == best:
                candidates.append([top])
            if through_mid == best:
                candidates.append(left + right)
            if m == 0 and self.circle:
                around = self._left_cost(1, 0, xi) + self._right_cost(1, 1, yi)
                if around == best:
                    back = self._left_chain(1, 0, xi)[::-1] + self._right_chain(1, 1, yi)[::-1]
                    candidates.append(back)
            chain = min(candidates, key=len)
        chain = reduce_chain(chain)
        return chain[::-1] if swap else chain

    def chain_cost(self, chain: Sequence[DyadicInterval]) -> Dyadic:
        return self.to_dyadic(sum(int(self.weights[iv.level][iv.index]) for iv in chain))

    # all pairs

    def matrix(self) -> np.ndarray:
        """All-pairs distances in units of ``2**-L`` (read-only, cached)."""
        return self._matrix

    @cached_property
    def _matrix(self) -> np.ndarray:
        D = all_pairs_units(self.weights, self.depth, self.circle)
        D.setflags(write=False)
        return D

    def distances_from(self, x: DyadicPoint) -> np.ndarray:
        return self.matrix()[self.index_of(x)]

    def submatrix(self, indices) -> np.ndarray:
        idx = np.asarray(indices, dtype=np.int64)
        return self.matrix()[np.ix_(idx, idx)]

    # diameters

    def set_diameter(self, points: Iterable[DyadicPoint]) -> Dyadic:
        idx = sorted({self.index_of(p) for p in points})
        if not idx:
            raise ValueError("diameter of an empty set")
        return self.to_dyadic(self.diameter_units(idx))

    def diameter_units(self, indices) -> int:
        idx = np.unique(np.asarray(indices, dtype=np.int64))
        if idx.size == 0:
            raise ValueError("diameter of an empty set")
        if idx.size == 1:
            return 0
        if "_matrix" in self.__dict__ or idx.size > 64:
            return int(self.submatrix(idx).max())
        return max(self.dist_units(int(a), int(b)) for k, a in enumerate(idx) for b in idx[k + 1:])

    @cached_property
    def _arc_diameters(self) -> np.ndarray:
        """``A[i, l]`` = diameter of the grid points ``i, i+1, ..., i+l`` (indices mod period on the circle)."""
        D = self.matrix().astype(np.int64)
        n = self.vertex_count
        span = n if self.circle else n
        A = np.zeros((n, span), dtype=np.int64)
        idx = np.arange(n)
        for length in range(1, span):
            j = idx + length
            if self.circle:
                j = j % n
                prev_right = A[(idx + 1) % n, length - 1]
                A[:, length] = np.maximum(np.maximum(A[:, length - 1], prev_right), D[idx, j])
            else:
                ok = j < n
                jj = np.minimum(j, n - 1)
                prev_right = A[np.minimum(idx + 1, n - 1), length - 1]
                val = np.maximum(np.maximum(A[:, length - 1], prev_right), D[idx, jj])
                A[:, length] = np.where(ok, val, 0)
        return A

    def arc_diameter_units(self, start: int, length: int) -> int:
        return int(self._arc_diameters[start, length])

    def subarc_diameter(self, x: DyadicPoint, y: DyadicPoint) -> SubarcDiameter:
        xi, yi = self.index_of(x), self.index_of(y)
        if xi == yi:
            raise ValueError("subarc needs two distinct points")
        if not self.circle:
            lo, hi = min(xi, yi), max(xi, yi)
            return SubarcDiameter(self.to_dyadic(self.arc_diameter_units(lo, hi - lo)), "arc")
        n = self.period
        fwd = self.arc_diameter_units(xi, (yi - xi) % n)
        bwd = self.arc_diameter_units(yi, (xi - yi) % n)
        if fwd == bwd:
            return SubarcDiameter(self.to_dyadic(fwd), "tie")
        if fwd < bwd:
            return SubarcDiameter(self.to_dyadic(fwd), "forward")
        return SubarcDiameter(self.to_dyadic(bwd), "backward")

    def bounded_turning_constant(self, pairs: Iterable[tuple[DyadicPoint, DyadicPoint]] | None = None
                                 ) -> TurningConstant:
        """Largest ``diam(subarc) / dist`` over the given pairs (default: all pairs of ``D_L``).

        Ties keep the lexicographically first witness.
        """
        D = self.matrix().astype(np.int64)
        A = self._arc_diameters
        n = self.vertex_count
        if pairs is None:
            xi, yi = np.triu_indices(n, 1)
        else:
            pl = [(self.index_of(a), self.index_of(b)) for a, b in pairs]
            pl = [(a, b) if a < b else (b, a) for a, b in pl if a != b]
            if not pl:
                raise ValueError("no distinct pairs to sample")
            xi, yi = (np.array(v, dtype=np.int64) for v in zip(*pl))
        if self.circle:
            sub = np.minimum(A[xi, yi - xi], A[yi, (xi - yi) % n])
        else:
            sub = A[xi, yi - xi]
        dist = D[xi, yi]
        # exact argmax of sub/dist by cross multiplication
        best = 0
        for k in range(1, len(xi)):
            if sub[k] * dist[best] > sub[best] * dist[k]:
                best = k
        ratio = Fraction(int(sub[best]), int(dist[best]))
        return TurningConstant(ratio, (self.point_of(xi[best]), self.point_of(yi[best])),
                               self.to_dyadic(sub[best]), self.to_dyadic(dist[best]))

    # export

    def to_csv(self, stream=None, decimal: bool = False) -> str | None:
        """Distance matrix as CSV with exact fractions (``decimal=True`` adds lossy floats)."""
        out = stream if stream is not None else io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        labels = [str(p) for p in self.points()]
        writer.writerow(["point"] + labels)
        D = self.matrix()
        for k, label in enumerate(labels):
            row = [str(self.to_dyadic(v)) for v in D[k]]
            if decimal:
                row = [f"{float(self.to_dyadic(v)):.12g}" for v in D[k]]
            writer.writerow([label] + row)
        if stream is None:
            return out.getvalue()
        return None


def build_index(rule: DiameterRule, depth: int, kind: MetricKind | str | int | None = None) -> MetricIndex:
    return MetricIndex(rule, depth, kind)


def all_pairs_units(weights: Sequence[np.ndarray], L: int, circle: bool) -> np.ndarray:
    """Bottom-up evaluation of the chain recursion for all pairs of ``D_L``.

    ``weights[m]`` holds the unit weights of the level-``m`` intervals.  Each
    interval keeps ``A[x]`` (cheapest inside cover from its left endpoint to
    ``x``) and ``B[x]`` (from ``x`` to its right endpoint) for its ``s+1`` grid
    points; a parent fills the block of pairs split by its midpoint.
    """
    N = 1 << L
    dtype = np.int32 if L <= 28 else np.int64
    D = np.zeros((N + 1, N + 1), dtype=dtype)
    wL = weights[L].astype(np.int64)
    zero = np.zeros(N, dtype=np.int64)
    A = np.stack([zero, wL], axis=1)
    B = np.stack([wL, zero], axis=1)
    D[np.arange(N), np.arange(N) + 1] = wL
    D[np.arange(N) + 1, np.arange(N)] = wL
    for m in range(L - 1, -1, -1):
        s = 1 << (L - m - 1)
        Al, Ar = A[0::2], A[1::2]
        Bl, Br = B[0::2], B[1::2]
        wl = weights[m + 1][0::2].astype(np.int64)[:, None]
        wr = weights[m + 1][1::2].astype(np.int64)[:, None]
        wp = weights[m].astype(np.int64)[:, None]
        block = np.minimum(Bl[:, :, None] + Ar[:, None, :], wp[:, :, None])
        if m == 0 and circle:
            block = np.minimum(block, Al[:, :, None] + Br[:, None, :])
        starts = np.arange(1 << m) * 2 * s
        rows = starts[:, None] + np.arange(s + 1)[None, :]
        cols = rows + s
        D[rows[:, :, None], cols[:, None, :]] = block
        D[cols[:, None, :], rows[:, :, None]] = block
        A = np.concatenate([np.minimum(Al, wp), np.minimum(wl + Ar, wp)[:, 1:]], axis=1)
        B = np.concatenate([np.minimum(Bl + wr, wp), np.minimum(Br, wp)[:, 1:]], axis=1)
    np.fill_diagonal(D, 0)
    if circle:
        D[:, 0] = np.minimum(D[:, 0], D[:, N])
        D[0, :] = D[:, 0]
        D = np.ascontiguousarray(D[:N, :N])
    return D


# chain combinatorics

def _covers_left(iv: DyadicInterval, L: int) -> tuple[int, int]:
    """Unwrapped endpoints of ``iv`` in units of ``2**-L``."""
    return iv.unit_range(L)


def reduce_chain(chain: Sequence[DyadicInterval]) -> Chain:
    """Drop nested intervals and merge consecutive runs whose union is a dyadic interval.

    Neither step increases cost for diameter functions whose children carry at
    least half of the parent value.
    """
    out: Chain = []
    for iv in chain:
        if any(o.contains(iv) for o in out):
            continue
        out = [o for o in out if not iv.contains(o)]
        out.append(iv)
    changed = True
    while changed:
        changed = False
        for k in range(len(out) - 1):
            a, b = out[k], out[k + 1]
            if a.level == b.level and a.level > 0 and a.index // 2 == b.index // 2 and a.index != b.index:
                out[k:k + 2] = [a.parent()]
                changed = True
                break
    return out


@dataclass(frozen=True)
class MinimalityReport:
    minimal: bool
    violations: tuple[str, ...]

    def __bool__(self):
        return self.minimal


def is_minimal(chain: Sequence[DyadicInterval]) -> MinimalityReport:
    """Pairwise disjoint interiors and no sub-union equal to a dyadic interval."""
    chain = list(chain)
    problems = []
    for j in range(len(chain)):
        for k in range(j + 1, len(chain)):
            a, b = chain[j], chain[k]
            if a.contains(b) or b.contains(a):
                problems.append(f"{a} and {b} share interior points")
    if not problems:
        ancestors = {iv.ancestor(lev) for iv in chain for lev in range(iv.level)}
        for anc in sorted(ancestors, key=lambda v: (v.level, v.index)):
            inside = [iv for iv in chain if anc.contains(iv)]
            if len(inside) >= 2:
                deepest = max(iv.level for iv in inside)
                covered = sum(1 << (deepest - iv.level) for iv in inside)
                if covered == 1 << (deepest - anc.level):
                    labels = ",".join(str(iv) for iv in inside)
                    problems.append(f"{labels} tile {anc}")
    return MinimalityReport(not problems, tuple(problems))


def levels_unimodal(levels: Sequence[int]) -> bool:
    """Strictly decreasing up to a unique minimum (or adjacent pair of minima), strictly increasing after."""
    if not levels:
        return True
    low = min(levels)
    where = [k for k, v in enumerate(levels) if v == low]
    if len(where) > 2 or (len(where) == 2 and where[1] != where[0] + 1):
        return False
    first, last = where[0], where[-1]
    before = levels[:first + 1]
    after = levels[last:]
    return (all(before[k] > before[k + 1] for k in range(len(before) - 1))
            and all(after[k] < after[k + 1] for k in range(len(after) - 1)))


def oriented(chain: Sequence[DyadicInterval], topology: Topology = CIRCLE) -> Chain:
    """The chain listed along the positive orientation (reversed if it runs backwards)."""
    chain = list(chain)
    if len(chain) < 2:
        return chain
    a, b = chain[0], chain[1]
    depth = max(iv.level for iv in chain)
    _, a_right = a.unit_range(depth)
    b_left, _ = b.unit_range(depth)
    period = 1 << depth
    forward = a_right == b_left or (topology is CIRCLE and a_right % period == b_left % period)
    return chain if forward else chain[::-1]


def chain_unimodality_check(chain: Sequence[DyadicInterval], topology: Topology = CIRCLE) -> bool:
    """Level profile of a minimal chain, read along the positive orientation."""
    report = is_minimal(chain)
    if not report:
        raise ValueError("chain is not minimal: " + "; ".join(report.violations))
    return levels_unimodal([iv.level for iv in oriented(chain, topology)])


def is_chain_joining(chain: Sequence[DyadicInterval], x: DyadicPoint, y: DyadicPoint,
                     topology: Topology = CIRCLE) -> bool:
    """Consecutive members share an endpoint, ``x`` lies in the first and ``y`` in the last."""
    if not chain:
        return x == y
    depth = max(max(iv.level for iv in chain), x.level, y.level)
    period = 1 << depth
    circ = Topology.parse(topology) is CIRCLE

    def touches(k, iv):
        lo, hi = iv.unit_range(depth)
        if circ:
            k %= period
            return lo <= k <= hi or (hi == period and k == 0)
        return lo <= k <= hi

    def share(a, b):
        pa = set(a.unit_range(depth))
        pb = set(b.unit_range(depth))
        if circ:
            pa = {p % period for p in pa}
            pb = {p % period for p in pb}
        return bool(pa & pb)

    if not touches(x.units(depth), chain[0]) or not touches(y.units(depth), chain[-1]):
        return False
    return all(share(chain[k], chain[k + 1]) for k in range(len(chain) - 1))


__all__ = [
    "ARC", "CIRCLE", "Chain", "FULL", "MetricIndex", "MetricKind", "MinimalityReport",
    "SubarcDiameter", "TurningConstant", "all_pairs_units", "build_index",
    "chain_unimodality_check", "is_chain_joining", "is_minimal", "levels_unimodal",
    "oriented", "reduce_chain",
]
