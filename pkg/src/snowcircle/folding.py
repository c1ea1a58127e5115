"""Folding maps ``f_n``, their compositions ``F_{m,n}`` and the limit maps ``F_m``.

On a level-``n`` interval whose children keep the parent value, ``f_n`` is the
three-piece tent map below (``I = [a, a+h]``, ``t = x - a``); on intervals whose
children halve it is the identity::

    a + 2t            for 8t <= 3h
    a + 3h/2 - 2t     for 3h <= 8t <= 5h
    a + 2t - h        for 8t >= 5h

Slopes are ``+-2`` and every breakpoint is dyadic, so ``f_n`` maps ``D_k`` into
``D_k`` for ``k > n`` and fixes ``D_n``.  The grid functions work on integer
units of ``2**-L`` and return index arrays that compose by fancy indexing.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .dyadic import CIRCLE, Dyadic, DyadicInterval, DyadicPoint, Topology, grid_size
from .rules import DiameterRule


def tent_units(t, h):
    """Three-piece fold of ``[0, h]`` in integer units (``h`` even)."""
    t = np.asarray(t, dtype=np.int64)
    return np.where(8 * t <= 3 * h, 2 * t,
                    np.where(8 * t <= 5 * h, 3 * h // 2 - 2 * t, 2 * t - h))


def _six_piece_units(t: int, h: int) -> int:
    """Fold of ``[0, h]`` built piece by piece from the six sub-interval assignments (``h`` divisible by 8).

    Each piece is the affine map sending a sub-interval onto its target, in
    the stated orientation.
    """
    pieces = [
        ((0, h // 4), (0, h // 2), True),
        ((h // 4, 3 * h // 8), (h // 2, 3 * h // 4), True),
        ((3 * h // 8, h // 2), (h // 2, 3 * h // 4), False),
        ((h // 2, 5 * h // 8), (h // 4, h // 2), False),
        ((5 * h // 8, 3 * h // 4), (h // 4, h // 2), True),
        ((3 * h // 4, h), (h // 2, h), True),
    ]
    values = set()
    for (lo, hi), (tlo, thi), preserving in pieces:
        if lo <= t <= hi:
            frac = Fraction(t - lo, hi - lo)
            if not preserving:
                frac = 1 - frac
            values.add(tlo + frac * (thi - tlo))
    if len(values) != 1:
        raise AssertionError(f"six-piece fold is not single valued at {t}/{h}")
    (value,) = values
    return int(value)


def _self_test(level: int = 6) -> None:
    h = 1 << level
    tent = tent_units(np.arange(h + 1), h)
    for t in range(h + 1):
        if _six_piece_units(t, h) != int(tent[t]):
            raise AssertionError(f"tent and six-piece folds differ at {t}/{h}")


_self_test()


@dataclass(frozen=True)
class FoldSpec:
    """The map ``f_n`` of a rule: fold on kept level-``n`` intervals, identity elsewhere."""

    rule: DiameterRule
    n: int

    @property
    def topology(self) -> Topology:
        return self.rule.topology

    def folds(self, interval: DyadicInterval) -> bool:
        if interval.level != self.n:
            raise ValueError(f"{interval} is not a level-{self.n} interval")
        return self.rule.keep_at(interval)

    @property
    def modes(self) -> dict[DyadicInterval, str]:
        mask = self.rule.keep_mask(self.n)
        return {DyadicInterval(self.n, i): ("fold" if k else "identity") for i, k in enumerate(mask)}


def _home(q: Fraction, n: int) -> tuple[int, Fraction]:
    """Index of the level-``n`` interval containing ``q`` (left-closed, last interval closed) and its left end."""
    count = 1 << n
    i = min(int(q * count), count - 1)
    return i, Fraction(i, count)


def _to_point(q: Fraction, t: Topology) -> DyadicPoint:
    d = Dyadic.from_fraction(q)
    p = DyadicPoint(d.mantissa, d.exponent)
    if t is CIRCLE and p.numerator == 1 << p.level:
        return DyadicPoint(0, 0)
    return p


def fold_eval(spec: FoldSpec, x: DyadicPoint) -> DyadicPoint:
    """``f_n(x)`` exactly."""
    q = x.value
    i, a = _home(q, spec.n)
    if not spec.rule.keep_mask(spec.n)[i]:
        return _to_point(q, spec.topology)
    h = Fraction(1, 1 << spec.n)
    t = q - a
    if 8 * t <= 3 * h:
        y = a + 2 * t
    elif 8 * t <= 5 * h:
        y = a + Fraction(3, 2) * h - 2 * t
    else:
        y = a + 2 * t - h
    return _to_point(y, spec.topology)


def fold_preimages(spec: FoldSpec, y: DyadicPoint) -> set[DyadicPoint]:
    """All ``x`` with ``f_n(x) = y``, found by solving each affine piece."""
    q = y.value
    count = 1 << spec.n
    h = Fraction(1, count)
    if (q * count).denominator == 1:
        # endpoints of level-n intervals are fixed and have no other preimage
        return {_to_point(q, spec.topology)}
    i, a = _home(q, spec.n)
    if not spec.rule.keep_mask(spec.n)[i]:
        return {_to_point(q, spec.topology)}
    u = q - a
    found = set()
    for t, lo, hi in (
        (u / 2, 0, Fraction(3, 8)),
        ((Fraction(3, 2) * h - u) / 2, Fraction(3, 8), Fraction(5, 8)),
        ((u + h) / 2, Fraction(5, 8), 1),
    ):
        if lo * h <= t <= hi * h:
            found.add(_to_point(a + t, spec.topology))
    return found


def cascade_eval(rule: DiameterRule, m: int, n: int, x: DyadicPoint) -> DyadicPoint:
    """``F_{m,n}(x) = f_m(f_{m+1}(... f_n(x)))``."""
    if m > n:
        raise ValueError("cascade needs m <= n")
    for k in range(n, m - 1, -1):
        if k >= x.level:
            continue  # f_k fixes D_k
        x = fold_eval(FoldSpec(rule, k), x)
    return x


def limit_eval(rule: DiameterRule, m: int, x: DyadicPoint) -> DyadicPoint:
    """``F_m(x)``: the cascade stabilizes once it reaches the level of ``x``."""
    k = x.level
    if k <= m:
        return x
    return cascade_eval(rule, m, k - 1, x)


def interval_image(spec: FoldSpec, interval: DyadicInterval) -> tuple[DyadicInterval, ...]:
    """``f_n`` of a level-``n+1`` interval: itself, or itself with the adjacent quarter of its parent."""
    if interval.level != spec.n + 1:
        raise ValueError(f"{interval} is not a level-{spec.n + 1} interval")
    parent = interval.parent()
    if not spec.folds(parent):
        return (interval,)
    if interval.index % 2 == 0:
        # left half also covers the third quarter of the parent
        neighbour = DyadicInterval(spec.n + 2, 4 * parent.index + 2)
        return (interval, neighbour)
    neighbour = DyadicInterval(spec.n + 2, 4 * parent.index + 1)
    return (neighbour, interval)


def real_coordinate(x: DyadicPoint, t: Topology = CIRCLE) -> Dyadic:
    """Map to the line: distance to ``0`` along the circle, or the coordinate itself on the arc."""
    q = x.value
    if Topology.parse(t) is CIRCLE:
        q = min(q, 1 - q)
    return Dyadic.from_fraction(q)


# grid versions (units of 2**-L)

def fold_grid(rule: DiameterRule, n: int, L: int) -> np.ndarray:
    """``f_n`` on the grid ``D_L`` as an index array."""
    size = grid_size(L, rule.topology)
    x = np.arange(size, dtype=np.int64)
    if n >= L:
        return x
    h = 1 << (L - n)
    i = np.minimum(x // h, (1 << n) - 1)
    a = i * h
    keep = rule.keep_mask(n)[i]
    y = np.where(keep, a + tent_units(x - a, h), x)
    if rule.topology is CIRCLE:
        y %= 1 << L
    return y


def cascade_grid(rule: DiameterRule, m: int, n: int, L: int) -> np.ndarray:
    """``F_{m,n}`` on ``D_L``; the identity when ``m > n``."""
    g = np.arange(grid_size(L, rule.topology), dtype=np.int64)
    for k in range(min(n, L - 1), m - 1, -1):
        if k < rule.depth and rule.keeps[k].any():
            g = fold_grid(rule, k, L)[g]
    return g


def cascade_table(rule: DiameterRule, L: int) -> list[np.ndarray]:
    """``T[n] = F_n`` on ``D_L`` for ``n = 0..L`` (``T[L]`` is the identity)."""
    size = grid_size(L, rule.topology)
    table = [np.arange(size, dtype=np.int64)]
    for k in range(L - 1, -1, -1):
        prev = table[-1]
        if k < rule.depth and rule.keeps[k].any():
            prev = fold_grid(rule, k, L)[prev]
        table.append(prev)
    return table[::-1]


def limit_grid(rule: DiameterRule, m: int, L: int) -> np.ndarray:
    """``F_m`` on ``D_L``."""
    return cascade_grid(rule, m, L - 1, L)


def real_coordinate_grid(L: int, t: Topology = CIRCLE) -> np.ndarray:
    """``g`` on ``D_L`` in units of ``2**-L``."""
    size = grid_size(L, t)
    k = np.arange(size, dtype=np.int64)
    if Topology.parse(t) is CIRCLE:
        return np.minimum(k, (1 << L) - k)
    return k


def grid_preimage(image: np.ndarray, targets) -> np.ndarray:
    """Sorted grid indices whose image lies in ``targets``."""
    mask = np.zeros(int(image.max(initial=0)) + 1, dtype=bool)
    t = np.asarray(list(targets) if not isinstance(targets, np.ndarray) else targets, dtype=np.int64)
    t = t[t < mask.size]
    mask[t] = True
    return np.flatnonzero(mask[image])


__all__ = [
    "FoldSpec", "cascade_eval", "cascade_grid", "cascade_table", "fold_eval", "fold_grid",
    "fold_preimages", "grid_preimage", "interval_image", "limit_eval", "limit_grid",
    "real_coordinate", "real_coordinate_grid", "tent_units",
]
