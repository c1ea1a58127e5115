"""Exact dyadic points, intervals and values on the circle [0,1]/{0,1} or the arc [0,1].

Everything here is integer arithmetic.  A point ``k/2**n`` is stored as a
reduced numerator/level pair, an interval ``[i/2**n, (i+1)/2**n]`` as a
level/index pair, and every distance or diameter as a :class:`Dyadic`
``m * 2**-e``.

Bulk code elsewhere works on a fixed grid of *units* ``2**-L``; the helpers
:func:`to_units` and :func:`from_units` convert between the two views.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import total_ordering
from numbers import Rational


class Topology(enum.Enum):
    CIRCLE = "circle"
    ARC = "arc"

    @classmethod
    def parse(cls, value: "str | Topology") -> "Topology":
        if isinstance(value, Topology):
            return value
        try:
            return cls(value)
        except ValueError:
            raise ValueError(f"unknown topology {value!r}") from None


CIRCLE = Topology.CIRCLE
ARC = Topology.ARC


def _trailing_zeros(m: int) -> int:
    return (m & -m).bit_length() - 1


@total_ordering
class Dyadic:
    """Exact nonnegative dyadic rational ``mantissa * 2**-exponent``.

    Normalized so that the exponent is as small as possible (mantissa odd
    unless the value is an integer).  Compares and hashes consistently with
    ``int`` and ``Fraction``.
    """

    __slots__ = ("mantissa", "exponent")

    def __init__(self, mantissa: int = 0, exponent: int = 0):
        if mantissa < 0:
            raise ValueError("Dyadic values are nonnegative")
        if exponent < 0:
            mantissa <<= -exponent
            exponent = 0
        if mantissa == 0:
            exponent = 0
        elif exponent:
            shift = min(_trailing_zeros(mantissa), exponent)
            mantissa >>= shift
            exponent -= shift
        self.mantissa = mantissa
        self.exponent = exponent

    @classmethod
    def from_units(cls, units: int, level: int) -> "Dyadic":
        return cls(int(units), level)

    @classmethod
    def from_fraction(cls, q: "Fraction | int") -> "Dyadic":
        q = Fraction(q)
        den = q.denominator
        if den & (den - 1):
            raise ValueError(f"{q} is not dyadic")
        return cls(q.numerator, den.bit_length() - 1)

    @classmethod
    def parse(cls, text: str) -> "Dyadic":
        return cls.from_fraction(parse_fraction(text))

    @classmethod
    def power(cls, e: int) -> "Dyadic":
        """``2**-e``."""
        return cls(1, e)

    def units(self, level: int) -> int:
        """Value as an integer multiple of ``2**-level`` (must be exact)."""
        if self.exponent > level:
            raise ValueError(f"{self} is not a multiple of 2^-{level}")
        return self.mantissa << (level - self.exponent)

    def to_fraction(self) -> Fraction:
        return Fraction(self.mantissa, 1 << self.exponent)

    def half(self) -> "Dyadic":
        return Dyadic(self.mantissa, self.exponent + 1)

    def double(self) -> "Dyadic":
        return Dyadic(self.mantissa << 1, self.exponent)

    def _coerce(self, other):
        if isinstance(other, Dyadic):
            return other
        if isinstance(other, int):
            return Dyadic(other)
        if isinstance(other, Fraction):
            return Dyadic.from_fraction(other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        e = max(self.exponent, other.exponent)
        return Dyadic(self.units(e) + other.units(e), e)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        e = max(self.exponent, other.exponent)
        return Dyadic(self.units(e) - other.units(e), e)

    def __mul__(self, k):
        if isinstance(k, Dyadic):
            return Dyadic(self.mantissa * k.mantissa, self.exponent + k.exponent)
        if isinstance(k, int):
            return Dyadic(self.mantissa * k, self.exponent)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other) -> Fraction:
        return self.to_fraction() / Fraction(other.to_fraction() if isinstance(other, Dyadic) else other)

    def __eq__(self, other):
        if isinstance(other, Dyadic):
            return self.mantissa == other.mantissa and self.exponent == other.exponent
        if isinstance(other, Rational):
            return self.to_fraction() == other
        return NotImplemented

    def __lt__(self, other):
        if isinstance(other, Dyadic):
            e = max(self.exponent, other.exponent)
            return self.units(e) < other.units(e)
        if isinstance(other, Rational):
            return self.to_fraction() < other
        return NotImplemented

    def __hash__(self):
        return hash(self.to_fraction())

    def __bool__(self):
        return self.mantissa != 0

    def __float__(self):
        return self.mantissa / (1 << self.exponent)

    def __repr__(self):
        return f"Dyadic({self})"

    def __str__(self):
        if self.exponent == 0:
            return str(self.mantissa)
        return f"{self.mantissa}/{1 << self.exponent}"


_FRACTION_RE = re.compile(r"^\s*(\d+)\s*(?:/\s*(?:(\d+)|2\^(\d+)))?\s*$")


def parse_fraction(text: str) -> Fraction:
    """Parse ``"3/8"``, ``"3/2^3"`` or ``"1"``; decimals are rejected."""
    m = _FRACTION_RE.match(text)
    if not m:
        raise ValueError(f"not an exact rational: {text!r}")
    num = int(m.group(1))
    if m.group(2) is not None:
        den = int(m.group(2))
    elif m.group(3) is not None:
        den = 1 << int(m.group(3))
    else:
        den = 1
    if den == 0:
        raise ValueError(f"zero denominator in {text!r}")
    return Fraction(num, den)


def format_fraction(q: Fraction) -> str:
    return str(Fraction(q))


@dataclass(frozen=True, order=False)
class DyadicPoint:
    """The point ``numerator / 2**level``, kept in lowest terms."""

    numerator: int
    level: int

    def __post_init__(self):
        if self.level < 0 or self.numerator < 0:
            raise ValueError(f"invalid dyadic point {self.numerator}/2^{self.level}")
        if self.numerator > (1 << self.level):
            raise ValueError(f"numerator out of range: {self.numerator}/2^{self.level}")
        num, lev = self.numerator, self.level
        if num == 0:
            lev = 0
        elif lev:
            shift = min(_trailing_zeros(num), lev)
            num >>= shift
            lev -= shift
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "level", lev)

    @classmethod
    def parse(cls, text: str) -> "DyadicPoint":
        q = parse_fraction(text)
        if not 0 <= q <= 1:
            raise ValueError(f"point {text!r} outside [0,1]")
        d = Dyadic.from_fraction(q)
        return cls(d.mantissa, d.exponent)

    @property
    def value(self) -> Fraction:
        return Fraction(self.numerator, 1 << self.level)

    def units(self, level: int) -> int:
        if self.level > level:
            raise ValueError(f"{self} is not in D_{level}")
        return self.numerator << (level - self.level)

    def __lt__(self, other: "DyadicPoint") -> bool:
        return self.value < other.value

    def __str__(self):
        if self.level == 0:
            return str(self.numerator)
        return f"{self.numerator}/{1 << self.level}"


@dataclass(frozen=True)
class DyadicInterval:
    """The closed interval ``[index/2**level, (index+1)/2**level]``."""

    level: int
    index: int

    def __post_init__(self):
        if self.level < 0 or not 0 <= self.index < (1 << self.level):
            raise ValueError(f"invalid dyadic interval {self.level}:{self.index}")

    @classmethod
    def parse(cls, text: str) -> "DyadicInterval":
        try:
            level, index = text.split(":")
            return cls(int(level), int(index))
        except ValueError:
            raise ValueError(f"bad interval label {text!r}") from None

    @property
    def left(self) -> DyadicPoint:
        return DyadicPoint(self.index, self.level)

    @property
    def right(self) -> DyadicPoint:
        return DyadicPoint(self.index + 1, self.level)

    def endpoints(self, topology: Topology = CIRCLE) -> tuple[DyadicPoint, DyadicPoint]:
        return canonicalize(self.left, topology), canonicalize(self.right, topology)

    @property
    def length(self) -> Dyadic:
        return Dyadic.power(self.level)

    def children(self) -> tuple["DyadicInterval", "DyadicInterval"]:
        return children(self)

    def parent(self) -> "DyadicInterval":
        return parent(self)

    def ancestor(self, level: int) -> "DyadicInterval":
        if level > self.level:
            raise ValueError("ancestor must be at a coarser level")
        return DyadicInterval(level, self.index >> (self.level - level))

    def contains(self, other: "DyadicInterval") -> bool:
        return other.level >= self.level and other.index >> (other.level - self.level) == self.index

    def unit_range(self, level: int) -> tuple[int, int]:
        """Endpoints in units of ``2**-level`` (unwrapped, so right may equal 2**level)."""
        s = 1 << (level - self.level)
        return self.index * s, (self.index + 1) * s

    def __str__(self):
        return f"{self.level}:{self.index}"


ROOT = DyadicInterval(0, 0)


def canonicalize(p: DyadicPoint, t: Topology = CIRCLE) -> DyadicPoint:
    """Canonical representative of ``p``; on the circle the point 1 becomes 0."""
    t = Topology.parse(t)
    if p.numerator > (1 << p.level):
        raise ValueError(f"numerator out of range: {p}")
    if t is CIRCLE and p.numerator == 1 << p.level:
        return DyadicPoint(0, 0)
    return DyadicPoint(p.numerator, p.level)


def children(interval: DyadicInterval) -> tuple[DyadicInterval, DyadicInterval]:
    n, i = interval.level, interval.index
    return DyadicInterval(n + 1, 2 * i), DyadicInterval(n + 1, 2 * i + 1)


def parent(interval: DyadicInterval) -> DyadicInterval:
    if interval.level == 0:
        raise ValueError("the root interval has no parent")
    return DyadicInterval(interval.level - 1, interval.index >> 1)


def containing_interval(p: DyadicPoint, n: int, t: Topology = CIRCLE,
                        both: bool = False):
    """A level-``n`` interval containing ``p``.

    When ``p`` is a shared endpoint the interval starting at ``p`` is returned
    (left-closed convention), or the one ending at ``p`` on the arc at 1.
    With ``both=True`` a tuple of every containing interval is returned,
    sorted by index.
    """
    t = Topology.parse(t)
    p = canonicalize(p, t)
    count = 1 << n
    if p.level > n:
        found = [DyadicInterval(n, p.numerator >> (p.level - n))]
    else:
        k = p.units(n)
        found = []
        if k < count:
            found.append(DyadicInterval(n, k))
        if k > 0:
            found.append(DyadicInterval(n, k - 1))
        elif t is CIRCLE:
            found.append(DyadicInterval(n, count - 1))
        found = sorted(set(found), key=lambda iv: iv.index)
    if both:
        return tuple(found)
    if p.level > n:
        return found[0]
    k = p.units(n)
    return DyadicInterval(n, k) if k < count else DyadicInterval(n, count - 1)


def arclength(x: DyadicPoint, y: DyadicPoint, t: Topology = CIRCLE) -> Dyadic:
    """Normalized length distance: ``min(|x-y|, 1-|x-y|)`` on the circle, ``|x-y|`` on the arc."""
    t = Topology.parse(t)
    level = max(x.level, y.level)
    gap = abs(x.units(level) - y.units(level))
    if t is CIRCLE:
        gap = min(gap, (1 << level) - gap)
    return Dyadic(gap, level)


def to_units(p: DyadicPoint, level: int, t: Topology = CIRCLE) -> int:
    """Grid index of ``p`` on ``D_level`` (circle indices wrap 1 to 0)."""
    k = p.units(level)
    if Topology.parse(t) is CIRCLE:
        k %= 1 << level
    return k


def from_units(k: int, level: int, t: Topology = CIRCLE) -> DyadicPoint:
    if Topology.parse(t) is CIRCLE:
        k %= 1 << level
    return DyadicPoint(int(k), level)


def grid_size(level: int, t: Topology = CIRCLE) -> int:
    """Number of points of ``D_level``: ``2**level`` on the circle, one more on the arc."""
    return (1 << level) + (Topology.parse(t) is ARC)


def point_level(units, level: int):
    """Dyadic level of grid points given in units of ``2**-level`` (works on numpy arrays)."""
    import numpy as np

    k = np.asarray(units, dtype=np.int64)
    low = k & -k
    tz = np.zeros_like(k)
    nz = k != 0
    tz[nz] = np.log2(low[nz]).astype(np.int64)
    out = np.where(nz, level - np.minimum(tz, level), 0)
    return out if out.ndim else int(out)
