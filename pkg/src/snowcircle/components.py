"""Set-level helpers on grid samples: delta-components, symmetry centres, containment.

Sets are sorted ``int64`` arrays of grid indices of ``D_L``.  Symmetry
centres are measured in units of ``2**-(L+1)`` so that midpoints of grid
points stay integral.
"""
from __future__ import annotations

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .dyadic import point_level


def components_units(indices: np.ndarray, D: np.ndarray, delta: int) -> list[np.ndarray]:
    """Delta-components of ``indices`` (pairs at distance ``<= delta`` are joined), ordered by leftmost point."""
    idx = np.unique(np.asarray(indices, dtype=np.int64))
    if idx.size == 0:
        return []
    if idx.size == 1:
        return [idx]
    sub = D[np.ix_(idx, idx)] <= delta
    if sub.all():
        return [idx]
    rows, cols = np.nonzero(np.triu(sub, 1))
    graph = coo_matrix((np.ones(rows.size, dtype=np.int8), (rows, cols)), shape=(idx.size, idx.size))
    count, labels = connected_components(graph, directed=False)
    parts = [idx[labels == c] for c in range(count)]
    parts.sort(key=lambda p: int(p[0]))
    return parts


def hull(V: np.ndarray, period: int, circle: bool) -> tuple[int, int]:
    """Start and length (in grid steps) of the shortest arc containing ``V``."""
    if not circle or V.size == 1:
        return int(V[0]), int(V[-1] - V[0])
    gaps = np.diff(np.append(V, V[0] + period))
    k = int(np.argmax(gaps))
    return int(V[(k + 1) % V.size]), int(period - gaps[k])


def symmetry_centres(V: np.ndarray, L: int, circle: bool) -> list[int]:
    """Centres ``c`` (units ``2**-(L+1)``) whose reflection maps ``V`` onto itself.

    On the circle a reflection fixes two antipodal points.  When ``V`` spans
    less than half the circle only the centre inside its hull is reported;
    otherwise both are.
    """
    V = np.asarray(V, dtype=np.int64)
    N = 1 << L
    if V.size == 0:
        return []
    if not circle:
        s = int(V[0] + V[-1])
        return [s] if np.array_equal(np.sort(s - V), V) else []
    start, length = hull(V, N, circle)
    if 2 * length < N:
        s = (2 * start + length) % (2 * N)
        reflected = np.sort((s - V) % N)
        return [s] if np.array_equal(reflected, V) else []
    member = np.zeros(N, dtype=bool)
    member[V] = True
    found = []
    for v in V:
        r = int(V[0] + v) % N
        if member[(r - V) % N].all():
            found.extend([r, r + N])
    return sorted(set(found))


def centre_levels(centres: list[int], L: int) -> list[int]:
    """Dyadic level of each centre given in units of ``2**-(L+1)``."""
    period = 1 << (L + 1)
    return [int(point_level(c % period, L + 1)) for c in centres]


def containing_intervals(V: np.ndarray, n: int, L: int, circle: bool) -> list[int]:
    """Indices ``i`` of level-``n`` intervals containing every point of ``V``."""
    s = 1 << (L - n)
    N = 1 << L
    count = 1 << n
    first = int(V[0])
    cands = {min(first // s, count - 1)}
    if first % s == 0:
        cands.add((first // s - 1) % count if circle else first // s - 1)
    found = []
    for i in sorted(c for c in cands if 0 <= c < count):
        off = V - i * s
        if circle:
            off %= N
            # the root interval of the circle covers everything
            ok = n == 0 or bool((off <= s).all())
        else:
            ok = bool(((off >= 0) & (off <= s)).all())
        if ok:
            found.append(i)
    return found


def adjacent_pair_level(V: np.ndarray, L: int, circle: bool) -> int | None:
    """Level ``m`` if ``V`` is exactly the sample of two adjacent level-``m`` intervals."""
    size = V.size
    if size < 3 or (size - 1) % 2:
        return None
    half = (size - 1) // 2
    if half & (half - 1):
        return None
    m = L - (half.bit_length() - 1)
    if m < 1:
        return None
    N = 1 << L
    start, length = hull(V, N, circle)
    if length != size - 1 or start % half:
        return None
    if not circle and start + length > N:
        return None
    return m


def level_of(units, L: int):
    return point_level(units, L)
