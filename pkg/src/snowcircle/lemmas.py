"""The lemma suite: one exact check per structural statement about the construction.

Every row reports how many instances were checked and the worst margin
(bound minus observed value, an exact rational; ``0`` for identities).
Metric rows run at a capped depth so that all-pairs checks stay cheap; the
trace rows reuse the verifier sweep at the requested depth.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .components import components_units
from .dyadic import CIRCLE, DyadicInterval, DyadicPoint, grid_size, to_units
from .folding import cascade_grid, cascade_table, fold_grid, limit_grid
from .metric import MetricIndex, chain_unimodality_check, is_chain_joining, is_minimal
from .rules import DiameterRule
from .trace import RuleContext, TargetSet, adjacent_targets
from .verifier import BOUND, enlarge_target, verify_lipschitz_light

LEMMA_ROWS = (
    "minimal-chains", "chain-unimodality", "truncation-ordering", "interval-identity",
    "truncation-convergence", "fold-contraction", "uniform-convergence", "projection",
    "component-projection", "v-nesting", "goal-bound", "big-set-bound", "case-trichotomy",
    "no-symmetry-propagation", "quarter-symmetry-propagation", "half-symmetry-propagation",
    "final-bound", "scale-reduction",
)

TRACE_ROWS = LEMMA_ROWS[9:17]


@dataclass
class LemmaRow:
    name: str
    instances: int = 0
    failed: int = 0
    worst_margin: Fraction | None = None
    example: str = ""
    note: str = ""

    def add(self, count: int, failed: int = 0, margin: Fraction | None = None, example: str = ""):
        self.instances += int(count)
        self.failed += int(failed)
        if failed and not self.example:
            self.example = example
        if margin is not None and (self.worst_margin is None or margin < self.worst_margin):
            self.worst_margin = Fraction(margin)

    @property
    def status(self) -> str:
        if self.failed:
            return "fail"
        return "pass" if self.instances else "n/a"

    def to_dict(self) -> dict:
        m = self.worst_margin
        return {"name": self.name, "status": self.status, "instances": self.instances,
                "failed": self.failed,
                "worst_margin": None if m is None else (str(m.numerator) if m.denominator == 1 else str(m)),
                "example": self.example, "note": self.note}


def _indices(rule: DiameterRule, L: int, kinds) -> dict:
    return {k: MetricIndex(rule, L, k).matrix().astype(np.int64) for k in kinds}


def _upper(D: np.ndarray) -> np.ndarray:
    return np.triu(np.ones(D.shape, dtype=bool), 1)


# chains

def check_minimal_chains(rule: DiameterRule, L: int = 6) -> tuple[LemmaRow, LemmaRow]:
    """Every reconstructed optimal chain is minimal, joins its points, costs the distance, and is unimodal."""
    idx = MetricIndex(rule, L)
    minimal, unimodal = LemmaRow("minimal-chains"), LemmaRow("chain-unimodality")
    pts = idx.points()
    for a in range(len(pts)):
        for b in range(a + 1, len(pts)):
            x, y = pts[a], pts[b]
            chain = idx.minimal_chain(x, y)
            cost = idx.chain_cost(chain)
            d = idx.dist(x, y)
            ok = bool(is_minimal(chain)) and is_chain_joining(chain, x, y, rule.topology) and cost == d
            minimal.add(1, not ok, Fraction(0), f"{x},{y}: {[str(c) for c in chain]}")
            if ok:
                good = chain_unimodality_check(chain, rule.topology)
                unimodal.add(1, not good, None, f"{x},{y}: levels {[c.level for c in chain]}")
    return minimal, unimodal


# truncated metrics

def check_truncation(rule: DiameterRule, L: int = 8) -> tuple[LemmaRow, LemmaRow]:
    """``d_m <= d_n <= d_Delta`` for ``m <= n <= L`` and ``d_Delta - d_n <= 2 M(n)``."""
    kinds = list(range(L + 1)) + [None]
    D = _indices(rule, L, kinds)
    mask = _upper(D[None])
    order, conv = LemmaRow("truncation-ordering"), LemmaRow("truncation-convergence")
    pairs = int(mask.sum())
    for a, m in enumerate(kinds):
        for n in kinds[a + 1:]:
            diff = (D[n] - D[m])[mask]
            bad = int((diff < 0).sum())
            order.add(pairs, bad, Fraction(int(diff.min()), 1 << L), f"m={m}, n={n}")
    for n in range(L + 1):
        bound = 2 << (L - rule.max_level_exponent(n))
        gap = (D[None] - D[n])[mask]
        bad = int((gap > bound).sum())
        conv.add(pairs, bad, Fraction(bound - int(gap.max()), 1 << L), f"n={n}")
    return order, conv


def check_interval_identity(rule: DiameterRule, L: int = 10) -> LemmaRow:
    """``d_n(a, b) = Delta(I)`` for the endpoints of every ``I`` with ``l(I) <= n``, and for ``d_Delta``.

    The circle root has coincident endpoints and is skipped.
    """
    row = LemmaRow("interval-identity")
    circle = rule.topology is CIRCLE
    period = 1 << L
    for n in list(range(L + 1)) + [None]:
        D = MetricIndex(rule, L, n).matrix()
        top = L if n is None else n
        for m in range(1 if circle else 0, top + 1):
            s = 1 << (L - m)
            i = np.arange(1 << m)
            a, b = i * s, (i + 1) * s
            if circle:
                b = b % period
            want = np.left_shift(np.int64(1), L - rule.exponents(m))
            got = D[a, b].astype(np.int64)
            bad = np.flatnonzero(got != want)
            row.add(i.size, bad.size, Fraction(0),
                    "" if not bad.size else f"n={n}, I={DyadicInterval(m, int(bad[0]))}")
    return row


# folds

def check_fold_contraction(rule: DiameterRule, L: int = 8) -> LemmaRow:
    """``d_n(f_n x, f_n y) <= d_{n+1}(x, y)`` and ``d_m(F_{m,n} x, F_{m,n} y) <= d_{n+1}(x, y)``."""
    row = LemmaRow("fold-contraction")
    D = _indices(rule, L, range(L + 1))
    mask = _upper(D[0])
    pairs = int(mask.sum())
    for n in range(L):
        f = fold_grid(rule, n, L)
        slack = (D[n + 1] - D[n][np.ix_(f, f)])[mask]
        row.add(pairs, int((slack < 0).sum()), Fraction(int(slack.min()), 1 << L), f"f_{n}")
        for m in range(n):
            g = cascade_grid(rule, m, n, L)
            slack = (D[n + 1] - D[m][np.ix_(g, g)])[mask]
            row.add(pairs, int((slack < 0).sum()), Fraction(int(slack.min()), 1 << L), f"F_{m},{n}")
    return row


def check_uniform_convergence(rule: DiameterRule, L: int = 10, m_max: int = 3) -> LemmaRow:
    """``d_m(F_{m,n}(x), F_m(x)) <= 2 M(n)`` for every ``x`` of the grid and ``m <= n <= L``."""
    row = LemmaRow("uniform-convergence")
    for m in range(min(m_max, L) + 1):
        D = MetricIndex(rule, L, m).matrix()
        Fm = limit_grid(rule, m, L)
        for n in range(m, L + 1):
            g = cascade_grid(rule, m, n, L)
            bound = 2 << (L - rule.max_level_exponent(n))
            gap = D[g, Fm].astype(np.int64)
            row.add(gap.size, int((gap > bound).sum()), Fraction(bound - int(gap.max()), 1 << L),
                    f"m={m}, n={n}")
    return row


def working_depth(rule: DiameterRule, L: int) -> int:
    """Depth at which every point of ``D_L`` has ``F_{n+1}``-preimages.

    Each folded level costs one extra grid level, including folded levels that
    lie between ``L`` and the working depth itself, so iterate to the fixed point.
    """
    Lw = L
    while True:
        nxt = L + sum(1 for m in rule.folded_levels if m < Lw)
        if nxt == Lw:
            return Lw
        Lw = nxt


def _union_targets(n_max: int, max_level: int, topology) -> list[tuple[DyadicInterval, ...]]:
    out = []
    for k in range(1, max_level + 1):
        count = 1 << k
        for j in range(count):
            out.append((DyadicInterval(k, j),))
            if topology is CIRCLE or j + 1 < count:
                if k > 1 or topology is not CIRCLE:
                    out.append((DyadicInterval(k, j), DyadicInterval(k, (j + 1) % count)))
    return out


def _mask(intervals, L: int, size: int, circle: bool) -> np.ndarray:
    mask = np.zeros(size, dtype=bool)
    for iv in intervals:
        lo, hi = iv.unit_range(L)
        pts = np.arange(lo, hi + 1)
        mask[pts % (1 << L) if circle else pts] = True
    return mask


def check_projection(rule: DiameterRule, L: int = 8, n_max: int = 4, max_level: int = 4) -> LemmaRow:
    """``F_{n+1}(F_0^{-1}(U)) = F_{0,n}^{-1}(U)`` on the grid, both inclusions.

    ``U`` runs over single intervals and adjacent pairs of levels ``1..max_level``
    (``l(U) <= n`` is not needed).  The left side is computed at the working
    depth, the ``supseteq`` inclusion is checked on ``D_L``.
    """
    row = LemmaRow("projection")
    circle = rule.topology is CIRCLE
    Lw = working_depth(rule, L)
    size = grid_size(Lw, rule.topology)
    scale = 1 << (Lw - L)
    T = cascade_table(rule, Lw)
    coarse = np.arange(grid_size(L, rule.topology)) * scale
    for n in range(n_max + 1):
        F0n = cascade_grid(rule, 0, n, Lw)
        for U in _union_targets(n_max, max_level, rule.topology):
            inU = _mask(U, Lw, size, circle)
            pre0 = np.flatnonzero(inU[T[0]])
            A = np.zeros(size, dtype=bool)
            A[T[n + 1][pre0]] = True
            B = inU[F0n]
            forward = int((A & ~B).sum())
            backward = int((B[coarse] & ~A[coarse]).sum())
            row.add(2, (forward > 0) + (backward > 0), Fraction(0),
                    f"n={n}, U={[str(u) for u in U]}: {forward} extra, {backward} missing")
    row.note = f"working depth {Lw}"
    return row


def check_component_projection(rule: DiameterRule, L: int = 8, n_max: int = 4,
                               M_range: tuple[int, int] = (3, 4)) -> LemmaRow:
    """``F_{m,n} o F_{n+1} = F_m`` on the grid, and ``F_{n+1}`` sends each delta-component of
    ``F_0^{-1}(H)`` (under ``d_Delta``) into one delta-component of ``F_{0,n}^{-1}(H)`` (under ``d_{n+1}``)."""
    row = LemmaRow("component-projection")
    T = cascade_table(rule, L)
    for m in range(L):
        for n in range(m, L):
            lhs = cascade_grid(rule, m, n, L)[T[n + 1]]
            bad = int((lhs != T[m]).sum())
            row.add(lhs.size, bad, Fraction(0), f"semigroup m={m}, n={n}")
    ctx = RuleContext(rule, L)
    D_full = ctx.matrix(None)
    for M in range(M_range[0], min(M_range[1], L - 4) + 1):
        for H in adjacent_targets(M, rule.topology):
            member = np.zeros(ctx.size, dtype=bool)
            member[H.units(L)] = True
            for delta in H.delta_choices(L).values():
                Ws = components_units(np.flatnonzero(member[T[0]]), D_full, delta)
                for n in range(min(n_max, L - 1) + 1):
                    D = ctx.matrix(n + 1)
                    comps = components_units(np.flatnonzero(member[ctx.pullback[n + 1]]), D, delta)
                    owner = np.full(ctx.size, -1)
                    for c, part in enumerate(comps):
                        owner[part] = c
                    for W in Ws:
                        labels = np.unique(owner[T[n + 1][W]])
                        ok = labels.size == 1 and labels[0] >= 0
                        row.add(1, not ok, Fraction(0), f"H={H.labels}, n={n}")
    return row


# scale reduction

def check_scale_reduction(rule: DiameterRule, L: int = 10, M_range: tuple[int, int] = (3, 6)) -> LemmaRow:
    """Arcs ``E`` with ``2**-(M*+1) <= diam_0(E) < 2**-M*`` sit in an adjacent-pair target ``H``;
    the components for ``E`` refine those for ``H`` and obey the component bound; above ``1/8``
    the global bound ``diam_Delta <= 1 <= 8r`` applies."""
    row = LemmaRow("scale-reduction")
    ctx = RuleContext(rule, L)
    D = ctx.matrix(None)
    N = 1 << L
    diam_all = int(D.max())
    row.add(1, diam_all > N, Fraction(N - diam_all, N), "global diameter")
    circle = ctx.circle
    for M in range(M_range[0], min(M_range[1], L - 4) + 1):
        s = 1 << (L - M)
        step = s // 4
        count = 1 << M
        for length in (s // 2, s - 1):
            for a in range(0, N - (0 if circle else length), step):
                E = np.arange(a, a + length + 1)
                if circle:
                    E %= N
                j = a // s
                H = TargetSet(M, (DyadicInterval(M, j), DyadicInterval(M, (j + 1) % count)), rule.topology) \
                    if circle or j + 1 < count else None
                if H is None:
                    continue
                Hu = H.units(L)
                inside = bool(np.isin(E, Hu).all())
                delta = length
                member_E = np.zeros(ctx.size, dtype=bool)
                member_E[E] = True
                member_H = np.zeros(ctx.size, dtype=bool)
                member_H[Hu] = True
                WE = components_units(np.flatnonzero(member_E[ctx.F[0]]), D, delta)
                WH = components_units(np.flatnonzero(member_H[ctx.F[0]]), D, delta)
                owner = np.full(ctx.size, -1)
                for c, part in enumerate(WH):
                    owner[part] = c
                refine = all(np.unique(owner[w]).size == 1 and owner[w[0]] >= 0 for w in WE)
                worst = max((int(D[np.ix_(w, w)].max()) for w in WE if w.size > 1), default=0)
                ok = inside and refine and worst <= BOUND * delta
                row.add(1, not ok, Fraction(BOUND * delta - worst, N),
                        f"M*={M}, E=[{a}, {a + length}]/{N}: inside={inside} refine={refine}")
    # small sets enlarge to arcs of size r that still contain them
    period = 1 << 5
    for gap, r in ((1, Fraction(1, 8)), (1, Fraction(1, 16)), (0, Fraction(1, 32))):
        for a in range(period if circle else period - gap + 1):
            E = [DyadicPoint(a, 5), DyadicPoint((a + gap) % period if circle else a + gap, 5)]
            arc = enlarge_target(E, r, rule.topology)
            pts = set(arc.units(8).tolist())
            ok = all(to_units(p, 8, rule.topology) in pts for p in E) and arc.length == r
            row.add(1, not ok, Fraction(0), f"E={[str(p) for p in E]}, r={r}")
    return row


# the full suite

def run_suite(rule: DiameterRule, depth: int, metric_depth: int = 8,
              mstar: tuple[int, int] | None = None) -> list[LemmaRow]:
    """All 18 rows for one rule; trace rows need ``depth >= 7``."""
    md = min(metric_depth, depth)
    rows: dict[str, LemmaRow] = {}
    rows["minimal-chains"], rows["chain-unimodality"] = check_minimal_chains(rule, min(md, 6))
    rows["truncation-ordering"], rows["truncation-convergence"] = check_truncation(rule, md)
    rows["interval-identity"] = check_interval_identity(rule, min(depth, 10))
    rows["fold-contraction"] = check_fold_contraction(rule, md)
    rows["uniform-convergence"] = check_uniform_convergence(rule, min(depth, 10))
    rows["projection"] = check_projection(rule, min(md, 8))
    rows["component-projection"] = check_component_projection(rule, md)
    if depth >= 7:
        rng = mstar or (3, depth - 4)
        report = verify_lipschitz_light(rule, depth, rng, composite=False)
        for name in TRACE_ROWS:
            c = report.checks[name]
            rows[name] = LemmaRow(name, c.instances, c.failed, c.worst_margin,
                                  c.failures[0] if c.failures else "", c.note)
        rows["scale-reduction"] = check_scale_reduction(rule, depth, (rng[0], min(rng[1], depth - 4)))
    else:
        for name in TRACE_ROWS + ("scale-reduction",):
            rows[name] = LemmaRow(name, note="depth below 7")
    for row in rows.values():
        if row.instances and row.worst_margin is None:
            row.worst_margin = Fraction(0)
    return [rows[name] for name in LEMMA_ROWS]
