"""Pull-back traces ``V_0, V_1, ...`` of a target and the step-by-step lemma checks.

For a target ``H`` (two adjacent level-``M*`` intervals), a scale ``delta`` and a
delta-component ``W`` of ``F_0^{-1}(H)``, the trace is

* ``V_0 = H``;
* ``V_n`` = the delta-component, under ``d_n``, of ``F_{0,n-1}^{-1}(H)`` that
  contains ``F_n(W)``.

Everything is computed on the grid ``D_L``.  Beyond the rule depth every fold
is the identity and ``d_n = d_Delta`` on the grid, so the trace is constant
from there on and ends at ``W`` itself.

Statements whose conclusions talk about two adjacent level-``m`` intervals
need the grid to resolve those intervals at scale ``delta``.  While the trace
stays in that regime ``m <= M* + n``, and the level-``L`` steps inside it have
``d_n``-length at most ``delta`` once ``n <= L - M* - 1``: such steps are called
*resolved*.  Checks whose hypotheses involve unresolved steps are recorded as
not applicable.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property

import numpy as np

from .components import (adjacent_pair_level, centre_levels, components_units,
                         containing_intervals, symmetry_centres)
from .dyadic import CIRCLE, Dyadic, DyadicInterval, Topology, from_units, grid_size
from .folding import cascade_table, fold_grid
from .metric import MetricIndex
from .rules import DiameterRule


class RuleContext:
    """Grid maps and metric matrices of one rule at grid depth ``L``, built on demand."""

    def __init__(self, rule: DiameterRule, L: int):
        self.rule = rule
        self.L = L
        self.circle = rule.topology is CIRCLE
        self.size = grid_size(L, rule.topology)
        self.period = 1 << L
        # trace levels beyond this are copies of the last one
        self.active = min(L, rule.depth)
        self._matrices: dict[int, np.ndarray] = {}

    def kind_level(self, n: int) -> int | None:
        return None if n >= self.rule.depth else n

    def index(self, n: int | None) -> MetricIndex:
        return MetricIndex(self.rule, self.L, None if n is None else self.kind_level(n))

    def matrix(self, n: int | None) -> np.ndarray:
        """``D_n`` on the grid (``n=None`` or ``n >= depth`` gives ``d_Delta``)."""
        key = -1 if n is None or self.kind_level(n) is None else n
        if key not in self._matrices:
            stale = sorted(k for k in self._matrices if k != -1)
            for old in stale[:max(len(stale) - 1, 0)]:
                del self._matrices[old]
            self._matrices[key] = self.index(None if key == -1 else key).matrix()
        return self._matrices[key]

    @cached_property
    def F(self) -> list[np.ndarray]:
        """``F[n] = F_n`` on the grid."""
        return cascade_table(self.rule, self.L)

    @cached_property
    def folds(self) -> list[np.ndarray]:
        return [fold_grid(self.rule, n, self.L) for n in range(self.L + 1)]

    @cached_property
    def pullback(self) -> list[np.ndarray]:
        """``pullback[n] = F_{0,n-1}`` on the grid (identity at ``n = 0``)."""
        out = [np.arange(self.size, dtype=np.int64)]
        for n in range(self.L):
            out.append(out[-1][self.folds[n]])
        return out

    def delta_units(self, level: int, index: int) -> int:
        """``Delta`` of an interval in grid units."""
        return 1 << (self.L - int(self.rule.exponents(level)[index]))

    def max_level_units(self, n: int) -> Fraction:
        """``M(n)`` in grid units (may be fractional for ``n > L``)."""
        return Fraction(1 << self.L, 1 << self.rule.max_level_exponent(n))

    def star_level(self, delta: int) -> int:
        """Least ``n`` with ``M(n) < delta/4``."""
        n = 0
        while self.max_level_units(n) * 4 >= delta:
            n += 1
        return n


@dataclass(frozen=True)
class TargetSet:
    """Two adjacent level-``M*`` intervals (or a single one)."""

    M_star: int
    intervals: tuple[DyadicInterval, ...]
    topology: Topology = CIRCLE

    def __post_init__(self):
        if self.M_star < 3:
            raise ValueError("targets need M* >= 3")
        if not 1 <= len(self.intervals) <= 2 or any(iv.level != self.M_star for iv in self.intervals):
            raise ValueError("a target is one or two level-M* intervals")
        if len(self.intervals) == 2:
            a, b = self.intervals
            count = 1 << self.M_star
            nxt = (a.index + 1) % count if self.topology is CIRCLE else a.index + 1
            if b.index != nxt:
                raise ValueError(f"{a} and {b} are not adjacent")

    @property
    def labels(self) -> list[str]:
        return [str(iv) for iv in self.intervals]

    def units(self, L: int) -> np.ndarray:
        s = 1 << (L - self.M_star)
        start = self.intervals[0].index * s
        pts = start + np.arange(len(self.intervals) * s + 1)
        if self.topology is CIRCLE:
            pts %= 1 << L
        return np.unique(pts)

    def delta_choices(self, L: int) -> dict[str, int]:
        """Extreme admissible scales in grid units: ``2**-(M*+1)`` and ``2**-M* - 2**-L``."""
        return {"low": 1 << (L - self.M_star - 1), "high": (1 << (L - self.M_star)) - 1}


def adjacent_targets(M_star: int, topology: Topology = CIRCLE) -> list[TargetSet]:
    count = 1 << M_star
    pairs = range(count) if topology is CIRCLE else range(count - 1)
    return [TargetSet(M_star, (DyadicInterval(M_star, j), DyadicInterval(M_star, (j + 1) % count)), topology)
            for j in pairs]


@dataclass
@dataclass
class StepRecord:
    """One step of a trace: the set ``V_n`` and the quantities the checks read."""

    n: int
    V: np.ndarray
    diam: int
    hulls: tuple[tuple[int, int], ...]
    intervals: list[int]
    levels: list[int]
    pair_level: int | None

    def symmetric_within(self, level: int) -> bool:
        """Symmetric about some point of ``D_level``."""
        return any(v <= level for v in self.levels)

    def symmetric_exactly(self, level: int) -> bool:
        """Symmetric about some point of ``D_level`` outside ``D_{level-1}``."""
        return level in self.levels

    @property
    def symmetry_class(self) -> str:
        n = self.n
        if self.symmetric_within(n):
            return f"D_{n}"
        if self.symmetric_exactly(n + 1):
            return f"D_{n + 1}\\D_{n}"
        if self.symmetric_exactly(n + 2):
            return f"D_{n + 2}\\D_{n + 1}"
        return "none"

    def inside(self, level: int, index: int, L: int, circle: bool) -> bool:
        """Whether ``V`` lies in the level-``level`` interval ``index``."""
        s = 1 << (L - level)
        lo = index * s
        if not circle:
            start, length = self.hulls[0]
            return lo <= start and start + length <= lo + s
        if level == 0:
            return True
        N = 1 << L
        return any((start - lo) % N + length <= s for start, length in self.hulls)

    def at_level(self, n: int, L: int, circle: bool) -> "StepRecord":
        """The same set viewed at step ``n``."""
        return replace(self, n=n, intervals=containing_intervals(self.V, n, L, circle))


def _hulls(V: np.ndarray, period: int, circle: bool) -> tuple[tuple[int, int], ...]:
    """Every shortest arc containing ``V`` (ties occur when two gaps are largest)."""
    if not circle or V.size == 1:
        return ((int(V[0]), int(V[-1] - V[0])),)
    gaps = np.diff(np.append(V, V[0] + period))
    big = int(gaps.max())
    return tuple((int(V[(k + 1) % V.size]), period - big) for k in np.flatnonzero(gaps == big))


def _step(ctx: RuleContext, n: int, V: np.ndarray, D: np.ndarray) -> StepRecord:
    L = ctx.L
    diam = int(D[np.ix_(V, V)].max()) if V.size > 1 else 0
    centres = symmetry_centres(V, L, ctx.circle)
    return StepRecord(
        n=n, V=V, diam=diam, hulls=_hulls(V, ctx.period, ctx.circle),
        intervals=containing_intervals(V, n, L, ctx.circle),
        levels=sorted(set(centre_levels(centres, L))),
        pair_level=adjacent_pair_level(V, L, ctx.circle),
    )


MAX_MESSAGES = 20


@dataclass
class CheckResult:
    name: str
    instances: int = 0
    failed: int = 0
    failures: list[str] = field(default_factory=list)
    worst_margin: Fraction | None = None
    note: str = ""

    def record(self, ok: bool, message: str = "", margin: Fraction | None = None):
        self.instances += 1
        if not ok:
            self.failed += 1
            if len(self.failures) < MAX_MESSAGES:
                self.failures.append(message)
        if margin is not None and (self.worst_margin is None or margin < self.worst_margin):
            self.worst_margin = margin

    @property
    def status(self) -> str:
        if self.failed:
            return "fail"
        return "pass" if self.instances else "n/a"

    def merge(self, other: "CheckResult") -> None:
        self.instances += other.instances
        self.failed += other.failed
        room = MAX_MESSAGES - len(self.failures)
        self.failures.extend(other.failures[:max(room, 0)])
        if other.worst_margin is not None and (self.worst_margin is None or other.worst_margin < self.worst_margin):
            self.worst_margin = other.worst_margin
        if other.note and other.note not in self.note:
            self.note = ", ".join(x for x in (self.note, other.note) if x)

    def to_dict(self) -> dict:
        return {"instances": self.instances, "failed": self.failed, "status": self.status,
                "worst_margin": None if self.worst_margin is None else _fraction_text(self.worst_margin),
                "failures": list(self.failures), "note": self.note}


def _fraction_text(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


TRACE_CHECKS = ("v-nesting", "goal-bound", "big-set-bound", "case-trichotomy",
                "no-symmetry-propagation", "quarter-symmetry-propagation",
                "half-symmetry-propagation", "final-bound")


@dataclass
class VTrace:
    target: TargetSet
    delta: int
    W: np.ndarray
    W_diam: int
    steps: list[StepRecord]
    n_star: int
    L: int
    nesting: list[tuple[bool, str]] = field(default_factory=list)
    cases: dict[int, str] = field(default_factory=dict)
    checks: dict[str, CheckResult] = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def resolved_limit(self) -> int:
        return self.L - self.target.M_star - 1

    @property
    def passed(self) -> bool:
        return all(c.status != "fail" for c in self.checks.values())

    def summary(self) -> dict:
        unit = self.L
        return {
            "points": int(self.W.size),
            "leftmost": str(from_units(int(self.W[0]), unit, self.target.topology)),
            "n_star": self.n_star,
            "diams": [str(Dyadic.from_units(s.diam, unit)) for s in self.steps],
            "cases": {str(k): v for k, v in sorted(self.cases.items())},
            "symmetry": [s.symmetry_class for s in self.steps],
            "checks": {k: v.status for k, v in self.checks.items()},
            "diagnostics": self.diagnostics,
        }


def _margin(bound: int, value: int, L: int) -> Fraction:
    return Fraction(bound - value, 1 << L)


@dataclass
class _Job:
    target: TargetSet
    delta: int
    H: np.ndarray
    member: np.ndarray
    W: list[np.ndarray]
    seq: list[list[int]] = field(default_factory=list)
    single: list[list[bool]] = field(default_factory=list)
    records: list[dict[int, StepRecord]] = field(default_factory=list)
    comps: list[np.ndarray] | None = None
    nest: dict[tuple[int, int, int], tuple[bool, str]] = field(default_factory=dict)


def _nesting(ctx: RuleContext, n: int, V: np.ndarray, V1: np.ndarray, D1: np.ndarray,
             delta: int) -> tuple[bool, str]:
    """``f_n(V1)`` inside ``V`` and ``V1`` a delta-component of ``f_n^{-1}(V)`` under ``D1``.

    ``V1`` is delta-connected by construction, so being a component comes
    down to containment and maximality: nothing else of ``f_n^{-1}(V)`` lies
    within ``delta`` of it.
    """
    fold = ctx.folds[n]
    in_v = np.zeros(ctx.size, dtype=bool)
    in_v[V] = True
    inside = bool(in_v[fold[V1]].all())
    Q = in_v[fold]
    in_q = bool(Q[V1].all())
    Q[V1] = False
    rest = np.flatnonzero(Q)
    maximal = rest.size == 0 or int(D1[np.ix_(V1, rest)].min()) > delta
    ok = inside and in_q and maximal
    return ok, f"n={n}: inside={inside} subset={in_q} maximal={maximal}"


def sweep_traces(ctx: RuleContext, targets: list[tuple[TargetSet, int]],
                 components: dict[int, list[np.ndarray]] | None = None) -> list[list[VTrace]]:
    """Traces for each ``(target, delta)``, all advanced together one level at a time.

    Only two metric matrices (besides ``d_Delta``) are alive at once, and each
    distinct ``V_n`` is measured once however many components lead to it.
    """
    L = ctx.L
    D_full = ctx.matrix(None)
    jobs = []
    for j, (target, delta) in enumerate(targets):
        H = target.units(L)
        member = np.zeros(ctx.size, dtype=bool)
        member[H] = True
        if components is not None and j in components:
            W = components[j]
        else:
            W = components_units(np.flatnonzero(member[ctx.F[0]]), D_full, delta)
        jobs.append(_Job(target, delta, H, member, W,
                         seq=[[] for _ in W], single=[[] for _ in W]))

    for n in range(ctx.active + 1):
        D = ctx.matrix(n)
        for job in jobs:
            P_n = np.flatnonzero(job.member[ctx.pullback[n]]) if n else job.H
            comps = components_units(P_n, D, job.delta)
            owner = np.full(ctx.size, -1, dtype=np.int64)
            for c, part in enumerate(comps):
                owner[part] = c
            records: dict[int, StepRecord] = {}
            for w, W in enumerate(job.W):
                labels = np.unique(owner[ctx.F[n][W]])
                c = int(labels[0])
                job.single[w].append(labels.size == 1 and c >= 0)
                if c < 0:
                    # image escaped every component; keep the image itself so the failure is visible
                    c = -1 - w
                    records[c] = _step(ctx, n, np.unique(ctx.F[n][W]), D)
                elif c not in records:
                    records[c] = _step(ctx, n, comps[c], D)
                if n:
                    a = job.seq[w][-1]
                    key = (n - 1, a, c)
                    if key not in job.nest:
                        job.nest[key] = _nesting(ctx, n - 1, job.records[-1][a].V, records[c].V, D, job.delta)
                job.seq[w].append(c)
            job.records.append(records)

    out = []
    n_star_cache: dict[int, int] = {}
    for job in jobs:
        n_star = n_star_cache.setdefault(job.delta, ctx.star_level(job.delta))
        copies: dict[tuple[int, int], StepRecord] = {}
        tail_nest: dict[int, tuple[bool, str]] = {}
        traces = []
        for w, W in enumerate(job.W):
            seq = job.seq[w]
            steps = [job.records[n][c] for n, c in enumerate(seq)]
            nesting = [job.nest[(n, seq[n], seq[n + 1])] for n in range(len(seq) - 1)]
            nesting = [(ok and job.single[w][n + 1], msg + ("" if job.single[w][n + 1] else " image split"))
                       for n, (ok, msg) in enumerate(nesting)]
            c = seq[-1]
            for n in range(ctx.active + 1, L + 1):
                key = (n, c)
                if key not in copies:
                    copies[key] = steps[-1].at_level(n, L, ctx.circle)
                steps.append(copies[key])
                if c not in tail_nest:
                    # beyond the rule depth f_n is the identity and d_n = d_Delta
                    tail_nest[c] = _nesting(ctx, n - 1, steps[-2].V, steps[-1].V, D_full, job.delta)
                nesting.append(tail_nest[c])
            W_diam = int(D_full[np.ix_(W, W)].max()) if W.size > 1 else 0
            trace = VTrace(job.target, job.delta, W, W_diam, steps, n_star, L, nesting)
            evaluate_trace(ctx, trace)
            traces.append(trace)
        out.append(traces)
    return out


def build_traces(ctx: RuleContext, target: TargetSet, delta: int,
                 components: list[np.ndarray] | None = None) -> list[VTrace]:
    """Traces of every delta-component of ``F_0^{-1}(H)`` (or of the given ones)."""
    comps = None if components is None else {0: components}
    return sweep_traces(ctx, [(target, delta)], comps)[0]


def _quarter_ok(s: StepRecord, ctx: RuleContext, k: int) -> bool:
    return any(4 * s.diam <= ctx.delta_units(k, i) for i in s.intervals)


def _cases_hypotheses(trace: VTrace, ctx: RuleContext, k: int, diam0: int) -> bool:
    s = trace.steps[k]
    return (s.diam == diam0
            and s.pair_level is not None and s.pair_level >= trace.target.M_star
            and not s.symmetric_within(k)
            and bool(s.intervals)
            and _quarter_ok(s, ctx, k))


def _chain_conditions(trace: VTrace, ctx: RuleContext, k: int, diam_ref: int, kind: str) -> list[str]:
    """Which of the four propagated conditions fail at step ``k``."""
    s = trace.steps[k]
    bad = []
    if s.diam != diam_ref:
        bad.append(f"({k}.1) diam {s.diam} != {diam_ref}")
    if kind == "none":
        if s.pair_level is None or s.pair_level < trace.target.M_star:
            bad.append(f"({k}.2) not two adjacent intervals of level >= M*")
    elif kind == "quarter":
        if not s.symmetric_exactly(k + 2):
            bad.append(f"({k}.2) no centre in D_{k + 2}\\D_{k + 1}")
    elif kind == "half":
        if not s.symmetric_within(k + 1):
            bad.append(f"({k}.2) no centre in D_{k + 1}")
    if not s.intervals:
        bad.append(f"({k}.3) not inside one level-{k} interval")
    elif not _quarter_ok(s, ctx, k):
        bad.append(f"({k}.4) diam exceeds a quarter of the containing interval")
    return bad


def evaluate_trace(ctx: RuleContext, trace: VTrace) -> None:
    L = ctx.L
    circle = ctx.circle
    steps = trace.steps
    last = len(steps) - 1
    delta = trace.delta
    diam0 = steps[0].diam
    limit = min(trace.resolved_limit, last)
    n_star = min(trace.n_star, last)
    checks = {name: CheckResult(name) for name in TRACE_CHECKS}

    c = checks["v-nesting"]
    for ok, msg in trace.nesting:
        c.record(ok, msg)

    # diam_Delta(W) <= diam_n(V_n) + delta once n >= N*
    c = checks["goal-bound"]
    for n in range(n_star, last + 1):
        bound = steps[n].diam + delta
        c.record(trace.W_diam <= bound, f"n={n}: {trace.W_diam} > {bound}",
                 _margin(bound, trace.W_diam, L))

    # a set filling a quarter of its interval stays inside it and at most quadruples
    c = checks["big-set-bound"]
    for n in range(last + 1):
        s = steps[n]
        for i in s.intervals:
            if 4 * s.diam < ctx.delta_units(n, i):
                continue
            worst = max(steps[k].diam for k in range(n, last + 1))
            escaped = [k for k in range(n, last + 1) if not steps[k].inside(n, i, L, circle)]
            ok = not escaped and worst <= 4 * s.diam
            c.record(ok, f"n={n}: escaped at {escaped[:3]}, max diam {worst} vs 4*{s.diam}",
                     _margin(4 * s.diam, worst, L))

    # trichotomy on resolved transitions
    c = checks["case-trichotomy"]
    for n in range(min(limit, last)):
        if not _cases_hypotheses(trace, ctx, n, diam0):
            continue
        a, b = steps[n], steps[n + 1]
        label = "violation"
        if b.diam == a.diam:
            label = "equal"
        elif b.diam == 2 * a.diam and (b.symmetric_exactly(n + 2) or b.symmetric_exactly(n + 3)):
            label = "doubled"
        elif b.V.size == 1 and b.levels == [n + 3]:
            label = "collapsed"
        trace.cases[n] = label
        c.record(label != "violation", f"n={n}: diam {a.diam} -> {b.diam}, centre levels {b.levels}",
                 _margin(2 * a.diam, b.diam, L))

    escape16 = any(steps[n].diam <= 16 * delta for n in range(n_star, last + 1))

    # no symmetry about D_{k+2} for every k <= K
    c = checks["no-symmetry-propagation"]
    K = -1
    for k in range(limit + 1):
        if steps[k].symmetric_within(k + 2):
            break
        K = k
    if K >= 0:
        bad = [m for k in range(K + 1) for m in _chain_conditions(trace, ctx, k, diam0, "none")]
        c.record(escape16 or not bad, f"K={K}: " + "; ".join(bad))
        if bad and escape16:
            c.note = "escape"

    for name, kind, start_level in (("quarter-symmetry-propagation", "quarter", 2),
                                    ("half-symmetry-propagation", "half", 1)):
        c = checks[name]
        for n in range(limit + 1):
            s = steps[n]
            size_ok = s.diam == 0 or diam0 <= s.diam <= 2 * diam0
            if not (size_ok and s.symmetric_exactly(n + start_level) and s.intervals
                    and _quarter_ok(s, ctx, n)):
                continue
            K = n - 1
            for k in range(n, limit + 1):
                t = steps[k]
                stop = t.symmetric_exactly(k + 1) if kind == "quarter" else t.symmetric_within(k)
                if stop:
                    break
                K = k
            if K < n:
                continue
            bad = [m for k in range(n, K + 1) for m in _chain_conditions(trace, ctx, k, s.diam, kind)]
            c.record(not bad, f"n={n}, K={K}: " + "; ".join(bad))

    c = checks["final-bound"]
    best = min(steps[n].diam for n in range(n_star, last + 1))
    c.record(best <= 128 * delta, f"min diam over n >= N* is {best} > 128*{delta}",
             _margin(128 * delta, best, L))

    trace.checks = checks
    trace.diagnostics = _diagnostics(trace)


def _diagnostics(trace: VTrace) -> dict:
    """First steps at which the trace gains each kind of symmetry."""
    steps = trace.steps
    n1 = next((s.n for s in steps if s.symmetric_within(s.n + 2)), None)
    n2 = None if n1 is None else next((s.n for s in steps if s.n > n1 and s.symmetric_exactly(s.n + 1)), None)
    n3 = None if n2 is None else next((s.n for s in steps if s.n > n2 and s.symmetric_within(s.n)), None)
    return {"n1": n1, "n2": n2, "n3": n3}


def v_trace(rule: DiameterRule, target: TargetSet, W, delta: int, L: int) -> VTrace:
    """The trace of one component ``W`` (grid indices of ``D_L``)."""
    ctx = RuleContext(rule, L)
    W = np.unique(np.asarray(W, dtype=np.int64))
    return build_traces(ctx, target, delta, [W])[0]
