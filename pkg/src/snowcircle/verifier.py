"""Certification that ``F_0`` (and ``g o F_0``) is Lipschitz light on the grid.

For every target ``H`` made of two adjacent level-``M*`` intervals and both
extreme scales ``delta`` (``2**-(M*+1)`` and ``2**-M* - 2**-L``), the
delta-components ``W`` of ``F_0^{-1}(H)`` are extracted under ``d_Delta`` and
``diam_Delta(W) <= 129*delta`` is asserted.  Each ``W`` also gets a full pull-back
trace with the step checks of :mod:`snowcircle.trace`.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from fractions import Fraction
from math import floor
from multiprocessing import Pool
from typing import Iterable, Sequence

import numpy as np

from .components import centre_levels, components_units, symmetry_centres
from .dyadic import (CIRCLE, Dyadic, DyadicPoint, Topology, arclength, from_units,
                     to_units)
from .folding import real_coordinate_grid
from .metric import MetricIndex, MetricKind
from .rules import DiameterRule
from .trace import (TRACE_CHECKS, CheckResult, RuleContext, TargetSet, VTrace,
                    adjacent_targets, build_traces, sweep_traces, v_trace)

BOUND = 129


class VerificationError(AssertionError):
    """A bound failed; ``witness`` holds the offending rule, target, component and trace."""

    def __init__(self, message: str, witness: dict):
        super().__init__(message)
        self.witness = witness


class DepthError(ValueError):
    """Grid too shallow for the requested targets."""


def _fraction_text(q: Fraction) -> str:
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _threshold(delta, L: int) -> int:
    """Largest grid distance (units ``2**-L``) not exceeding ``delta``."""
    if isinstance(delta, (int, np.integer)):
        return int(delta)
    if isinstance(delta, Dyadic):
        q = delta.to_fraction()
    elif isinstance(delta, str):
        q = Dyadic.parse(delta).to_fraction()
    else:
        q = Fraction(delta)
    if q <= 0:
        raise ValueError("delta must be positive")
    return floor(q * (1 << L))


# component families

@dataclass
class ComponentFamily:
    """Delta-components of a grid set, ordered by leftmost point."""

    delta: Dyadic
    metric: MetricKind
    depth: int
    topology: Topology
    components: list[np.ndarray]
    diameters: list[int]

    def __len__(self):
        return len(self.components)

    def points(self, i: int) -> list[DyadicPoint]:
        return [from_units(int(k), self.depth, self.topology) for k in self.components[i]]

    def diameter(self, i: int) -> Dyadic:
        return Dyadic.from_units(self.diameters[i], self.depth)

    def as_sets(self) -> list[set[DyadicPoint]]:
        return [set(self.points(i)) for i in range(len(self))]


def _to_indices(points, idx: MetricIndex) -> np.ndarray:
    pts = list(points)
    if pts and isinstance(pts[0], DyadicPoint):
        return np.unique(np.array([idx.index_of(p) for p in pts], dtype=np.int64))
    return np.unique(np.asarray(pts, dtype=np.int64))


def delta_components(points, delta, idx: MetricIndex) -> ComponentFamily:
    """Components of the graph joining points at distance ``<= delta``."""
    L = idx.depth
    t = _threshold(delta, L)
    V = _to_indices(points, idx)
    D = idx.matrix()
    comps = components_units(V, D, t)
    diams = [int(D[np.ix_(c, c)].max()) if c.size > 1 else 0 for c in comps]
    d = delta if isinstance(delta, Dyadic) else Dyadic.from_units(t, L)
    return ComponentFamily(d, idx.kind, L, idx.topology, comps, diams)


# enlarging a small set to an arc of prescribed size

@dataclass(frozen=True)
class ArcSet:
    """The arc from ``start`` of length ``length`` in the base curve."""

    start: Dyadic
    length: Dyadic
    topology: Topology = CIRCLE

    @property
    def end(self) -> Dyadic:
        end = self.start + self.length
        if self.topology is CIRCLE and end >= 1:
            end = end - 1
        return end

    def units(self, L: int) -> np.ndarray:
        a = self.start.units(L)
        pts = a + np.arange(self.length.units(L) + 1)
        if self.topology is CIRCLE:
            pts %= 1 << L
        return np.unique(pts)

    def __str__(self):
        return f"[{self.start}, {self.start + self.length}]"


def enlarge_target(E: Iterable[DyadicPoint], r, topology: Topology | str = CIRCLE) -> ArcSet:
    """An arc ``E'`` containing ``E`` with ``diam_0(E') = r``, starting at the first point of ``E``.

    With ``diam_0(E) < r <= 1/8`` every point of ``E`` lies within ``1/8`` of
    any other, so inside that window ``E`` has a well-defined first point
    ``a`` and ``[a, a + r]`` contains ``E``.
    """
    t = Topology.parse(topology)
    pts = sorted(set(E), key=lambda p: p.value)
    if not pts:
        raise ValueError("E must be non-empty")
    r = r if isinstance(r, Dyadic) else Dyadic.from_fraction(Fraction(r) if not isinstance(r, str) else Dyadic.parse(r).to_fraction())
    diam = max((arclength(p, q, t) for p in pts for q in pts), default=Dyadic(0))
    if r > Fraction(1, 8):
        raise ValueError(f"r = {r} exceeds 1/8; use the global bound instead")
    if r <= diam:
        raise ValueError(f"r = {r} must exceed diam_0(E) = {diam}")
    x = pts[0].value
    if t is CIRCLE:
        offsets = sorted(((p.value - x + Fraction(1, 8)) % 1, p) for p in pts)
        a = offsets[0][1].value
        return ArcSet(Dyadic.from_fraction(a % 1), r, t)
    a = min(p.value for p in pts)
    a = min(a, 1 - r.to_fraction())
    return ArcSet(Dyadic.from_fraction(a), r, t)


# symmetry classes

@dataclass(frozen=True)
class SymmetryClass:
    label: str
    centres: tuple[DyadicPoint, ...]

    def __str__(self):
        return self.label


def symmetry_class(V, k: int, L: int, topology: Topology | str = CIRCLE) -> SymmetryClass:
    """Finest of ``D_k``, ``D_{k+1}\\D_k``, ``D_{k+2}\\D_{k+1}`` containing a reflection centre of ``V``.

    ``V`` is a depth-``L`` sample (points or grid indices).  All exact
    reflection centres are returned, including ones too fine for any class.
    """
    t = Topology.parse(topology)
    vals = list(V)
    if vals and isinstance(vals[0], DyadicPoint):
        units = np.unique([to_units(p, L, t) for p in vals])
    else:
        units = np.unique(np.asarray(vals, dtype=np.int64))
    centres = symmetry_centres(units, L, t is CIRCLE)
    levels = centre_levels(centres, L)
    points = tuple(from_units(c, L + 1, t) for c in centres)
    if any(v <= k for v in levels):
        label = f"D_{k}"
    elif k + 1 in levels:
        label = f"D_{k + 1}\\D_{k}"
    elif k + 2 in levels:
        label = f"D_{k + 2}\\D_{k + 1}"
    else:
        label = "none"
    return SymmetryClass(label, points)


# preimages

def preimage_components(rule: DiameterRule, target: TargetSet, L: int, delta=None,
                        ctx: RuleContext | None = None) -> ComponentFamily:
    """Delta-components of ``F_0^{-1}(H)`` on ``D_L`` under ``d_Delta`` (default ``delta = 2**-(M*+1)``)."""
    if L < target.M_star + 4:
        raise DepthError(f"depth {L} is too shallow for M* = {target.M_star} (need M* + 4)")
    ctx = ctx or RuleContext(rule, L)
    t = target.delta_choices(L)["low"] if delta is None else _threshold(delta, L)
    member = np.zeros(ctx.size, dtype=bool)
    member[target.units(L)] = True
    P = np.flatnonzero(member[ctx.F[0]])
    D = ctx.matrix(None)
    comps = components_units(P, D, t)
    diams = [int(D[np.ix_(c, c)].max()) if c.size > 1 else 0 for c in comps]
    return ComponentFamily(Dyadic.from_units(t, L), MetricKind.full(), L, rule.topology, comps, diams)


# Lipschitz constants

@dataclass(frozen=True)
class LipschitzConstant:
    value: Fraction
    witness: tuple[DyadicPoint, DyadicPoint] | None

    def to_dict(self) -> dict:
        return {"value": _fraction_text(self.value),
                "witness": None if self.witness is None else [str(p) for p in self.witness]}


def _max_ratio(num_rows, den: np.ndarray) -> tuple[Fraction, tuple[int, int] | None]:
    """Exact ``max num/den`` over off-diagonal pairs; ``num_rows(i0, i1)`` yields numerator rows."""
    n = den.shape[0]
    best, arg = Fraction(0), None
    step = 256
    for i0 in range(0, n, step):
        i1 = min(n, i0 + step)
        num = np.asarray(num_rows(i0, i1), dtype=np.int64)
        d = den[i0:i1].astype(np.int64)
        # grid distances are at most 2**L <= 2**26, so float ratios order exactly
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(d > 0, num / np.where(d > 0, d, 1), -1.0)
        k = int(np.argmax(r))
        a, b = divmod(k, n)
        if d[a, b] > 0:
            q = Fraction(int(num[a, b]), int(d[a, b]))
            if arg is None or q > best:
                best, arg = q, (i0 + a, b)
    return best, arg


def f0_lipschitz(ctx: RuleContext) -> LipschitzConstant:
    """``max d_0(F_0 x, F_0 y) / d_Delta(x, y)`` over all pairs of the grid."""
    D0 = ctx.matrix(0)
    F0 = ctx.F[0]
    value, arg = _max_ratio(lambda i0, i1: D0[np.ix_(F0[i0:i1], F0)], ctx.matrix(None))
    return LipschitzConstant(value, None if arg is None else
                             tuple(from_units(int(k), ctx.L, ctx.rule.topology) for k in arg))


def composite_lipschitz(ctx: RuleContext) -> LipschitzConstant:
    """Lipschitz constant of ``g o F_0`` from ``d_Delta`` to the line."""
    gF = real_coordinate_grid(ctx.L, ctx.rule.topology)[ctx.F[0]]
    value, arg = _max_ratio(lambda i0, i1: np.abs(gF[i0:i1, None] - gF[None, :]), ctx.matrix(None))
    return LipschitzConstant(value, None if arg is None else
                             tuple(from_units(int(k), ctx.L, ctx.rule.topology) for k in arg))


# reports

@dataclass
class ComponentRecord:
    points: int
    leftmost: DyadicPoint
    diam: int
    ratio: Fraction
    delta_ratio: Fraction
    trace: VTrace | None = None

    def to_dict(self, L: int, detail: bool) -> dict:
        out = {"points": self.points, "leftmost": str(self.leftmost),
               "diam": str(Dyadic.from_units(self.diam, L)),
               "ratio": _fraction_text(self.ratio), "delta_ratio": _fraction_text(self.delta_ratio)}
        if detail and self.trace is not None:
            out["trace_summary"] = self.trace.summary()
        return out


@dataclass
class TargetReport:
    M_star: int
    H: list[str]
    delta_name: str
    delta: int
    components: list[ComponentRecord]

    @property
    def max_ratio(self) -> Fraction:
        return max((c.ratio for c in self.components), default=Fraction(0))

    @property
    def max_delta_ratio(self) -> Fraction:
        return max((c.delta_ratio for c in self.components), default=Fraction(0))

    def worst(self) -> ComponentRecord | None:
        return max(self.components, key=lambda c: c.delta_ratio, default=None)

    def to_dict(self, L: int, detail: str = "worst") -> dict:
        worst = self.worst()
        return {
            "M_star": self.M_star, "H": self.H, "delta_choice": self.delta_name,
            "delta": str(Dyadic.from_units(self.delta, L)),
            "components": [c.to_dict(L, detail == "all" or (detail == "worst" and c is worst))
                           for c in self.components],
            "max_ratio": _fraction_text(self.max_ratio),
            "max_delta_ratio": _fraction_text(self.max_delta_ratio),
        }


@dataclass
class LineTargetReport:
    M_star: int
    interval: tuple[Dyadic, Dyadic]
    delta: int
    components: int
    max_delta_ratio: Fraction

    def to_dict(self, L: int) -> dict:
        return {"M_star": self.M_star, "T": [str(self.interval[0]), str(self.interval[1])],
                "delta": str(Dyadic.from_units(self.delta, L)), "components": self.components,
                "max_delta_ratio": _fraction_text(self.max_delta_ratio)}


@dataclass
class CompositeReport:
    lipschitz: LipschitzConstant
    targets: list[LineTargetReport]

    @property
    def constant(self) -> Fraction:
        return max((t.max_delta_ratio for t in self.targets), default=Fraction(0))

    def to_dict(self, L: int) -> dict:
        return {"lipschitz": self.lipschitz.to_dict(), "constant": _fraction_text(self.constant),
                "targets": [t.to_dict(L) for t in self.targets]}


@dataclass
class VerificationReport:
    rule: DiameterRule
    depth: int
    mstar: tuple[int, int]
    targets: list[TargetReport]
    checks: dict[str, CheckResult]
    lipschitz: LipschitzConstant
    composite: CompositeReport | None = None
    bound: int = BOUND

    @property
    def global_max_ratio(self) -> Fraction:
        return max((t.max_ratio for t in self.targets), default=Fraction(0))

    @property
    def global_max_delta_ratio(self) -> Fraction:
        return max((t.max_delta_ratio for t in self.targets), default=Fraction(0))

    @property
    def bound_ok(self) -> bool:
        return self.global_max_delta_ratio <= self.bound

    @property
    def lipschitz_ok(self) -> bool:
        return self.lipschitz.value <= 1

    @property
    def checks_ok(self) -> bool:
        return all(c.status != "fail" for c in self.checks.values())

    @property
    def passed(self) -> bool:
        return self.bound_ok and self.lipschitz_ok and self.checks_ok

    @property
    def trace_count(self) -> int:
        return sum(len(t.components) for t in self.targets)

    def witness(self) -> dict | None:
        """The worst component over all targets with its trace."""
        worst_t = max(self.targets, key=lambda t: t.max_delta_ratio, default=None)
        if worst_t is None or worst_t.worst() is None:
            return None
        w = worst_t.worst()
        return {"rule_hash": self.rule.hash, "M_star": worst_t.M_star, "H": worst_t.H,
                "delta": str(Dyadic.from_units(worst_t.delta, self.depth)),
                "component": w.to_dict(self.depth, True)}

    def to_dict(self, detail: str = "worst") -> dict:
        return {
            "rule": self.rule.to_dict(),
            "rule_hash": self.rule.hash,
            "depth": self.depth,
            "mstar": list(self.mstar),
            "targets": [t.to_dict(self.depth, detail) for t in self.targets],
            "global_max_ratio": _fraction_text(self.global_max_ratio),
            "global_max_delta_ratio": _fraction_text(self.global_max_delta_ratio),
            "bound": self.bound,
            "lipschitz_F0": self.lipschitz.to_dict(),
            "checks": {k: v.to_dict() for k, v in self.checks.items()},
            "composite": None if self.composite is None else self.composite.to_dict(self.depth),
            "witness": self.witness(),
            "pass": self.passed,
        }

    def assert_passed(self) -> None:
        if not self.passed:
            raise VerificationError(
                f"verification failed for rule {self.rule.hash[:12]}: bound_ok={self.bound_ok} "
                f"lipschitz_ok={self.lipschitz_ok} checks_ok={self.checks_ok}", self.witness() or {})


def check_mstar_range(L: int, mstar: tuple[int, int]) -> None:
    lo, hi = mstar
    if lo < 3 or hi > L - 4 or lo > hi:
        raise DepthError(f"M* range {lo}..{hi} must lie in [3, {L - 4}] at depth {L}")


def line_targets(M_star: int, topology: Topology) -> list[tuple[int, int]]:
    """Index pairs ``(j, j+2)`` of two adjacent level-``M*`` intervals of the line inside the image of ``g``."""
    count = 1 << (M_star - 1) if topology is CIRCLE else 1 << M_star
    return [(j, j + 2) for j in range(count - 1)]


def composite_sweep(ctx: RuleContext, mstar: tuple[int, int], deltas: Sequence[str] = ("low", "high"),
                    lipschitz: bool = True) -> CompositeReport:
    """Delta-components of ``(g o F_0)^{-1}(T)`` for line targets ``T``; the constant is measured, not bounded."""
    L = ctx.L
    gF = real_coordinate_grid(L, ctx.rule.topology)[ctx.F[0]]
    D = ctx.matrix(None)
    reports = []
    for M in range(mstar[0], mstar[1] + 1):
        s = 1 << (L - M)
        choice = {"low": 1 << (L - M - 1), "high": s - 1}
        for j0, j1 in line_targets(M, ctx.rule.topology):
            P = np.flatnonzero((gF >= j0 * s) & (gF <= j1 * s))
            for name in deltas:
                delta = choice[name]
                comps = components_units(P, D, delta)
                worst = max((int(D[np.ix_(c, c)].max()) if c.size > 1 else 0 for c in comps), default=0)
                reports.append(LineTargetReport(M, (Dyadic.from_units(j0 * s, L), Dyadic.from_units(j1 * s, L)),
                                                delta, len(comps), Fraction(worst, delta)))
    lip = composite_lipschitz(ctx) if lipschitz else LipschitzConstant(Fraction(0), None)
    return CompositeReport(lip, reports)


def verify_lipschitz_light(rule: DiameterRule, L: int, mstar: tuple[int, int],
                           deltas: Sequence[str] = ("low", "high"), composite: bool = True,
                           traces: bool = True, keep: str = "worst") -> VerificationReport:
    """Sweep every adjacent-pair target with ``M*`` in range and both extreme scales.

    Every component is traced and checked; ``keep`` decides which traces stay
    attached to the report (``"worst"`` per target, ``"all"`` or ``"none"``).
    """
    check_mstar_range(L, mstar)
    ctx = RuleContext(rule, L)
    jobs, names = [], []
    for M in range(mstar[0], mstar[1] + 1):
        for H in adjacent_targets(M, rule.topology):
            choice = H.delta_choices(L)
            for name in deltas:
                jobs.append((H, choice[name]))
                names.append(name)
    checks = {name: CheckResult(name) for name in TRACE_CHECKS}
    D0 = ctx.matrix(0)
    targets = []
    if traces:
        results = [[(tr.W, tr.W_diam, tr) for tr in trs] for trs in sweep_traces(ctx, jobs)]
    else:
        results = []
        for H, d in jobs:
            fam = preimage_components(rule, H, L, d, ctx)
            results.append([(c, diam, None) for c, diam in zip(fam.components, fam.diameters)])
    for (H, delta), name, comps in zip(jobs, names, results):
        Hu = H.units(L)
        h_diam = int(D0[np.ix_(Hu, Hu)].max())
        records = []
        for W, diam, tr in comps:
            records.append(ComponentRecord(int(W.size), from_units(int(W[0]), L, rule.topology), diam,
                                           Fraction(diam, h_diam), Fraction(diam, delta), tr))
            if tr is not None:
                for k, c in tr.checks.items():
                    checks[k].merge(c)
        target = TargetReport(H.M_star, H.labels, name, delta, records)
        if keep != "all":
            worst = target.worst() if keep == "worst" else None
            for c in records:
                if c is not worst:
                    c.trace = None
        targets.append(target)
    report = VerificationReport(rule, L, tuple(mstar), targets, checks, f0_lipschitz(ctx))
    if composite:
        report.composite = composite_sweep(ctx, mstar, deltas)
    return report


def _verify_job(args) -> VerificationReport:
    rule, L, mstar, deltas, composite, traces, keep = args
    return verify_lipschitz_light(rule, L, mstar, deltas, composite, traces, keep)


def verify_rules(rules: Sequence[DiameterRule], L: int, mstar: tuple[int, int],
                 deltas: Sequence[str] = ("low", "high"), composite: bool = True, traces: bool = True,
                 jobs: int | None = None, keep: str = "worst") -> list[VerificationReport]:
    """Per-rule verification, fanned out over processes; results keep the input order."""
    jobs = jobs or os.cpu_count() or 1
    args = [(r, L, tuple(mstar), tuple(deltas), composite, traces, keep) for r in rules]
    if jobs <= 1 or len(rules) <= 1:
        return [_verify_job(a) for a in args]
    with Pool(min(jobs, len(rules))) as pool:
        return pool.map(_verify_job, args)


__all__ = [
    "ArcSet", "BOUND", "ComponentFamily", "CompositeReport", "DepthError", "LipschitzConstant",
    "SymmetryClass", "TargetSet", "VTrace", "VerificationError", "VerificationReport",
    "adjacent_targets", "build_traces", "composite_lipschitz", "composite_sweep", "delta_components",
    "enlarge_target", "f0_lipschitz", "line_targets", "preimage_components", "symmetry_class",
    "v_trace", "verify_lipschitz_light", "verify_rules",
]
