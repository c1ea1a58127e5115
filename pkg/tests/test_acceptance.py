"""Acceptance criteria 1-10, exact arithmetic throughout.

Run under pytest (one test per criterion, summary lines at the end) or as a
script: ``python tests/test_acceptance.py [N ...]`` prints one line per criterion.
"""
from __future__ import annotations

import itertools
import sys
import time
from fractions import Fraction
from functools import lru_cache

import numpy as np

from snowcircle.dyadic import Dyadic, DyadicInterval, DyadicPoint
from snowcircle.folding import FoldSpec, fold_preimages, limit_eval
from snowcircle.lemmas import (check_component_projection, check_fold_contraction, check_interval_identity,
                               check_projection, check_truncation, check_uniform_convergence)
from snowcircle.metric import build_index
from snowcircle.oracle import BruteForceOracle
from snowcircle.rules import seeded_corpus, uniform_halve
from snowcircle.trace import TRACE_CHECKS, RuleContext
from snowcircle.verifier import BOUND, verify_rules

SEED = 1000


def _rows_ok(rows) -> tuple[bool, str]:
    failed = [r for r in rows if r.status != "pass"]
    total = sum(r.instances for r in rows)
    worst = min((r.worst_margin for r in rows if r.worst_margin is not None), default=None)
    detail = f"{len(rows)} rows, {total} instances"
    if worst is not None:
        detail += f", worst margin {worst}"
    if failed:
        detail += f", first failure {failed[0].name}: {failed[0].example}"
    return not failed, detail


def criterion_1():
    rules = seeded_corpus(10, 6, base_seed=SEED)
    pairs = bad = 0
    for rule in rules:
        for kind in ("full", 0, 1, 2):
            oracle = BruteForceOracle(rule, kind, 6)
            idx = build_index(rule, 4, kind)
            for x, y in itertools.combinations(idx.points(), 2):
                pairs += 1
                bad += oracle.dist(x, y) != idx.dist(x, y)
    return bad == 0, f"{pairs} pairs over 10 rules x 4 metric kinds, {bad} mismatches"


def criterion_2():
    return _rows_ok([check_interval_identity(r, 10) for r in seeded_corpus(20, 10, base_seed=SEED)])


def criterion_3():
    rows = []
    for r in seeded_corpus(20, 8, base_seed=SEED):
        rows.extend(check_truncation(r, 8))
    return _rows_ok(rows)


def criterion_4():
    return _rows_ok([check_fold_contraction(r, 8) for r in seeded_corpus(20, 8, base_seed=SEED)])


def criterion_5():
    return _rows_ok([check_uniform_convergence(r, 10, 3) for r in seeded_corpus(20, 10, base_seed=SEED)])


def criterion_6():
    rows = []
    for r in seeded_corpus(10, 8, base_seed=SEED):
        rows.append(check_projection(r, 8, 4, 4))
        rows.append(check_component_projection(r, 8, 4, (3, 4)))
    return _rows_ok(rows)


@lru_cache(maxsize=1)
def main_sweep():
    """Criterion 7 data, shared with criteria 8 and 10."""
    rules = seeded_corpus(30, 12, base_seed=SEED)
    start = time.perf_counter()
    reports = verify_rules(rules, 12, (3, 8), jobs=1)
    return reports, time.perf_counter() - start


def _lift(rule, y):
    """An exact ``x`` with ``F_0(x) = y``, built by walking back through ``f_0, f_1, ...``."""
    x = y
    for n in range(rule.depth):
        x = min(fold_preimages(FoldSpec(rule, n), x), key=lambda p: (p.level, p.value))
    return x


def _gap_certificate(rule, y, L=12):
    """An empty grid preimage is a sampling gap: ``y`` has an exact preimage, and it lies off ``D_L``."""
    x = _lift(rule, y)
    return limit_eval(rule, 0, x) == y and x.level > L


def _point(q: Fraction) -> DyadicPoint:
    d = Dyadic.from_fraction(q)
    return DyadicPoint(d.mantissa, d.exponent)


def criterion_7():
    reports, seconds = main_sweep()
    worst = max(r.global_max_delta_ratio for r in reports)
    comps = sum(len(t.components) for r in reports for t in r.targets)
    empty = [(r.rule, t) for r in reports for t in r.targets if not t.components]
    centres = {(rule.hash, t.H[0]): (rule, DyadicInterval.parse(t.H[0])) for rule, t in empty}
    gaps = all(_gap_certificate(rule, _point(iv.right.value)) for rule, iv in centres.values())
    ok = worst <= BOUND and comps > 0 and gaps
    return ok, (f"30 rules, {comps} components, max diam/delta = {worst} (bound {BOUND}), "
                f"{len(empty)} targets with empty grid preimage, "
                f"{'all' if gaps else 'NOT all'} certified as gaps of D_12, {seconds:.0f} s")


def criterion_8():
    reports, _ = main_sweep()
    parts, ok = [], True
    for name in TRACE_CHECKS:
        inst = sum(r.checks[name].instances for r in reports)
        failed = sum(r.checks[name].failed for r in reports)
        ok &= failed == 0 and inst > 0
        parts.append(f"{name} {inst - failed}/{inst}")
    ok &= all(r.lipschitz.value <= 1 for r in reports)
    return ok, ", ".join(parts)


def criterion_9():
    rule = uniform_halve(12)
    D = build_index(rule, 8).matrix().astype(np.int64)
    k = np.arange(256)
    lam = np.minimum(np.abs(k[:, None] - k[None, :]), 256 - np.abs(k[:, None] - k[None, :]))
    metric_ok = np.array_equal(D, lam)
    turning = build_index(rule, 6).bounded_turning_constant().ratio
    identity = np.array_equal(RuleContext(rule, 12).F[0], np.arange(1 << 12))
    (rep,) = verify_rules([rule], 12, (3, 8), jobs=1)
    ok = metric_ok and turning == 1 and identity and rep.global_max_ratio == 1 and rep.passed
    return ok, (f"d = arclength: {metric_ok}, turning constant {turning}, F_0 identity: {identity}, "
                f"max ratio {rep.global_max_ratio}")


def criterion_10():
    reports, _ = main_sweep()
    constant = max(r.composite.constant for r in reports)
    lip = max(r.composite.lipschitz.value for r in reports)
    targets = sum(len(r.composite.targets) for r in reports)
    empty = [(r.rule, t) for r in reports for t in r.composite.targets if t.components == 0]
    # the centre c of T lies in [0, 1/2], where g(c) = c
    centres = {(rule.hash, t.interval[0].to_fraction()): (rule, (t.interval[0].to_fraction() + t.interval[1].to_fraction()) / 2)
               for rule, t in empty}
    gaps = all(_gap_certificate(rule, _point(c)) for rule, c in centres.values())
    ok = lip <= 1 and targets > 0 and gaps
    return ok, (f"{targets} line targets, measured constant {constant} (reported, no bound), "
                f"Lipschitz constant of g o F_0 {lip}, {len(empty)} targets with empty grid preimage, "
                f"{'all' if gaps else 'NOT all'} certified as gaps of D_12")


CRITERIA = {n: globals()[f"criterion_{n}"] for n in range(1, 11)}


def _run(number, record):
    ok, detail = CRITERIA[number]()
    record(number, ok, detail)
    assert ok, detail


def test_criterion_1_oracle_equivalence(record_criterion):
    _run(1, record_criterion)


def test_criterion_2_interval_identity(record_criterion):
    _run(2, record_criterion)


def test_criterion_3_truncation_ordering_and_convergence(record_criterion):
    _run(3, record_criterion)


def test_criterion_4_fold_contraction(record_criterion):
    _run(4, record_criterion)


def test_criterion_5_uniform_convergence(record_criterion):
    _run(5, record_criterion)


def test_criterion_6_projection_identities(record_criterion):
    _run(6, record_criterion)


def test_criterion_7_lipschitz_light_bound(record_criterion):
    _run(7, record_criterion)


def test_criterion_8_trace_lemmas(record_criterion):
    _run(8, record_criterion)


def test_criterion_9_all_halve_baselines(record_criterion):
    _run(9, record_criterion)


def test_criterion_10_composite_map(record_criterion):
    _run(10, record_criterion)


def main(argv=None) -> int:
    numbers = [int(a) for a in (argv if argv is not None else sys.argv[1:])] or list(CRITERIA)
    all_ok = True
    for number in numbers:
        start = time.perf_counter()
        try:
            ok, detail = CRITERIA[number]()
        except Exception as exc:  # report and continue with the next criterion
            ok, detail = False, f"error: {exc!r}"
        all_ok &= ok
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}  [{time.perf_counter() - start:.1f} s]",
              flush=True)
    return 0 if all_ok else 1


if __name__ == "__main__":
    sys.exit(main())
