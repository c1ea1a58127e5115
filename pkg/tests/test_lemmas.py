from fractions import Fraction

import pytest

from snowcircle.dyadic import ARC
from snowcircle.lemmas import (LEMMA_ROWS, TRACE_ROWS, LemmaRow, check_component_projection,
                               check_fold_contraction, check_interval_identity, check_minimal_chains,
                               check_projection, check_scale_reduction, check_truncation,
                               check_uniform_convergence, run_suite, working_depth)
from snowcircle.rules import keep_at_root, seeded_random, uniform_halve

RULES = [keep_at_root(8), seeded_random(0.5, 13, 3, 8), seeded_random(0.5, 2, 2, 8, ARC)]


def test_row_semantics():
    row = LemmaRow("x")
    assert row.status == "n/a"
    row.add(3, 0, Fraction(1, 4))
    row.add(2, 0, Fraction(1, 8))
    assert (row.status, row.instances, row.worst_margin) == ("pass", 5, Fraction(1, 8))
    row.add(1, 1, Fraction(-1, 2), "bad")
    assert row.status == "fail" and row.example == "bad"
    assert row.to_dict()["worst_margin"] == "-1/2"


@pytest.mark.parametrize("rule", RULES)
def test_individual_rows_pass(rule):
    rows = [*check_minimal_chains(rule, 5), *check_truncation(rule, 6), check_interval_identity(rule, 8),
            check_fold_contraction(rule, 6), check_uniform_convergence(rule, 8),
            check_projection(rule, 6, 3, 3), check_component_projection(rule, 7, 3, (3, 3)),
            check_scale_reduction(rule, 8, (3, 4))]
    for row in rows:
        assert row.status == "pass", (row.name, row.example)
        assert row.instances > 0
        assert row.worst_margin is None or row.worst_margin >= 0


def test_uniform_convergence_margin_all_halve():
    # F_m is the identity, so d_m(F_m x, F_m y) - d(x, y) never exceeds 0 and the margin is 2 M(m)
    row = check_uniform_convergence(uniform_halve(8), 8, 2)
    assert row.status == "pass"
    assert row.worst_margin > 0


def test_working_depth():
    assert working_depth(uniform_halve(8), 8) == 8
    assert working_depth(keep_at_root(8), 8) >= 9


def test_suite_rows():
    rows = run_suite(seeded_random(0.5, 1, 3, 8), 8)
    assert [r.name for r in rows] == list(LEMMA_ROWS)
    assert all(r.status == "pass" for r in rows)
    assert {r.name for r in rows if r.name in TRACE_ROWS} == set(TRACE_ROWS)


def test_suite_shallow_marks_trace_rows():
    rows = {r.name: r for r in run_suite(uniform_halve(6), 6)}
    assert all(rows[n].status == "n/a" for n in TRACE_ROWS)
    assert rows["interval-identity"].status == "pass"
