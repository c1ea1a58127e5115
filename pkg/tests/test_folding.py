from fractions import Fraction

import numpy as np
import pytest

from snowcircle.dyadic import ARC, CIRCLE, DyadicInterval, DyadicPoint
from snowcircle.folding import (FoldSpec, cascade_eval, cascade_grid, cascade_table, fold_eval, fold_grid,
                                fold_preimages, interval_image, limit_eval, limit_grid, real_coordinate,
                                tent_units)
from snowcircle.metric import build_index
from snowcircle.rules import keep_at_root, periodic_keep, seeded_corpus, uniform_halve


def P(text):
    return DyadicPoint.parse(text)


def I(level, index):
    return DyadicInterval(level, index)


ROOT = FoldSpec(keep_at_root(4, ARC), 0)


class TestFold:
    @pytest.mark.parametrize("x, y", [("3/8", "3/4"), ("1/2", "1/2"), ("0", "0"), ("1/4", "1/2"),
                                      ("5/8", "1/4"), ("3/4", "1/2"), ("15/16", "7/8")])
    def test_root_fold(self, x, y):
        assert fold_eval(ROOT, P(x)) == P(y)

    def test_three_piece_closed_form(self):
        for k in range(65):
            t = Fraction(k, 64)
            if t <= Fraction(3, 8):
                want = 2 * t
            elif t <= Fraction(5, 8):
                want = Fraction(3, 2) - 2 * t
            else:
                want = 2 * t - 1
            assert fold_eval(ROOT, DyadicPoint(k, 6)).value == want

    def test_identity_mode(self):
        spec = FoldSpec(uniform_halve(4), 2)
        for k in range(32):
            assert fold_eval(spec, DyadicPoint(k, 5)) == DyadicPoint(k, 5)
        assert FoldSpec(keep_at_root(4), 0).modes[I(0, 0)] == "fold"
        assert spec.modes[I(2, 1)] == "identity"

    def test_fixes_coarse_grid_and_preserves_levels(self):
        for rule in seeded_corpus(3, 6):
            for n in range(5):
                spec = FoldSpec(rule, n)
                for k in range(1 << n):
                    assert fold_eval(spec, DyadicPoint(k, n)) == DyadicPoint(k, n)
                for lev in range(n, n + 4):
                    for k in range(1 << lev):
                        assert fold_eval(spec, DyadicPoint(k, lev)).level <= lev

    @pytest.mark.parametrize("y, pre", [("1/2", {"1/4", "1/2", "3/4"}), ("0", {"0"}), ("7/8", {"15/16"})])
    def test_preimages(self, y, pre):
        assert fold_preimages(ROOT, P(y)) == {P(p) for p in pre}

    def test_preimages_exact_inverse(self):
        spec = FoldSpec(periodic_keep(2, 6), 2)
        for k in range(64):
            y = DyadicPoint(k, 6)
            pre = fold_preimages(spec, y)
            assert 1 <= len(pre) <= 3
            assert all(fold_eval(spec, x) == y for x in pre)

    def test_tent_units_matches(self):
        h = 64
        for t in range(h + 1):
            assert Fraction(int(tent_units(t, h)), h) == fold_eval(ROOT, DyadicPoint(t, 6)).value


class TestCascade:
    def test_all_halve_identity(self):
        r = uniform_halve(5)
        for k in range(32):
            x = DyadicPoint(k, 5)
            assert cascade_eval(r, 0, 4, x) == x and limit_eval(r, 0, x) == x

    def test_single_fold(self):
        r = keep_at_root(4)
        assert cascade_eval(r, 0, 3, P("3/8")) == P("3/4")
        assert limit_eval(r, 0, P("3/8")) == P("3/4")
        assert cascade_eval(r, 2, 2, P("3/8")) == fold_eval(FoldSpec(r, 2), P("3/8"))

    def test_limit_fixes_coarse_points(self):
        for r in seeded_corpus(3, 6):
            for m in range(5):
                for k in range(1 << m):
                    assert limit_eval(r, m, DyadicPoint(k, m)) == DyadicPoint(k, m)

    def test_grid_versions_agree(self):
        r = seeded_corpus(1, 6, base_seed=3)[0]
        L = 7
        T = cascade_table(r, L)
        for n in range(5):
            g = fold_grid(r, n, L)
            for k in range(0, 1 << L, 7):
                assert Fraction(int(g[k]), 1 << L) == fold_eval(FoldSpec(r, n), DyadicPoint(k, L)).value
        for m in range(4):
            lg = limit_grid(r, m, L)
            assert np.array_equal(lg, T[m])
            for k in range(0, 1 << L, 9):
                assert Fraction(int(lg[k]), 1 << L) == limit_eval(r, m, DyadicPoint(k, L)).value
        cg = cascade_grid(r, 1, 3, L)
        for k in range(0, 1 << L, 5):
            assert Fraction(int(cg[k]), 1 << L) == cascade_eval(r, 1, 3, DyadicPoint(k, L)).value

    @pytest.mark.parametrize("rule", seeded_corpus(3, 7))
    def test_cascade_one_lipschitz(self, rule):
        L = 7
        for m, n in [(0, 0), (1, 3), (0, 4)]:
            src = build_index(rule, L, n + 1).matrix().astype(np.int64)
            dst = build_index(rule, L, m).matrix().astype(np.int64)
            F = cascade_grid(rule, m, n, L) % (1 << L)
            assert (dst[np.ix_(F, F)] <= src).all()


class TestIntervalImage:
    def test_identity(self):
        assert interval_image(FoldSpec(uniform_halve(4), 1), I(2, 1)) == (I(2, 1),)

    def test_fold_adds_adjacent(self):
        image = interval_image(FoldSpec(keep_at_root(4, ARC), 0), I(1, 0))
        assert image[0] == I(1, 0) and len(image) == 2
        assert image[1].level == 2 and image[1].index == 2

    def test_real_coordinate(self):
        assert real_coordinate(P("1/4"), CIRCLE) == Fraction(1, 4)
        assert real_coordinate(DyadicPoint(1, 0), ARC) == 1
