import itertools
from fractions import Fraction

import numpy as np
import pytest
from scipy.sparse.csgraph import shortest_path

from snowcircle.dyadic import ARC, CIRCLE, Dyadic, DyadicInterval, DyadicPoint, arclength
from snowcircle.metric import (MetricIndex, MetricKind, all_pairs_units, build_index, chain_unimodality_check,
                               is_chain_joining, is_minimal, levels_unimodal, reduce_chain)
from snowcircle.oracle import BruteForceOracle
from snowcircle.rules import keep_at_root, periodic_keep, seeded_corpus, uniform_halve


def P(text):
    return DyadicPoint.parse(text)


def I(level, index):
    return DyadicInterval(level, index)


class TestBuild:
    def test_counts(self):
        idx = build_index(uniform_halve(3), 3)
        assert (idx.vertex_count, idx.edge_count) == (8, 15)
        assert build_index(uniform_halve(3, ARC), 3).vertex_count == 9

    def test_truncated_zero_weights_at_depth_one(self):
        idx = build_index(keep_at_root(3), 1, MetricKind.truncated(0))
        assert sorted(w for _, _, _, w in idx.edges()) == [Fraction(1, 2), Fraction(1, 2), 1]

    def test_keep_at_root_level_one_weights(self):
        idx = build_index(keep_at_root(3), 2)
        assert idx.weight(I(1, 0)) == 1 and idx.weight(I(1, 1)) == 1

    def test_weights_are_powers_of_two(self):
        for rule in seeded_corpus(3, 7):
            for _, _, _, w in build_index(rule, 6).edges():
                assert w > 0 and w.mantissa == 1

    def test_kind_parse(self):
        assert MetricKind.parse("trunc:3") == MetricKind.truncated(3)
        assert MetricKind.parse("full").is_full
        with pytest.raises(ValueError):
            MetricKind.parse("trunc:x")


class TestDist:
    def test_all_halve(self):
        assert build_index(uniform_halve(4), 3).dist(P("1/8"), P("1/2")) == Fraction(3, 8)

    def test_keep_at_root(self):
        idx = build_index(keep_at_root(6), 6)
        assert idx.dist(P("0"), P("1/2")) == 1
        assert idx.dist(P("1/4"), P("3/4")) == 1

    def test_keep_at_root_truncated(self):
        assert build_index(keep_at_root(6), 6, "trunc:0").dist(P("0"), P("1/2")) == Fraction(1, 2)

    def test_d0_is_arclength(self):
        for rule in seeded_corpus(4, 6) + seeded_corpus(2, 6, topology=ARC):
            idx = build_index(rule, 5, 0)
            pts = idx.points()
            for x, y in itertools.combinations(pts, 2):
                assert idx.dist(x, y) == arclength(x, y, rule.topology)

    def test_all_halve_is_arclength(self):
        idx = build_index(uniform_halve(8), 8)
        L = 8
        k = np.arange(1 << L)
        expected = np.minimum(np.abs(k[:, None] - k[None, :]), (1 << L) - np.abs(k[:, None] - k[None, :]))
        assert np.array_equal(idx.matrix().astype(np.int64), expected)

    def test_point_outside_grid(self):
        with pytest.raises(ValueError):
            build_index(uniform_halve(3), 3).dist(P("1/16"), P("0"))

    @pytest.mark.parametrize("rule", seeded_corpus(4, 6) + [keep_at_root(6, ARC), periodic_keep(2, 6)])
    def test_metric_axioms(self, rule):
        D = build_index(rule, 6).matrix().astype(np.int64)
        n = len(D)
        assert np.array_equal(D, D.T)
        assert (np.diag(D) == 0).all()
        assert (D[~np.eye(n, dtype=bool)] > 0).all()
        for z in range(n):
            assert (D <= D[:, [z]] + D[[z], :]).all()

    @pytest.mark.parametrize("rule", seeded_corpus(4, 7))
    def test_depth_sufficiency(self, rule):
        coarse = build_index(rule, 5).matrix().astype(np.int64)
        fine = build_index(rule, 7).matrix().astype(np.int64)[::4, ::4]
        assert np.array_equal(coarse * 4, fine)

    def test_interval_endpoint_identity(self):
        rule = periodic_keep(2, 6)
        for n in range(5):
            idx = build_index(rule, 6, n)
            for m in range(1, n + 1):
                for i in range(1 << m):
                    iv = I(m, i)
                    a, b = iv.endpoints(CIRCLE)
                    assert idx.dist(a, b) == rule.delta(iv)
        assert build_index(keep_at_root(4), 4).dist(P("0"), P("1/2")) == 1
        assert build_index(uniform_halve(4), 4).dist(P("1/4"), P("3/8")) == Fraction(1, 8)

    def test_bottom_up_matches_lca_recursion(self):
        for rule in seeded_corpus(3, 6, base_seed=11):
            idx = build_index(rule, 6)
            D = idx.matrix()
            for x in range(0, 64, 5):
                for y in range(64):
                    assert D[x, y] == idx.dist_units(x, y)

    @pytest.mark.parametrize("rule", seeded_corpus(3, 7, base_seed=40) + seeded_corpus(2, 7, base_seed=40, topology=ARC)
                             + [keep_at_root(7), periodic_keep(2, 7)])
    def test_matches_dijkstra_on_covering_graph(self, rule):
        # independent route: generic shortest paths where one step from x to y costs the
        # diameter value of the smallest dyadic interval containing both
        L = 7
        idx = build_index(rule, L)
        n = idx.vertex_count

        def cover(x, y):
            m = max(k for k in range(L + 1) if x >> (L - k) == (y - 1) >> (L - k))
            return rule.delta(I(m, x >> (L - m))).units(L)

        W = np.zeros((n, n))
        for x in range(n):
            for y in range(x + 1, n):
                w = cover(x, y)
                if rule.topology is CIRCLE and x == 0:
                    # 0 is also the right endpoint 1 of the circle
                    w = min(w, cover(y, 1 << L))
                W[x, y] = W[y, x] = float(w)
        # integer weights below 2**20 are exact in float64
        want = shortest_path(W, method="D", directed=False).astype(np.int64)
        assert np.array_equal(idx.matrix().astype(np.int64), want)

    def test_all_pairs_units_direct(self):
        idx = build_index(keep_at_root(3), 3)
        assert np.array_equal(all_pairs_units(idx.weights, 3, True), idx.matrix())


class TestDiameters:
    def test_set_diameter(self):
        idx = build_index(uniform_halve(4), 4)
        assert idx.set_diameter([P("1/4")]) == 0
        assert idx.set_diameter([P("0"), P("1/4"), P("1/2")]) == Fraction(1, 2)
        assert build_index(keep_at_root(4), 4).set_diameter([P("0"), P("1/2")]) == 1
        with pytest.raises(ValueError):
            idx.set_diameter([])

    def test_subarc(self):
        idx = build_index(uniform_halve(4), 4)
        s = idx.subarc_diameter(P("0"), P("1/4"))
        assert (s.value, s.side) == (Fraction(1, 4), "forward")
        s = idx.subarc_diameter(P("0"), P("1/2"))
        assert (s.value, s.side) == (Fraction(1, 2), "tie")

    def test_subarc_arc(self):
        rule = keep_at_root(4, ARC)
        idx = build_index(rule, 4)
        oracle = BruteForceOracle(rule, "full", 6)
        pts = [DyadicPoint(k, 4) for k in range(4, 13)]
        want = max(oracle.dist(x, y) for x in pts for y in pts)
        assert idx.subarc_diameter(P("1/4"), P("3/4")).value == want

    def test_turning_constant(self):
        assert build_index(uniform_halve(6), 6).bounded_turning_constant().ratio == 1
        tc = build_index(keep_at_root(6), 6).bounded_turning_constant()
        assert tc.ratio >= 1
        assert tc.ratio == tc.subarc / tc.distance

    @pytest.mark.parametrize("rule", [keep_at_root(6), keep_at_root(6, ARC)])
    def test_turning_constant_matches_oracle(self, rule):
        # subarc diameters and distances taken from the exhaustive chain search
        oracle = BruteForceOracle(rule, "full", 6)
        n = 64
        size = n if rule.topology is CIRCLE else n + 1
        D = [[oracle.dist_units(x, y) for y in range(size)] for x in range(size)]

        circle = rule.topology is CIRCLE

        def arc_diam(a, b):
            # closed arc from a to b along the positive direction
            span = [(a + k) % n for k in range((b - a) % n + 1)] if circle else range(a, b + 1)
            return max(D[u][v] for u in span for v in span)

        best = Fraction(0)
        for x in range(size):
            for y in range(x + 1, size):
                sub = min(arc_diam(x, y), arc_diam(y, x)) if circle else arc_diam(x, y)
                best = max(best, Fraction(sub, D[x][y]))
        assert build_index(rule, 6).bounded_turning_constant().ratio == best

    def test_turning_constant_at_least_one(self):
        for rule in seeded_corpus(3, 5, topology=ARC) + seeded_corpus(3, 5):
            assert build_index(rule, 5).bounded_turning_constant().ratio >= 1

    def test_csv_exact(self):
        text = build_index(keep_at_root(2), 2).to_csv()
        rows = [r.split(",") for r in text.strip().splitlines()]
        assert rows[0] == ["point", "0", "1/4", "1/2", "3/4"]
        assert rows[1][3] == "1"
        assert all("." not in cell for row in rows for cell in row)


class TestChains:
    def test_all_halve_chain(self):
        idx = build_index(uniform_halve(4), 4)
        assert idx.minimal_chain(P("0"), P("3/8")) == [I(2, 0), I(3, 2)]

    def test_trivial_chains(self):
        idx = build_index(keep_at_root(4), 4)
        assert idx.minimal_chain(P("1/4"), P("1/4")) == []
        assert idx.minimal_chain(P("1/4"), P("3/8")) == [I(3, 2)]

    @pytest.mark.parametrize("rule", seeded_corpus(5, 7) + [keep_at_root(7, ARC)])
    def test_chain_properties(self, rule):
        idx = build_index(rule, 7)
        rng = np.random.default_rng(0)
        for _ in range(200):
            x, y = (idx.point_of(int(k)) for k in rng.integers(0, idx.vertex_count, 2))
            chain = idx.minimal_chain(x, y)
            assert idx.chain_cost(chain) == idx.dist(x, y)
            assert is_minimal(chain)
            assert is_chain_joining(chain, x, y, rule.topology)
            assert chain_unimodality_check(chain, rule.topology)

    def test_is_minimal_examples(self):
        assert not is_minimal([I(1, 0), I(1, 1)])
        assert is_minimal([I(1, 0), I(2, 2)])
        assert not is_minimal([I(2, 1), I(2, 1)])

    def test_unimodality_examples(self):
        assert chain_unimodality_check([I(3, 0), I(2, 1), I(1, 1)])
        assert not levels_unimodal([1, 3, 1, 3])
        assert levels_unimodal([3, 2, 2, 3])
        with pytest.raises(ValueError):
            chain_unimodality_check([I(1, 0), I(1, 1)])

    def test_reduce_chain(self):
        assert reduce_chain([I(2, 0), I(3, 2), I(3, 3)]) == [I(1, 0)]
        assert reduce_chain([I(1, 0), I(2, 1)]) == [I(1, 0)]
