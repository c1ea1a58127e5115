import json

import numpy as np
import pytest

from snowcircle.dyadic import ARC, CIRCLE, Dyadic, DyadicInterval
from snowcircle.rules import (DiameterRule, RuleError, generate, keep_at_root, periodic_keep,
                              seeded_corpus, seeded_random, uniform_halve)


def I(level, index):
    return DyadicInterval(level, index)


class TestDelta:
    def test_all_halve(self):
        assert uniform_halve(5).delta(I(3, 5)) == Dyadic.parse("1/8")

    def test_keep_at_root(self):
        r = keep_at_root(4)
        assert r.delta(I(1, 0)) == 1
        assert r.delta(I(2, 1)) == Dyadic.parse("1/2")
        assert r.delta(I(0, 0)) == 1

    def test_truncated(self):
        r = keep_at_root(4)
        assert r.delta_truncated(0, I(1, 0)) == Dyadic.parse("1/2")
        assert r.delta_truncated(1, I(1, 0)) == 1

    def test_truncation_zero_is_length(self):
        for r in seeded_corpus(5, 6):
            for m in range(7):
                for i in range(0, 1 << m, max(1, (1 << m) // 5)):
                    assert r.delta_truncated(0, I(m, i)) == Dyadic.power(m)

    def test_max_level_diameter(self):
        assert uniform_halve(6).max_level_diameter(4) == Dyadic.parse("1/16")
        assert keep_at_root(6).max_level_diameter(1) == 1
        assert keep_at_root(6).max_level_diameter(3) == Dyadic.parse("1/4")

    def test_beyond_depth_halves(self):
        r = keep_at_root(2)
        assert r.delta(I(5, 0)) == Dyadic.power(4)


class TestInvariants:
    @pytest.mark.parametrize("rule", seeded_corpus(6, 8) + [periodic_keep(2, 8), keep_at_root(8)])
    def test_children_keep_or_halve(self, rule):
        for m in range(10):
            e, e1 = rule.exponents(m), rule.exponents(m + 1)
            step = e1 - np.repeat(e, 2)
            assert set(np.unique(step)) <= {0, 1}
            assert np.array_equal(step[0::2], step[1::2])

    @pytest.mark.parametrize("rule", seeded_corpus(6, 8))
    def test_truncation_below_full_and_equal_above(self, rule):
        for n in range(9):
            for m in range(11):
                full, trunc = rule.exponents(m), rule.truncated_exponents(n, m)
                assert (trunc >= full).all()
                if m <= n:
                    assert np.array_equal(trunc, full)

    @pytest.mark.parametrize("rule", seeded_corpus(6, 10, cap=2) + [periodic_keep(3, 10)])
    def test_decay_bound(self, rule):
        K = rule.max_consecutive_keeps
        for n in range(14):
            assert rule.max_level_exponent(n) >= n // (K + 1)


class TestGenerate:
    def test_uniform(self):
        r = generate("uniform-halve", 5)
        for m in range(6):
            assert (r.exponents(m) == m).all()

    def test_periodic(self):
        r = periodic_keep(2, 4)
        assert [bool(k.all()) for k in r.keeps] == [True, False, True, False]
        assert [bool(k.any()) for k in r.keeps] == [True, False, True, False]

    def test_seeded_deterministic(self):
        assert seeded_random(0.5, 7, 3, 10).to_json() == seeded_random(0.5, 7, 3, 10).to_json()
        assert seeded_random(0.5, 7, 3, 10) != seeded_random(0.5, 8, 3, 10)

    def test_cap_respected(self):
        r = seeded_random(0.9, 1, 2, 10)
        assert r.max_consecutive_keeps == 2

    @pytest.mark.parametrize("kwargs", [dict(p=1.0, seed=0, cap=3), dict(p=-0.1, seed=0, cap=3),
                                        dict(p=0.5, seed=0, cap=0)])
    def test_rejects_bad_parameters(self, kwargs):
        with pytest.raises(RuleError):
            seeded_random(depth=4, **kwargs)

    def test_cap_zero_without_keeps(self):
        assert seeded_random(0.0, 0, 0, 4).is_uniform

    def test_unknown_kind(self):
        with pytest.raises(RuleError):
            generate("fancy", 3)

    def test_cap_violation_rejected(self):
        keeps = (np.array([True]), np.array([True, True]))
        with pytest.raises(RuleError):
            DiameterRule(CIRCLE, 2, keeps, 1)


class TestSerialization:
    @pytest.mark.parametrize("rule", [uniform_halve(3), keep_at_root(4, ARC), seeded_random(0.5, 3, 3, 7)])
    def test_round_trip(self, rule, tmp_path):
        path = tmp_path / "rule.json"
        rule.save(path)
        back = DiameterRule.load(path)
        assert back == rule and back.hash == rule.hash
        assert back.to_json() == rule.to_json()

    def test_file_format(self):
        data = json.loads(uniform_halve(2).to_json())
        assert data["topology"] == "circle" and data["tail"] == "halve"
        assert data["decisions"] == {"0:0": "halve", "1:0": "halve", "1:1": "halve"}
        assert data["max_consecutive_keeps"] == 0

    @pytest.mark.parametrize("text", ["{", "[]", '{"topology": "circle"}',
                                      '{"topology": "torus", "depth": 1, "max_consecutive_keeps": 0}',
                                      '{"topology": "circle", "depth": 1, "max_consecutive_keeps": 0, '
                                      '"decisions": {"0:0": "maybe"}}',
                                      '{"topology": "circle", "depth": 1, "max_consecutive_keeps": 0, '
                                      '"decisions": {"0:0": "keep"}}'])
    def test_malformed(self, text):
        with pytest.raises(RuleError):
            DiameterRule.from_json(text)

    def test_depth_budget(self, monkeypatch):
        monkeypatch.setenv("SNOWCIRCLE_MAX_DEPTH", "5")
        with pytest.raises(RuleError):
            uniform_halve(6)
