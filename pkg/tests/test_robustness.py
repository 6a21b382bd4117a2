from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings

import oracles as O
from polar_mismatch.channel import (counterexample_pair, make_bec, make_bsc, pair,
                                    ternary_counterexample_channel)
from polar_mismatch.evolution import EvolutionLimits, all_paths
from polar_mismatch.metrics import TieSplit
from polar_mismatch.robustness import (Variant, binary_dominated, check_bounds,
                                       check_conditions, check_info_set_inclusion,
                                       check_monotone_conditional, check_pe_z_alignment,
                                       evaluate_conditions, identity_checks,
                                       indicator_dominance, mass_ordering_preserved,
                                       random_robust_pair, sweep_preservation, w_ordering_holds,
                                       track_tie_process, walk_tree)
from strategies import pairs

BSC_PAIR = pair(make_bsc("1/10"), make_bsc("1/5"))
CE = counterexample_pair()


def oracle_splits(p, depth):
    """Tie splits of both laws at every node, by dictionary double sums."""
    w, v = O.law_of(p.mismatched_spectrum()), O.law_of(p.design_spectrum())
    # joint evolution: carry the pair of masses on a shared support
    joint = {lr: (w.get(lr, 0), v.get(lr, 0)) for lr in set(w) | set(v)}
    out = {}
    level = {"": joint}
    for d in range(depth + 1):
        nxt = {}
        for path, law in level.items():
            out[path] = tuple(O.split({k: m[r] for k, m in law.items()}) for r in (0, 1))
            if d == depth:
                continue
            for step, f in (("-", O.minus_map), ("+", O.plus_map)):
                child: dict = {}
                for l1, (a1, b1) in law.items():
                    for l2, (a2, b2) in law.items():
                        key = f(l1, l2)
                        x, y = child.get(key, (0, 0))
                        child[key] = (x + a1 * a2, y + b1 * b2)
                nxt[path + step] = child
        level = nxt
    return out


class TestConditions:
    def test_bsc_root_margins(self):
        rep = check_conditions(BSC_PAIR, "")
        assert rep.holds
        assert (rep.a.margin, rep.b.margin, rep.c.margin) == (F(3, 5), F(1, 10), F(1, 10))

    def test_counterexample_strict_root(self):
        rep = check_conditions(CE, "", Variant.STRICT)
        assert rep.a.holds and rep.b.holds and rep.c is None
        assert rep.a.margin == F(3, 10)
        assert rep.b.margin == F(1, 20)
        assert rep.pe_diff == F(-1, 20)

    def test_counterexample_strict_plus(self):
        rep = check_conditions(CE, "+", "strict")
        assert rep.a.holds and not rep.b.holds
        assert rep.w_split.pe == F(3, 10) and rep.v_split.pe == F(11, 40)

    def test_matched_zero_margins(self):
        p = pair(make_bsc("3/10"), make_bsc("3/10"))
        for r in sweep_preservation(p, 3).reports:
            assert r.b.margin == 0 and r.c.margin == 0 and r.holds

    def test_margin_sign_consistency(self):
        for r in sweep_preservation(CE, 2, "weak").reports:
            for c in (r.a, r.b, r.c):
                assert c.holds == (c.margin >= 0)

    def test_variant_parse(self):
        assert Variant.parse("weak") is Variant.WEAK
        assert Variant.parse("theorem3_strict") is Variant.STRICT
        with pytest.raises(ValueError):
            Variant.parse("medium")

    def test_row(self):
        row = check_conditions(CE, "", "strict").as_row()
        assert row["margin_b"] == "1/20" and row["margin_c"] == ""


class TestSweep:
    def test_node_count_and_order(self):
        res = sweep_preservation(BSC_PAIR, 4)
        assert len(res.reports) == 31
        assert [r.path.steps for r in res.reports[:3]] == ["", "-", "+"]

    def test_bsc_sweep_against_oracle(self):
        res = sweep_preservation(BSC_PAIR, 4)
        ref = oracle_splits(BSC_PAIR, 4)
        for r in res.reports:
            w, v = ref[r.path.steps]
            assert (r.w_split.p_lt, r.w_split.p_eq, r.w_split.p_gt) == w
            assert (r.v_split.p_lt, r.v_split.p_eq, r.v_split.p_gt) == v

    def test_bsc_sweep_outcome(self):
        # the design tie mass outgrows the true one along "+---": only C breaks there
        res = sweep_preservation(BSC_PAIR, 4)
        failing = [r for r in res.reports if not r.holds]
        assert [r.path.steps for r in failing] == ["+---"]
        bad = failing[0]
        assert bad.a.holds and bad.b.holds and not bad.c.holds
        assert res.violations == [("+---", "A/B/C not preserved")]
        assert all(r.holds for r in res.reports if len(r.path.steps) <= 3)

    def test_counterexample_plus_violation(self):
        res = sweep_preservation(CE, 1, Variant.STRICT)
        assert res.plus_violations == ["+"]
        assert res.violations == []
        assert res.hypothesis_met

    def test_reversed_bsc_hypothesis_unmet(self):
        res = sweep_preservation(pair(make_bsc("1/5"), make_bsc("1/10")), 2)
        assert not res.hypothesis_met
        assert not res.root.b.holds

    def test_weak_counterexample_to_preservation(self):
        # smallest seeded witness: the conditions hold at the root and fail after one plus step
        w = _table_channel([F(10, 19), F(3, 19), 0, F(6, 19)])
        v = _table_channel([F(9, 19), F(1, 19), F(3, 19), F(6, 19)])
        p = pair(w, v)
        res = sweep_preservation(p, 1)
        assert res.hypothesis_met
        plus = res.reports[2]
        assert plus.path.steps == "+"
        assert plus.w_split.p_ge == F(105, 361) and plus.v_split.p_ge == F(82, 361)
        assert not plus.b.holds and not plus.c.holds
        tabs = [[O.as_fraction(x) for x in c] for c in (w.p0, w.p1, v.p0, v.p1)]
        law = O.synthesized_law(*tabs, 1, 2)
        lt, eq, gt = O.split(law)
        assert eq + gt == F(105, 361)

    def test_tree_keys(self):
        tree = sweep_preservation(CE, 1, "strict").tree()
        assert set(tree) == {"", "-", "+"}

    def test_truncation_recorded(self):
        p = pair(ternary_counterexample_channel(), ternary_counterexample_channel())
        res = sweep_preservation(p, 5, limits=EvolutionLimits(max_support=30))
        assert res.truncated
        assert res.reports  # partial sweep still reported


def _table_channel(p0):
    from strategies import channel_from_table
    return channel_from_table(p0, [("0", "1"), ("2", "3")])


class TestTieProcess:
    def test_counterexample_root(self):
        trace = track_tie_process(CE, 1)
        step = trace.steps[0]
        assert step.p == 0 and step.p_minus == 0 and step.p_plus == F(21, 50)
        assert step.gap == F(21, 100) and trace.ok

    def test_ternary_own_measure(self):
        v = ternary_counterexample_channel()
        step = track_tie_process(pair(v, v), 1).steps[0]
        assert step.p == F(1, 2)
        assert step.p_minus == F(3, 4) and step.p_plus == F(33, 100)
        assert step.p_minus + step.p_plus >= 1

    def test_all_tie(self):
        p = pair(make_bsc("1/2"), make_bsc("1/2"))
        trace = track_tie_process(p, 3)
        assert all(s.gap == 0 for s in trace.steps)
        assert all(v == 1 for lvl in trace.levels for v in lvl.values())

    @settings(max_examples=25, deadline=None)
    @given(pairs())
    def test_submartingale_random(self, p):
        trace = track_tie_process(p, 2)
        assert trace.ok
        assert all(0 <= v <= 1 for lvl in trace.levels for v in lvl.values())


class TestMonotone:
    def test_bsc_plus(self):
        p = pair(make_bsc("3/10"), make_bsc("3/10"))
        entries = {(e.transform, e.kind): e for e in check_monotone_conditional(p, "")}
        e = entries[("plus", ">=")]
        assert (e.given_0, e.given_1, e.status) == (F(3, 10), 1, "holds")

    def test_degenerate(self):
        p = pair(make_bsc("1/2"), make_bsc("1/2"))
        statuses = {e.status for e in check_monotone_conditional(p, "")}
        assert statuses == {"degenerate"}

    def test_counterexample_minus(self):
        entries = check_monotone_conditional(CE, "")
        minus = [e for e in entries if e.transform == "minus"]
        assert minus and all(e.status == "holds" for e in minus)

    def test_minus_skipped_when_hypothesis_fails(self):
        p = pair(make_bsc("1/2"), make_bsc("1/5"))
        # true channel is pure noise: P_W[L<=1] = P_W[L>=1] still allows the check
        entries = check_monotone_conditional(pair(_flipped(), make_bsc("1/5")), "")
        assert any(e.status == "skipped" for e in entries)
        assert p is not None


def _flipped():
    # BSC(4/5) written directly: mass sits above the metric's threshold
    from polar_mismatch.channel import make_symmetric
    return make_symmetric([("0", "1/5", "4/5"), ("1", "4/5", "1/5")], [("0", "1")])


class TestAlignment:
    def test_matched_boundary(self):
        p = pair(make_bsc("1/10"), make_bsc("1/10"))
        assert {e.verdict for e in check_pe_z_alignment(p, 2)} == {"boundary"}

    def test_bsc_aligned(self):
        entries = check_pe_z_alignment(BSC_PAIR, 3)
        assert len(entries) == 15
        assert {e.verdict for e in entries} == {"aligned"}

    def test_counterexample_plus(self):
        entries = {e.path.steps: e for e in check_pe_z_alignment(CE, 1)}
        e = entries["+"]
        assert e.pe_sign == 1 and e.z_sign == 1 and e.verdict == "aligned"


class TestBounds:
    def test_bsc_pair(self):
        for b in check_bounds(BSC_PAIR, 3):
            assert b.ordering and b.pe_below_z is True
            verdict = b.pe_below_matched()
            assert verdict in (True, None)
            if b.tie_v == 0:
                assert verdict is True

    def test_threshold(self):
        b = [x for x in check_bounds(BSC_PAIR, 1) if x.path.steps == "+"][0]
        assert b.pe_below_matched() is None
        assert b.pe_below_matched(F(1)) is True


class TestHelpers:
    def test_binary_dominance(self):
        assert binary_dominated(F(1, 10), F(1, 5))
        assert not binary_dominated(F(1, 5), F(1, 10))

    def test_indicator_dominance(self):
        d = indicator_dominance(TieSplit(F(9, 10), 0, F(1, 10)), TieSplit(F(4, 5), 0, F(1, 5)))
        assert d == {"ge_w_below_v": True, "le_w_above_v": True}

    def test_mass_ordering(self):
        assert mass_ordering_preserved(ternary_counterexample_channel().spectrum()) == (True, True)

    def test_evaluate_conditions_defaults(self):
        rep = evaluate_conditions(TieSplit(F(1, 2), 0, F(1, 2)), TieSplit(F(1, 2), 0, F(1, 2)))
        assert rep.holds and rep.path.steps == ""

    def test_identity_checks(self):
        reports = identity_checks(CE, 2)
        assert reports and all(r.holds for _, r in reports)

    def test_walk_materialize(self):
        nodes = list(walk_tree(CE, 2, materialize_leaves=True))
        assert len(nodes) == 7
        assert all((n.laws is not None) == (len(n.path.steps) == 2) for n in nodes)

    def test_random_robust_pair(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            assert sweep_preservation(random_robust_pair(rng), 0).hypothesis_met


class TestInclusion:
    def test_bsc(self):
        rep = check_info_set_inclusion(make_bsc("1/5"), make_bsc("1/10"), 8, 4)
        assert rep["included"]

    def test_same(self):
        rep = check_info_set_inclusion(make_bsc("1/5"), make_bsc("1/5"), 8, 4)
        assert rep["a_v"] == rep["a_w"]

    def test_informational(self):
        rep = check_info_set_inclusion(make_bec("1/2"), make_bsc("1/10"), 8, 4)
        assert len(rep["a_v"]) == 4 and isinstance(rep["included"], bool)


def test_all_paths_used_in_sweep():
    res = sweep_preservation(CE, 2, "strict")
    assert {r.path.steps for r in res.reports} == {p.steps for d in range(3) for p in all_paths(d)}


class TestProperties:
    @settings(max_examples=60, deadline=None)
    @given(pairs())
    def test_own_measure_mass_ordering(self, p):
        assert mass_ordering_preserved(p.design_spectrum()) == (True, True)

    @settings(max_examples=60, deadline=None)
    @given(pairs())
    def test_strict_conditions_order_true_law(self, p):
        for r in sweep_preservation(p, 1, "strict").reports:
            if r.a.holds and r.b.holds:
                assert w_ordering_holds(r.w_split)

    @settings(max_examples=60, deadline=None)
    @given(pairs())
    def test_strict_minus_preservation(self, p):
        res = sweep_preservation(p, 2, "strict")
        assert res.violations == []
        for r in res.reports:
            assert r.a.holds or r.path.steps == ""

    @settings(max_examples=40, deadline=None)
    @given(pairs())
    def test_conditional_monotone(self, p):
        for e in check_monotone_conditional(p, ""):
            assert e.status != "violated"
