from decimal import Decimal, getcontext
from fractions import Fraction as F

import gmpy2
import pytest
from hypothesis import given, settings

import oracles as O
from polar_mismatch.channel import LrSpectrum, counterexample_pair, make_bsc
from polar_mismatch.evolution import MINUS, PLUS, transform_plus
from polar_mismatch.metrics import (TieSplit, ZValue, bhattacharyya, check_p_diff_identity,
                                    check_pe_minus_recursion, check_z_plus_squaring, h_tie,
                                    k_constant, metric_row, pe, tie_split)
from strategies import pairs

BSC3 = make_bsc("3/10").spectrum()
CE = counterexample_pair()
W0, V0 = CE.mismatched_spectrum(), CE.design_spectrum()
ALL_TIE = LrSpectrum.from_masses({1: 1})


law = O.law_of


@pytest.mark.parametrize("lr, h", [(F(1, 2), 0), (1, F(1, 2)), (F(7, 3), 1), (0, 0)])
def test_h_tie(lr, h):
    assert h_tie(lr) == h


class TestPe:
    def test_values(self):
        assert pe(W0) == F(3, 10)
        assert pe(V0) == F(7, 20)
        assert pe(ALL_TIE) == F(1, 2)

    def test_split(self):
        t = tie_split(BSC3)
        assert (t.p_lt, t.p_eq, t.p_gt) == (F(7, 10), 0, F(3, 10))
        t = tie_split(transform_plus(BSC3))
        assert (t.p_lt, t.p_eq, t.p_gt) == (F(49, 100), F(21, 50), F(9, 100))
        t = tie_split(ALL_TIE)
        assert (t.p_lt, t.p_eq, t.p_gt) == (0, 1, 0)

    def test_split_must_sum_to_one(self):
        with pytest.raises(ValueError):
            TieSplit(F(1, 2), F(1, 2), F(1, 2))

    @settings(max_examples=60, deadline=None)
    @given(pairs())
    def test_pe_consistent_with_split(self, p):
        for s in (p.mismatched_spectrum(), p.design_spectrum()):
            t = tie_split(s)
            assert pe(s) == t.p_gt + t.p_eq / 2 == t.pe
            assert pe(s) == O.pe(law(s))


class TestBhattacharyya:
    def test_bsc_closed_form(self):
        z = bhattacharyya(BSC3)
        getcontext().prec = 80
        ref = 2 * Decimal(21).sqrt() / 10
        assert z.exact is None
        assert z.lo <= z.hi
        assert abs(Decimal(str(gmpy2.mpfr(z.lo, 256))) - ref) < Decimal("1e-70")
        assert str(z).startswith("0.91651513899116800131760943874560169779")

    def test_rational_cases(self):
        assert bhattacharyya(ALL_TIE).exact == 1
        assert bhattacharyya(LrSpectrum.from_masses({0: 1})).exact == 0
        assert bhattacharyya(W0).exact == F(19, 20)

    def test_enclosure_width(self):
        z = bhattacharyya(BSC3)
        assert float(z.error_bound) < 1e-70

    def test_matches_decimal_oracle(self):
        s = transform_plus(counterexample_pair().design_spectrum())
        z = bhattacharyya(s)
        assert abs(float(z) - float(O.bhattacharyya(law(s)))) < 1e-15

    def test_infinite_lr_rejected(self):
        with pytest.raises(ValueError):
            bhattacharyya(LrSpectrum.from_masses({1: F(1, 2), float("inf"): F(1, 2)}))

    def test_sign_minus(self):
        lo = bhattacharyya(BSC3)
        hi = bhattacharyya(make_bsc("2/5").spectrum())
        assert lo.sign_minus(hi) == -1 and hi.sign_minus(lo) == 1
        assert lo.sign_minus(lo) is None
        one = bhattacharyya(ALL_TIE)
        assert one.sign_minus(one) == 0

    @settings(max_examples=60, deadline=None)
    @given(pairs())
    def test_pe_below_z(self, p):
        # pointwise h(l) <= sqrt(l) makes this hold for any law
        s = p.mismatched_spectrum()
        z = bhattacharyya(s)
        assert pe(s) <= (z.exact if z.exact is not None else z.hi)


class TestK:
    def test_values(self):
        assert k_constant(BSC3, BSC3) == F(4, 5)
        assert k_constant(W0, V0) == F(7, 10)
        assert k_constant(ALL_TIE, ALL_TIE) == 0


class TestIdentities:
    def test_pe_minus_recursion_counterexample(self):
        rep = check_pe_minus_recursion(W0, V0)
        assert rep.holds and rep.lhs == rep.rhs == F(-7, 200)

    def test_pe_minus_recursion_matched(self):
        rep = check_pe_minus_recursion(BSC3, BSC3)
        assert rep.holds and rep.lhs == 0

    def test_p_diff_counterexample_plus(self):
        rep = check_p_diff_identity(W0, V0, PLUS)
        # enumeration: W+ has P[>=1] = 9/100 + 21/50, V+ has 11/100 + 33/100
        assert rep.holds and rep.lhs == rep.rhs == F(7, 100)

    def test_p_diff_matched(self):
        for step in (PLUS, MINUS):
            rep = check_p_diff_identity(BSC3, BSC3, step)
            assert rep.holds and rep.lhs == 0

    def test_z_squaring(self):
        rep = check_z_plus_squaring(BSC3)
        assert rep.holds
        assert bhattacharyya(transform_plus(BSC3)).exact == F(21, 25)
        rep = check_z_plus_squaring(W0)
        assert rep.lhs.exact == F(361, 400) == rep.rhs.exact
        assert check_z_plus_squaring(ALL_TIE).holds

    def test_report_dict(self):
        d = check_pe_minus_recursion(W0, V0).as_dict()
        assert d["lhs"] == "-7/200" and d["holds"] is True

    @settings(max_examples=60, deadline=None)
    @given(pairs())
    def test_identities_random(self, p):
        s, t = p.mismatched_spectrum(), p.design_spectrum()
        assert check_pe_minus_recursion(s, t).holds
        assert check_p_diff_identity(s, t, PLUS).holds
        assert check_p_diff_identity(s, t, MINUS).holds
        assert check_z_plus_squaring(s).holds


def test_metric_row():
    row = metric_row("+", transform_plus(BSC3))
    assert row["path"] == "+" and row["N"] == 2 and row["i"] == 2
    assert (row["p_lt"], row["p_eq"], row["p_gt"], row["pe"]) == ("49/100", "21/50", "9/100",
                                                                   "3/10")
    assert row["z"] == "0.84"


def test_zvalue_square_contains_product():
    z = bhattacharyya(BSC3)
    sq = z.square()
    assert sq.lo <= gmpy2.mpfr("0.84", 256) <= sq.hi
    assert isinstance(z, ZValue)
