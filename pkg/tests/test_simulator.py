from fractions import Fraction as F
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as O
from polar_mismatch.channel import make_bsc, pair, ternary_counterexample_channel
from polar_mismatch.construction import CodeSpec, build_info_set
from polar_mismatch.simulator import (EXACT_MAX_N, ChannelSampler, SimConfig, SimReport,
                                      encode, run_monte_carlo, sample_channel, scd_decode,
                                      trial_rng, wilson_interval)


def binomial_ok(k, n, p, z=4.0):
    return abs(k - n * p) <= z * np.sqrt(n * p * (1 - p)) + 1


class TestEncode:
    def test_examples(self):
        assert encode([0] * 8).tolist() == [0] * 8
        assert encode([1, 0]).tolist() == [1, 0]
        assert encode([0, 1]).tolist() == [1, 1]
        for N in (2, 4, 8, 16):
            e = [0] * (N - 1) + [1]
            assert encode(e).tolist() == [1] * N

    @pytest.mark.parametrize("n", [0, 1, 2, 3])
    def test_all_messages(self, n):
        N = 1 << n
        msgs = np.array(list(product((0, 1), repeat=N)), dtype=np.int8)
        got = encode(msgs)
        for u, x in zip(msgs, got):
            assert tuple(x) == O.encode(u, n)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(4, 5).flatmap(lambda n: st.lists(st.integers(0, 1),
                                                          min_size=1 << n, max_size=1 << n)))
    def test_against_generator(self, u):
        n = len(u).bit_length() - 1
        assert tuple(encode(u)) == O.encode(u, n)

    def test_linear(self):
        rng = np.random.default_rng(3)
        a, b = rng.integers(0, 2, (2, 32), dtype=np.int8)
        assert (encode(a ^ b) == encode(a) ^ encode(b)).all()

    def test_bad_length(self):
        with pytest.raises(ValueError):
            encode([0, 1, 0])


class TestSampling:
    def test_noiseless(self):
        x = np.random.default_rng(0).integers(0, 2, 1000)
        y = sample_channel(make_bsc(0), x, np.random.default_rng(1))
        assert (y == x).all()

    def test_pure_noise(self):
        n = 20000
        x = np.random.default_rng(0).integers(0, 2, n)
        y = sample_channel(make_bsc("1/2"), x, np.random.default_rng(2))
        lo, hi = O.wilson(int((y != x).sum()), n)
        assert lo <= 0.5 <= hi
        # output does not depend on the input
        assert binomial_ok(int(y[x == 1].sum()), int((x == 1).sum()), 0.5)

    def test_ternary_frequencies(self):
        ch = ternary_counterexample_channel()
        n = 30000
        y = sample_channel(ch, np.zeros(n, dtype=np.int8), np.random.default_rng(5))
        for k, p in enumerate((0.4, 0.5, 0.1)):
            lo, hi = O.wilson(int((y == k).sum()), n)
            assert lo <= p <= hi

    def test_involution_map(self):
        s = ChannelSampler(ternary_counterexample_channel())
        assert s.total == 10
        r = np.arange(10)
        assert s.map(np.zeros(10), r).tolist() == [0] * 4 + [1] * 5 + [2]
        assert s.map(np.ones(10), r).tolist() == [2] * 4 + [1] * 5 + [0]


class TestDecode:
    def test_single_step(self):
        spec = CodeSpec(1, (2,))
        res = scd_decode(["0", "0"], spec, make_bsc("3/10"))
        assert res.u_hat.tolist() == [0, 0]
        p0, p1 = res.stage_values[1]
        assert F(p1, p0) == F(9, 49)
        assert not res.ties.any()

    def test_noiseless_recovery(self):
        rng = np.random.default_rng(8)
        v = make_bsc(0)
        spec = CodeSpec(3, (3, 5, 6, 7, 8), (1, 0, 1))
        for _ in range(20):
            u = np.zeros(8, dtype=np.int8)
            for i, b in spec.frozen_map().items():
                u[i - 1] = b
            for i in spec.info_set:
                u[i - 1] = rng.integers(0, 2)
            res = scd_decode(encode(u), spec, v)
            assert (res.u_hat == u).all()

    def test_all_tie_metric(self):
        # a pure-noise metric cannot distinguish anything: decisions are coins
        spec = CodeSpec(2, (1, 2, 3, 4))
        v = make_bsc("1/2")
        rng = np.random.default_rng(4)
        wrong = 0
        trials = 2000
        for _ in range(trials):
            res = scd_decode(["0"] * 4, spec, v, rng=rng)
            assert res.ties.all()
            wrong += int(res.u_hat.sum())
        lo, hi = O.wilson(wrong, 4 * trials)
        assert lo <= 0.5 <= hi

    def test_explicit_coins(self):
        spec = CodeSpec(1, (1, 2))
        v = make_bsc("1/2")
        assert scd_decode([0, 1], spec, v, coins=[1, 0]).u_hat.tolist() == [1, 0]
        assert scd_decode([0, 1], spec, v, coins=[0, 1]).u_hat.tolist() == [0, 1]

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            scd_decode([0, 1, 0], CodeSpec(1, (2,)), make_bsc("1/5"))

    def test_float_agrees(self):
        v = make_bsc("1/5")
        spec = build_info_set(v, 4, size=8)
        rng = np.random.default_rng(12)
        for _ in range(50):
            y = rng.integers(0, 2, 16)
            coins = rng.integers(0, 2, 16)
            a = scd_decode(y, spec, v, coins=coins)
            b = scd_decode(y, spec, v, arithmetic="log_float", coins=coins)
            assert (a.u_hat == b.u_hat).all()
            assert (a.ties == b.ties).all()

    def test_no_ties_on_all_minus_index(self):
        # the minus map never returns LR one from inputs other than one
        v = make_bsc("1/10")
        spec = CodeSpec(3, (1,))
        for y in product((0, 1), repeat=8):
            assert not scd_decode(list(y), spec, v).ties.any()


class TestMonteCarlo:
    def setup_method(self):
        self.v = make_bsc("1/10")
        self.spec = build_info_set(self.v, 4, size=4)

    def test_config_errors(self):
        p = pair(self.v, self.v)
        with pytest.raises(ValueError):
            SimConfig(p, self.spec, trials=0)
        with pytest.raises(ValueError):
            SimConfig(p, self.spec, trials=10, seed=-1)
        with pytest.raises(ValueError):
            SimConfig(p, self.spec, trials=10, arithmetic="float16")
        big = CodeSpec(11, (2048,))
        with pytest.raises(ValueError, match=str(EXACT_MAX_N)):
            SimConfig(p, big, trials=1)
        SimConfig(p, big, trials=1, arithmetic="log_float")

    def test_deterministic(self):
        p = pair(self.v, self.v)
        base = run_monte_carlo(SimConfig(p, self.spec, 600, seed=3), with_bound=False)
        small = run_monte_carlo(SimConfig(p, self.spec, 600, seed=3, batch=37),
                                with_bound=False)
        split = run_monte_carlo(SimConfig(p, self.spec, 600, seed=3, workers=2),
                                with_bound=False)
        other = run_monte_carlo(SimConfig(p, self.spec, 600, seed=4), with_bound=False)
        assert base == small == split
        assert base != other

    def test_trace(self):
        p = pair(self.v, self.v)
        rep = run_monte_carlo(SimConfig(p, self.spec, 50, seed=1, keep_trace=True,
                                        workers=2), with_bound=False)
        assert [r[0] for r in rep.trace] == list(range(50))
        assert sum(r[2] for r in rep.trace) == rep.block_errors
        assert rep.trace_csv().splitlines()[0] == "trial,bit_errors,block_error,ties"

    def test_trial_streams(self):
        a = trial_rng(5, 0).integers(0, 2 ** 32, 4)
        b = trial_rng(5, 1).integers(0, 2 ** 32, 4)
        assert (a != b).any()
        assert (trial_rng(5, 0).integers(0, 2 ** 32, 4) == a).all()

    def test_matched_below_bound(self):
        rep = run_monte_carlo(SimConfig(pair(self.v, self.v), self.spec, 10000, seed=11))
        assert rep.analytic_bound == sum(m.pe for m in self.spec.per_index
                                         if m.i in self.spec.info_set)
        assert rep.bler_hat <= float(rep.analytic_bound) + 3 * rep.bound_sigma()
        assert not rep.exceeds_bound(3)

    def test_mismatched_not_worse(self):
        v = make_bsc("1/5")
        spec = build_info_set(v, 4, size=4)
        wv = run_monte_carlo(SimConfig(pair(make_bsc("1/10"), v), spec, 10000, seed=2))
        vv = run_monte_carlo(SimConfig(pair(v, v), spec, 10000, seed=2))
        slack = 3 * np.hypot(wv.sigma, vv.sigma)
        assert wv.bler_hat <= vv.bler_hat + slack

    def test_exceeds_bound(self):
        rep = SimReport(10000, 500, 600, 0, 0, F(1, 100))
        assert rep.exceeds_bound(5)
        assert not SimReport(10000, 100, 100, 0, 0, F(1, 100)).exceeds_bound(5)
        assert not SimReport(10000, 100, 100, 0, 0).exceeds_bound(5)

    def test_as_dict(self):
        d = SimReport(100, 3, 4, 0, 0, F(1, 50)).as_dict()
        assert d["analytic_bound"] == "1/50" and d["bler_hat"] == 0.03


@pytest.mark.parametrize("k, n", [(0, 10), (3, 100), (50, 100), (100, 100), (2752, 100000)])
def test_wilson(k, n):
    lo, hi = wilson_interval(k, n)
    rlo, rhi = O.wilson(k, n)
    assert lo == pytest.approx(max(0.0, rlo), abs=1e-12)
    assert hi == pytest.approx(min(1.0, rhi), abs=1e-12)
