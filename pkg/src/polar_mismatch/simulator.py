"""Polar encoding, channel sampling and successive-cancellation decoding.

The encoder is the natural-order butterfly ``x = [enc(u1 ^ u2), enc(u2)]``
on the two halves of ``u``.  The decoder walks the same recursion, so the
bit decided at position ``i`` sees the synthesized channel with index ``i``
of :class:`~.evolution.TransformPath`.

Exact mode carries each likelihood as a homogeneous pair of Python integers
``(p0, p1)`` proportional to the metric's probabilities under the two
hypotheses; a decision is a tie exactly when ``p0 == p1``.  Float mode uses
log-likelihood ratios and logs every decision within ``tie_tol`` of zero.
"""

from __future__ import annotations

import concurrent.futures
import csv
import io
import logging
import math
import os
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Any

import numpy as np

from .channel import ChannelPair, SymmetricChannel
from .construction import CodeSpec, bound_block_error
from .evolution import DEFAULT_LIMITS, EvolutionLimits, SupportOverflow
from .rational import fmt

log = logging.getLogger(__name__)

EXACT_MAX_N = 1 << 10
LLR_CLIP = 1e4
WORKERS_ENV = "POLAR_MISMATCH_WORKERS"
_Z95 = NormalDist().inv_cdf(0.975)


def _check_length(N: int):
    if N < 1 or N & (N - 1):
        raise ValueError(f"length {N} is not a power of two")


def encode(u) -> np.ndarray:
    """Polar-encode bit vectors (last axis) with ``n`` natural-order butterfly stages."""
    x = np.array(u, dtype=np.int8, copy=True)
    N = x.shape[-1]
    _check_length(N)
    lead = x.shape[:-1]
    h = N // 2
    while h >= 1:
        v = x.reshape(lead + (N // (2 * h), 2, h))
        v[..., 0, :] ^= v[..., 1, :]
        h //= 2
    return x


class ChannelSampler:
    """Exact sampler: integer weights for input 0, input 1 through the involution."""

    def __init__(self, ch: SymmetricChannel):
        den = math.lcm(*(int(p.denominator) for p in ch.p0))
        if den >= 1 << 62:
            raise ValueError("channel denominators too large for exact sampling")
        weights = [int(p * den) for p in ch.p0]
        self.total = den
        self.cum = np.cumsum(weights)
        self.involution = np.asarray(ch.involution, dtype=np.intp)

    def draw(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        r = rng.integers(0, self.total, size=np.shape(x))
        return self.map(x, r)

    def map(self, x, r) -> np.ndarray:
        y0 = np.searchsorted(self.cum, r, side="right")
        return np.where(np.asarray(x) == 1, self.involution[y0], y0)


def sample_channel(ch: SymmetricChannel, x, rng: np.random.Generator) -> np.ndarray:
    """Memoryless outputs (symbol indices into ``ch.symbols``) for inputs ``x``."""
    return ChannelSampler(ch).draw(np.asarray(x), rng)


# -- decoding --------------------------------------------------------------

class _Exact:
    name = "exact"

    def __init__(self, metric: SymmetricChannel):
        den = math.lcm(*(int(p.denominator) for p in metric.p0 + metric.p1))
        self.w0 = np.array([int(p * den) for p in metric.p0], dtype=object)
        self.w1 = np.array([int(p * den) for p in metric.p1], dtype=object)

    def leaves(self, y):
        return (self.w0[y], self.w1[y])

    @staticmethod
    def half(L, lo, hi):
        return (L[0][:, lo:hi], L[1][:, lo:hi])

    @staticmethod
    def minus(a, b):
        return (a[0] * b[0] + a[1] * b[1], a[1] * b[0] + a[0] * b[1])

    @staticmethod
    def plus(a, b, s):
        s = s.astype(bool)
        a_s = np.where(s, a[1], a[0])
        a_n = np.where(s, a[0], a[1])
        return (a_s * b[0], a_n * b[1])

    @staticmethod
    def decide(L):
        p0, p1 = L[0][:, 0], L[1][:, 0]
        one = np.array(p1 > p0, dtype=bool)
        tie = np.array(p1 == p0, dtype=bool)
        return one, tie

    @staticmethod
    def record(L):
        return list(zip(L[0][:, 0].tolist(), L[1][:, 0].tolist()))


class _LogFloat:
    name = "log_float"

    def __init__(self, metric: SymmetricChannel, tie_tol: float):
        if not tie_tol > 0:
            raise ValueError("tie_tol must be positive in float mode")
        self.tie_tol = tie_tol
        llr = []
        for a, b in zip(metric.p0, metric.p1):
            if a == 0 and b == 0:
                llr.append(0.0)
            elif a == 0:
                llr.append(LLR_CLIP)
            elif b == 0:
                llr.append(-LLR_CLIP)
            else:
                llr.append(float(np.clip(math.log(b) - math.log(a), -LLR_CLIP, LLR_CLIP)))
        self.table = np.array(llr)

    def leaves(self, y):
        return self.table[y]

    @staticmethod
    def half(L, lo, hi):
        return L[:, lo:hi]

    @staticmethod
    def minus(a, b):
        return np.logaddexp(a, b) - np.logaddexp(0.0, a + b)

    @staticmethod
    def plus(a, b, s):
        return b + (1 - 2 * s.astype(np.float64)) * a

    def decide(self, L):
        lam = L[:, 0]
        tie = np.abs(lam) <= self.tie_tol
        return (lam > 0) & ~tie, tie

    @staticmethod
    def record(L):
        return L[:, 0].tolist()


def _arith(metric, arithmetic: str, tie_tol: float):
    if arithmetic == "exact":
        return _Exact(metric)
    if arithmetic == "log_float":
        return _LogFloat(metric, tie_tol)
    raise ValueError(f"unknown arithmetic {arithmetic!r}")


def _sc_batch(ar, y, info_mask, frozen_bits, coins, trace=None):
    """Decode a batch of output vectors ``y`` (shape ``(B, N)``).

    ``frozen_bits`` gives the value at every position (ignored where
    ``info_mask``); ``coins`` supplies the fair coin per position.
    Returns ``(u_hat, ties)`` with ``ties`` a boolean array of tie events.
    """
    B, N = y.shape
    u_hat = np.zeros((B, N), dtype=np.int8)
    ties = np.zeros((B, N), dtype=bool)

    def rec(L, offset, m):
        if m == 1:
            if info_mask[offset]:
                one, tie = ar.decide(L)
                bit = np.where(tie, coins[:, offset], one).astype(np.int8)
                ties[:, offset] = tie
            else:
                bit = np.full(B, frozen_bits[offset], dtype=np.int8)
            if trace is not None:
                trace.append(ar.record(L))
            u_hat[:, offset] = bit
            return bit[:, None]
        h = m // 2
        a, b = ar.half(L, 0, h), ar.half(L, h, m)
        s = rec(ar.minus(a, b), offset, h)
        t = rec(ar.plus(a, b, s), offset + h, h)
        return np.concatenate([s ^ t, t], axis=1)

    rec(ar.leaves(y), 0, N)
    return u_hat, ties


@dataclass
class DecodeResult:
    u_hat: np.ndarray
    ties: np.ndarray
    stage_values: list = field(default_factory=list)
    """Per position: ``(p0, p1)`` integers (exact) or the LLR (float)."""


def _symbol_indices(y, metric: SymmetricChannel) -> np.ndarray:
    y = list(y)
    if y and isinstance(y[0], str):
        return np.array([metric.index(s) for s in y], dtype=np.intp)
    return np.asarray(y, dtype=np.intp)


def scd_decode(y, spec: CodeSpec, metric: SymmetricChannel, rng=None,
               arithmetic: str = "exact", tie_tol: float = 1e-9, coins=None) -> DecodeResult:
    """Successive-cancellation estimate of ``u`` from one output vector.

    Parameters
    ----------
    y : sequence
        Output symbols (strings) or symbol indices of ``metric``.
    spec : CodeSpec
        Information set and frozen values.
    metric : SymmetricChannel
        Channel whose likelihoods drive the decisions.
    rng : numpy.random.Generator, optional
        Source of fair coins for ties; a fixed generator is used if omitted.
    coins : sequence of int, optional
        Explicit tie-break bit per position, overriding ``rng``.
    """
    y = _symbol_indices(y, metric)
    if len(y) != spec.N:
        raise ValueError(f"output length {len(y)} does not match N = {spec.N}")
    if arithmetic == "exact" and spec.N > EXACT_MAX_N:
        raise ValueError(f"exact decoding limited to N <= {EXACT_MAX_N}")
    if coins is None:
        rng = rng if rng is not None else np.random.default_rng(0)
        coins = rng.integers(0, 2, size=(1, spec.N), dtype=np.int8)
    else:
        coins = np.asarray(coins, dtype=np.int8).reshape(1, spec.N)
    ar = _arith(metric, arithmetic, tie_tol)
    trace: list = []
    u_hat, ties = _sc_batch(ar, y[None, :], spec.info_mask(), _frozen_vector(spec),
                            coins, trace)
    return DecodeResult(u_hat[0], ties[0], [t[0] for t in trace])


def _frozen_vector(spec: CodeSpec) -> np.ndarray:
    bits = np.zeros(spec.N, dtype=np.int8)
    for i, b in spec.frozen_map().items():
        bits[i - 1] = b
    return bits


# -- Monte Carlo -----------------------------------------------------------

def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Counter-based generator owned by one trial; independent of scheduling."""
    return np.random.Generator(np.random.Philox(key=(seed & (2 ** 64 - 1)) | (trial << 64)))


def wilson_interval(k: int, n: int, z: float = _Z95) -> tuple:
    if n <= 0:
        raise ValueError("no trials")
    p = k / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return (max(0.0, centre - half), min(1.0, centre + half))


@dataclass
class SimConfig:
    pair: ChannelPair
    spec: CodeSpec
    trials: int
    seed: int = 0
    arithmetic: str = "exact"
    tie_tol: float = 1e-9
    batch: int = 4096
    keep_trace: bool = False
    workers: int | None = None

    def __post_init__(self):
        if not isinstance(self.trials, int) or self.trials <= 0:
            raise ValueError("trials must be a positive integer")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 bits")
        if self.arithmetic == "exact" and self.spec.N > EXACT_MAX_N:
            raise ValueError(f"exact mode limited to N <= {EXACT_MAX_N}; use log_float")
        if self.arithmetic == "log_float" and not self.tie_tol > 0:
            raise ValueError("tie_tol must be positive")
        if self.arithmetic not in ("exact", "log_float"):
            raise ValueError(f"unknown arithmetic {self.arithmetic!r}")

    def as_dict(self) -> dict:
        return {"w": self.pair.w.to_json(), "v": self.pair.v.to_json(),
                "n": self.spec.n, "info_set": list(self.spec.info_set),
                "trials": self.trials, "seed": self.seed, "arithmetic": self.arithmetic,
                "tie_tol": self.tie_tol if self.arithmetic == "log_float" else None}


@dataclass
class SimReport:
    trials: int
    block_errors: int
    bit_errors: int
    tie_events: int
    trials_with_ties: int
    analytic_bound: Any = None
    trace: list | None = None

    @property
    def bler_hat(self) -> float:
        return self.block_errors / self.trials

    @property
    def wilson_ci_95(self) -> tuple:
        return wilson_interval(self.block_errors, self.trials)

    @property
    def sigma(self) -> float:
        """Binomial standard error at the empirical rate."""
        p = self.bler_hat
        return math.sqrt(p * (1 - p) / self.trials)

    def bound_sigma(self) -> float | None:
        if self.analytic_bound is None:
            return None
        b = float(self.analytic_bound)
        return math.sqrt(b * (1 - b) / self.trials)

    def exceeds_bound(self, k_sigma: float = 5.0) -> bool:
        """Empirical BLER above the analytic bound by more than ``k_sigma`` sigmas."""
        if self.analytic_bound is None:
            return False
        b = float(self.analytic_bound)
        return self.bler_hat > b + k_sigma * max(self.bound_sigma(), 1 / self.trials)

    def as_dict(self) -> dict:
        lo, hi = self.wilson_ci_95
        return {"trials": self.trials, "block_errors": self.block_errors,
                "bler_hat": self.bler_hat, "wilson_ci_95": [lo, hi],
                "bit_errors": self.bit_errors, "tie_events": self.tie_events,
                "trials_with_ties": self.trials_with_ties,
                "analytic_bound": None if self.analytic_bound is None
                else fmt(self.analytic_bound),
                "analytic_bound_float": None if self.analytic_bound is None
                else float(self.analytic_bound)}

    def trace_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["trial", "bit_errors", "block_error", "ties"])
        writer.writerows(self.trace or [])
        return buf.getvalue()


def _run_chunk(cfg: SimConfig, start: int, stop: int):
    spec = cfg.spec
    N = spec.N
    sampler = ChannelSampler(cfg.pair.w)
    ar = _arith(cfg.pair.v, cfg.arithmetic, cfg.tie_tol)
    mask = np.array(spec.info_mask())
    frozen = _frozen_vector(spec)
    totals = [0, 0, 0, 0]
    rows = []
    for lo in range(start, stop, cfg.batch):
        hi = min(lo + cfg.batch, stop)
        B = hi - lo
        msg = np.empty((B, N), dtype=np.int8)
        draws = np.empty((B, N), dtype=np.int64)
        coins = np.empty((B, N), dtype=np.int8)
        for k in range(B):
            g = trial_rng(cfg.seed, lo + k)
            msg[k] = g.integers(0, 2, size=N, dtype=np.int8)
            draws[k] = g.integers(0, sampler.total, size=N)
            coins[k] = g.integers(0, 2, size=N, dtype=np.int8)
        u = np.where(mask, msg, frozen).astype(np.int8)
        y = sampler.map(encode(u), draws)
        u_hat, ties = _sc_batch(ar, y, mask, frozen, coins)
        wrong = (u_hat != u) & mask
        bit_err = wrong.sum(axis=1)
        tie_cnt = ties.sum(axis=1)
        totals[0] += int((bit_err > 0).sum())
        totals[1] += int(bit_err.sum())
        totals[2] += int(tie_cnt.sum())
        totals[3] += int((tie_cnt > 0).sum())
        if cfg.keep_trace:
            rows.extend([lo + k, int(bit_err[k]), int(bit_err[k] > 0), int(tie_cnt[k])]
                        for k in range(B))
    return totals, rows


def _workers(cfg: SimConfig) -> int:
    if cfg.workers is not None:
        return max(1, cfg.workers)
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run_monte_carlo(cfg: SimConfig, with_bound: bool = True,
                    limits: EvolutionLimits = DEFAULT_LIMITS) -> SimReport:
    """Simulate ``cfg.trials`` transmissions; identical configs give identical reports."""
    workers = min(_workers(cfg), cfg.trials)
    edges = [cfg.trials * k // workers for k in range(workers + 1)]
    chunks = list(zip(edges[:-1], edges[1:]))
    if workers == 1:
        results = [_run_chunk(cfg, *chunks[0])]
    else:
        with concurrent.futures.ProcessPoolExecutor(workers) as pool:
            futures = [pool.submit(_run_chunk, cfg, a, b) for a, b in chunks]
            results = [f.result() for f in futures]
    totals = [sum(r[0][k] for r in results) for k in range(4)]
    trace = [row for r in results for row in r[1]] if cfg.keep_trace else None
    bound = None
    if with_bound:
        try:
            bound = bound_block_error(cfg.pair, cfg.spec, limits).sum_pe_mismatched
        except SupportOverflow as exc:
            log.warning("analytic bound unavailable: %s", exc)
    return SimReport(cfg.trials, totals[0], totals[1], totals[2], totals[3], bound, trace)


__all__ = [
    "EXACT_MAX_N", "encode", "ChannelSampler", "sample_channel", "DecodeResult",
    "scd_decode", "trial_rng", "wilson_interval", "SimConfig", "SimReport",
    "run_monte_carlo",
]
