"""Exact evolution of LR spectra through the polar plus/minus transforms.

Both transforms act on two independent copies of a likelihood ratio:

* minus: ``(L1 + L2) / (1 + L1 L2)``
* plus:  ``L1 * L2``

Several laws sharing one support (e.g. the law of ``L_V`` under ``W`` and
under ``V``) are evolved together, so each output value is computed once.
The infinite LR never carries mass here; :class:`~.channel.ChannelPair`
rejects pairs that would put mass on it.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .channel import LrSpectrum
from .rational import INF, ONE, Q, ZERO

MINUS = "-"
PLUS = "+"


class SupportOverflow(RuntimeError):
    """Exact evolution exceeded the configured support size."""

    def __init__(self, path: str, size: int, limit: int):
        self.path = path
        self.size = size
        self.limit = limit
        super().__init__(
            f"support overflow at path {path!r}: {size} points exceeds max_support={limit}")


@dataclass(frozen=True)
class TransformPath:
    """Sequence of transforms, first-applied first.

    The empty path is ``(N, i) = (1, 1)``; appending ``-`` maps
    ``(N, i) -> (2N, 2i - 1)`` and appending ``+`` maps it to ``(2N, 2i)``.
    """

    steps: str = ""

    def __post_init__(self):
        steps = "".join(self.steps) if not isinstance(self.steps, str) else self.steps
        steps = steps.replace("m", MINUS).replace("p", PLUS)
        if set(steps) - {MINUS, PLUS}:
            raise ValueError(f"path may only contain '-' and '+': {self.steps!r}")
        object.__setattr__(self, "steps", steps)

    @property
    def n(self) -> int:
        return len(self.steps)

    @property
    def N(self) -> int:
        return 1 << len(self.steps)

    @property
    def i(self) -> int:
        idx = 0
        for s in self.steps:
            idx = 2 * idx + (s == PLUS)
        return idx + 1

    @classmethod
    def from_index(cls, N: int, i: int) -> "TransformPath":
        n = N.bit_length() - 1
        if N < 1 or N != 1 << n:
            raise ValueError(f"blocklength {N} is not a power of two")
        if not 1 <= i <= N:
            raise ValueError(f"index {i} outside 1..{N}")
        bits = format(i - 1, f"0{n}b") if n else ""
        return cls(bits.replace("0", MINUS).replace("1", PLUS))

    def child(self, step: str) -> "TransformPath":
        return TransformPath(self.steps + step)

    def __str__(self):
        return self.steps


def all_paths(n: int):
    """Paths of length ``n`` in index order ``i = 1 .. 2**n``."""
    return [TransformPath.from_index(1 << n, i) for i in range(1, (1 << n) + 1)]


@dataclass(frozen=True)
class EvolutionLimits:
    max_support: int = 500_000
    mode: str = "exact"
    bins: int = 0

    def __post_init__(self):
        if self.max_support < 1:
            raise ValueError("max_support must be positive")
        if self.mode not in ("exact", "quantized"):
            raise ValueError(f"unknown evolution mode {self.mode!r}")
        if self.mode == "quantized" and self.bins < 3:
            raise ValueError("quantized mode needs bins >= 3")

    @classmethod
    def quantized(cls, bins: int, max_support: int = 500_000) -> "EvolutionLimits":
        return cls(max_support=max_support, mode="quantized", bins=bins)

    @property
    def exact(self) -> bool:
        return self.mode == "exact"


DEFAULT_LIMITS = EvolutionLimits()


def _union_support(laws: Sequence[LrSpectrum]):
    values = sorted({lr for s in laws for lr in s.lrs})
    if values and values[-1] == INF:
        raise ValueError("infinite LR carries positive mass; transform undefined")
    tables = [s.as_dict() for s in laws]
    masses = [[t.get(v, ZERO) for v in values] for t in tables]
    return values, masses


def _combine(values, masses, step):
    n = len(values)
    k = len(masses)
    out: dict = {}
    get = out.get
    minus = step == MINUS
    for i in range(n):
        a = values[i]
        mi = [m[i] for m in masses]
        for j in range(i, n):
            b = values[j]
            v = (a + b) / (1 + a * b) if minus else a * b
            if k == 1:
                w = mi[0] * masses[0][j]
                if j != i:
                    w = w + w
                out[v] = get(v, ZERO) + w
            else:
                acc = get(v)
                if acc is None:
                    acc = out[v] = [ZERO] * k
                for r in range(k):
                    w = mi[r] * masses[r][j]
                    if j != i:
                        w = w + w
                    acc[r] += w
    return out


def transform_laws(laws: Sequence[LrSpectrum], step: str,
                   limits: EvolutionLimits = DEFAULT_LIMITS, path: str = ""):
    """Apply one transform to several laws over their shared support."""
    if step not in (MINUS, PLUS):
        raise ValueError(f"unknown transform {step!r}")
    values, masses = _union_support(laws)
    where = path + step
    m = len(values)
    if limits.exact and m * (m + 1) // 2 > 64 * limits.max_support:
        raise SupportOverflow(where, m * (m + 1) // 2, limits.max_support)
    out = _combine(values, masses, step)
    if limits.exact and len(out) > limits.max_support:
        raise SupportOverflow(where, len(out), limits.max_support)
    approx = any(s.approximate for s in laws)
    results = []
    for r in range(len(laws)):
        if len(laws) == 1:
            table = out
        else:
            table = {v: acc[r] for v, acc in out.items()}
        s = LrSpectrum.from_masses(table, approximate=approx)
        if not limits.exact and len(s) > limits.bins:
            s = quantize(s, limits.bins)
        results.append(s)
    return results


def transform_minus(s: LrSpectrum, limits: EvolutionLimits = DEFAULT_LIMITS) -> LrSpectrum:
    return transform_laws([s], MINUS, limits)[0]


def transform_plus(s: LrSpectrum, limits: EvolutionLimits = DEFAULT_LIMITS) -> LrSpectrum:
    return transform_laws([s], PLUS, limits)[0]


def synthesize_laws(laws: Sequence[LrSpectrum], path, limits: EvolutionLimits = DEFAULT_LIMITS):
    path = path if isinstance(path, TransformPath) else TransformPath(path)
    laws = list(laws)
    done = ""
    for step in path.steps:
        laws = transform_laws(laws, step, limits, done)
        done += step
    return laws


def synthesize(s: LrSpectrum, path, limits: EvolutionLimits = DEFAULT_LIMITS) -> LrSpectrum:
    """Law of the synthesized channel's LR at ``path``, folded transform by transform."""
    return synthesize_laws([s], path, limits)[0]


def minus_child_split(p_lt, p_eq, p_gt):
    """Three-way split of the minus child from the parent's split alone."""
    return (p_lt * p_lt + p_gt * p_gt, 2 * p_eq - p_eq * p_eq, 2 * p_lt * p_gt)


def plus_child_split(s: LrSpectrum):
    """``(P[L1 L2 < 1], P[L1 L2 = 1], P[L1 L2 > 1])`` without building the plus law.

    Sweeps ``1/L1`` downward against the sorted support: ``O(m)`` comparisons.
    """
    values = s.lrs
    masses = s.masses
    if values[-1] == INF:
        raise ValueError("infinite LR carries positive mass; transform undefined")
    index = {v: k for k, v in enumerate(values)}
    prefix = [ZERO]
    for m in masses:
        prefix.append(prefix[-1] + m)
    lt = ZERO
    eq = ZERO
    j = len(values)
    for v, m in zip(values, masses):
        if v == 0:
            lt += m
            continue
        t = 1 / v
        while j > 0 and values[j - 1] >= t:
            j -= 1
        lt += m * prefix[j]
        k = index.get(t)
        if k is not None:
            eq += m * masses[k]
    return lt, eq, 1 - lt - eq


def child_split(s: LrSpectrum, step: str):
    if step == PLUS:
        return plus_child_split(s)
    lt = eq = ZERO
    for v, m in s.points:
        if v < 1:
            lt += m
        elif v == 1:
            eq += m
    return minus_child_split(lt, eq, 1 - lt - eq)


def _log_magnitude(x) -> float:
    return math.log(x.numerator) - math.log(x.denominator)


def quantize(s: LrSpectrum, bins: int) -> LrSpectrum:
    """Merge adjacent LR values into at most ``bins`` points.

    Values are grouped by magnitude ``max(l, 1/l)`` so that a bin and its
    mirror image ``l -> 1/l`` are merged together; each group is represented
    by the mass-weighted geometric mean magnitude ``R`` (placed at ``R`` and
    ``1/R``).  The tie point ``l = 1`` and the extremes ``0``/``inf`` are
    kept exactly.  Total mass is unchanged.
    """
    if bins < 3:
        raise ValueError("quantize needs bins >= 3")
    if len(s) <= bins:
        return s
    tie = s.mass_of(ONE)
    groups: dict = {}
    extreme_lo = extreme_hi = ZERO
    for lr, m in s.points:
        if lr == 1:
            continue
        if lr == 0:
            extreme_lo += m
            continue
        if lr == INF:
            extreme_hi += m
            continue
        if lr > 1:
            lo, hi = groups.get(lr, (ZERO, ZERO))
            groups[lr] = (lo, hi + m)
        else:
            mag = 1 / lr
            lo, hi = groups.get(mag, (ZERO, ZERO))
            groups[mag] = (lo + m, hi)
    budget = bins - (1 if tie else 0) - (1 if extreme_lo else 0) - (1 if extreme_hi else 0)
    per_side = max(budget // 2, 1)
    mags = sorted(groups)
    out: dict = {}
    if tie:
        out[ONE] = tie
    if extreme_lo:
        out[ZERO] = extreme_lo
    if extreme_hi:
        out[INF] = extreme_hi
    for chunk in np.array_split(np.arange(len(mags)), min(per_side, len(mags))):
        members = [mags[k] for k in chunk]
        lo_mass = sum((groups[g][0] for g in members), ZERO)
        hi_mass = sum((groups[g][1] for g in members), ZERO)
        if len(members) == 1:
            rep = members[0]
        else:
            weight = [float(groups[g][0] + groups[g][1]) for g in members]
            logs = [_log_magnitude(g) for g in members]
            mean = sum(w * x for w, x in zip(weight, logs)) / sum(weight)
            try:
                f = Fraction(math.exp(mean)).limit_denominator(10 ** 12)
                rep = Q(f.numerator, f.denominator)
            except OverflowError:
                rep = members[-1]
            rep = min(max(rep, members[0]), members[-1])
        if hi_mass:
            out[rep] = out.get(rep, ZERO) + hi_mass
        if lo_mass:
            out[1 / rep] = out.get(1 / rep, ZERO) + lo_mass
    return LrSpectrum.from_masses(out, approximate=True)


__all__ = [
    "MINUS", "PLUS", "SupportOverflow", "TransformPath", "all_paths",
    "EvolutionLimits", "DEFAULT_LIMITS", "transform_laws", "transform_minus",
    "transform_plus", "synthesize", "synthesize_laws", "minus_child_split",
    "plus_child_split", "child_split", "quantize",
]
