"""Finite-output symmetric B-DMCs, mismatched channel pairs and LR spectra."""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

import numpy as np

from .rational import INF, ONE, Q, ZERO, fmt, likelihood_ratio, parse_lr, to_rational


class ChannelError(ValueError):
    """Raised for malformed channels, spectra or channel pairs."""


@dataclass(frozen=True)
class LrSpectrum:
    """Finite law of a likelihood ratio: ``(lr, mass)`` points sorted by ``lr``.

    Masses are exact, strictly positive and sum to one.  ``approximate`` is
    set once any quantization step has touched the law.
    """

    points: tuple
    approximate: bool = False

    def __post_init__(self):
        pts = tuple((lr if lr == INF else to_rational(lr), to_rational(m))
                    for lr, m in self.points)
        object.__setattr__(self, "points", pts)
        if not pts:
            raise ChannelError("empty spectrum")
        total = ZERO
        prev = None
        for lr, m in pts:
            if lr < 0:
                raise ChannelError(f"negative likelihood ratio {fmt(lr)}")
            if m <= 0:
                raise ChannelError(f"non-positive mass at LR {fmt(lr)}")
            if prev is not None and not prev < lr:
                raise ChannelError("spectrum points must be strictly increasing in LR")
            prev = lr
            total += m
        if total != 1:
            raise ChannelError(f"spectrum masses sum to {fmt(total)}, not 1")

    @classmethod
    def from_masses(cls, masses: Mapping, approximate: bool = False) -> "LrSpectrum":
        """Build from an ``{lr: mass}`` mapping, dropping zero-mass entries."""
        pts = sorted((lr, m) for lr, m in masses.items() if m != 0)
        return cls(tuple(pts), approximate)

    @property
    def lrs(self) -> tuple:
        return tuple(lr for lr, _ in self.points)

    @property
    def masses(self) -> tuple:
        return tuple(m for _, m in self.points)

    def as_dict(self) -> dict:
        return dict(self.points)

    def mass_of(self, lr):
        for value, m in self.points:
            if value == lr:
                return m
        return ZERO

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def to_json(self) -> list:
        return [[fmt(lr), fmt(m)] for lr, m in self.points]

    @classmethod
    def from_json(cls, rows, approximate: bool = False) -> "LrSpectrum":
        return cls.from_masses({parse_lr(lr): to_rational(m) for lr, m in rows},
                               approximate)

    def __repr__(self):
        body = ", ".join(f"({fmt(lr)}, {fmt(m)})" for lr, m in self.points)
        tag = " approx" if self.approximate else ""
        return f"LrSpectrum{{{body}}}{tag}"


def _normalize_involution(symbols: tuple, involution) -> tuple:
    index = {s: k for k, s in enumerate(symbols)}
    if isinstance(involution, Mapping):
        pairs = list(involution.items())
    else:
        pairs = [tuple(p) for p in involution]
    perm = [None] * len(symbols)
    for pr in pairs:
        if len(pr) != 2:
            raise ChannelError(f"involution entry {pr!r} is not a pair")
        a, b = (str(x) for x in pr)
        if a not in index or b not in index:
            raise ChannelError(f"involution mentions unknown symbol in {pr!r}")
        ia, ib = index[a], index[b]
        for x, y in ((ia, ib), (ib, ia)):
            if perm[x] is not None and perm[x] != y:
                raise ChannelError(f"symbol {symbols[x]!r} paired twice in the involution")
            perm[x] = y
    missing = [symbols[k] for k, p in enumerate(perm) if p is None]
    if missing:
        raise ChannelError(f"involution does not cover symbols {missing}")
    return tuple(perm)


@dataclass(frozen=True)
class SymmetricChannel:
    """Binary-input channel with an explicit output involution ``pi``.

    Symmetry means ``p0[pi(y)] == p1[y]`` for every output ``y``; fixed
    points of ``pi`` therefore carry LR exactly one.
    """

    symbols: tuple
    p0: tuple
    p1: tuple
    involution: tuple
    name: str = field(default="", compare=False)

    def __post_init__(self):
        syms = tuple(str(s) for s in self.symbols)
        object.__setattr__(self, "symbols", syms)
        object.__setattr__(self, "p0", tuple(to_rational(p) for p in self.p0))
        object.__setattr__(self, "p1", tuple(to_rational(p) for p in self.p1))
        object.__setattr__(self, "involution", tuple(int(k) for k in self.involution))
        n = len(syms)
        if n == 0:
            raise ChannelError("channel needs at least one output symbol")
        if len(set(syms)) != n:
            raise ChannelError("duplicate output symbols")
        if len(self.p0) != n or len(self.p1) != n or len(self.involution) != n:
            raise ChannelError("symbols, p0, p1 and involution lengths differ")
        for k, (a, b) in enumerate(zip(self.p0, self.p1)):
            if not (0 <= a <= 1 and 0 <= b <= 1):
                raise ChannelError(f"probability outside [0, 1] at symbol {syms[k]!r}")
        if sum(self.p0) != 1 or sum(self.p1) != 1:
            raise ChannelError("transition probabilities are not normalized")
        pi = self.involution
        if sorted(pi) != list(range(n)) or any(pi[pi[k]] != k for k in range(n)):
            raise ChannelError("involution is not a permutation of order two")
        for k in range(n):
            if self.p0[pi[k]] != self.p1[k]:
                if pi[k] == k:
                    raise ChannelError(
                        f"fixed point {syms[k]!r} must have p0 == p1")
                raise ChannelError(
                    f"symmetry violated at {syms[k]!r}: "
                    f"p0(pi(y)) = {fmt(self.p0[pi[k]])} != p1(y) = {fmt(self.p1[k])}")

    def __len__(self):
        return len(self.symbols)

    def index(self, symbol) -> int:
        return self.symbols.index(str(symbol))

    def lr(self, k: int):
        """Likelihood ratio ``p1/p0`` of output index ``k`` (may be ``inf``)."""
        value = likelihood_ratio(self.p0[k], self.p1[k])
        if value is None:
            raise ChannelError(f"symbol {self.symbols[k]!r} has zero probability "
                               "under both inputs")
        return value

    def involution_map(self) -> dict:
        return {self.symbols[k]: self.symbols[j] for k, j in enumerate(self.involution)}

    def spectrum(self) -> LrSpectrum:
        """Law of this channel's own LR under input 0."""
        return law_of_metric(self, self)

    def embed(self, symbols: Iterable, involution) -> "SymmetricChannel":
        """Re-express the channel on a larger alphabet with zero mass on new symbols."""
        symbols = tuple(str(s) for s in symbols)
        if not set(self.symbols) <= set(symbols):
            raise ChannelError("target alphabet must contain the channel's symbols")
        perm = _normalize_involution(symbols, involution)
        mine = self.involution_map()
        for k, s in enumerate(symbols):
            if s in mine and mine[s] != symbols[perm[k]]:
                raise ChannelError(f"involution disagrees on symbol {s!r}")
        p0 = [self.p0[self.index(s)] if s in mine else ZERO for s in symbols]
        p1 = [self.p1[self.index(s)] if s in mine else ZERO for s in symbols]
        return SymmetricChannel(symbols, p0, p1, perm, name=self.name)

    def to_json(self) -> dict:
        pairs, seen = [], set()
        for k, j in enumerate(self.involution):
            if k not in seen:
                pairs.append([self.symbols[k], self.symbols[j]])
                seen.update((k, j))
        out = {"symbols": list(self.symbols),
               "p0": [fmt(p) for p in self.p0],
               "p1": [fmt(p) for p in self.p1],
               "involution": pairs}
        if self.name:
            out["name"] = self.name
        return out


def make_symmetric(atoms, involution, name: str = "") -> SymmetricChannel:
    """Validated channel from ``(symbol, p0, p1)`` atoms and a symbol involution.

    ``involution`` is a mapping or an iterable of symbol pairs; fixed points
    are written as ``(s, s)``.
    """
    atoms = list(atoms)
    if not atoms:
        raise ChannelError("channel needs at least one atom")
    symbols = tuple(str(a[0]) for a in atoms)
    perm = _normalize_involution(symbols, involution)
    return SymmetricChannel(symbols, [a[1] for a in atoms], [a[2] for a in atoms],
                            perm, name=name)


def make_bsc(eps) -> SymmetricChannel:
    eps = to_rational(eps)
    if not 0 <= eps <= Q(1, 2):
        raise ChannelError(f"BSC crossover {fmt(eps)} outside [0, 1/2]")
    return SymmetricChannel(("0", "1"), (1 - eps, eps), (eps, 1 - eps), (1, 0),
                            name=f"BSC({fmt(eps)})")


def make_bec(delta) -> SymmetricChannel:
    delta = to_rational(delta)
    if not 0 <= delta <= 1:
        raise ChannelError(f"BEC erasure probability {fmt(delta)} outside [0, 1]")
    return SymmetricChannel(("0", "e", "1"), (1 - delta, delta, ZERO),
                            (ZERO, delta, 1 - delta), (2, 1, 0),
                            name=f"BEC({fmt(delta)})")


def ternary_counterexample_channel() -> SymmetricChannel:
    """Symmetric channel on ``{0, e, 1}`` with LRs ``{1/4, 1, 4}``."""
    return make_symmetric(
        [("0", Q(2, 5), Q(1, 10)), ("e", Q(1, 2), Q(1, 2)), ("1", Q(1, 10), Q(2, 5))],
        [("0", "1"), ("e", "e")], name="ternary")


def law_of_metric(true: SymmetricChannel, metric: SymmetricChannel) -> LrSpectrum:
    """Law of ``L_metric(y)`` when ``y`` is drawn from ``true`` with input 0."""
    masses: dict = {}
    for k, w0 in enumerate(true.p0):
        if w0 == 0:
            continue
        lr = likelihood_ratio(metric.p0[k], metric.p1[k])
        if lr is None:
            raise ChannelError(
                f"metric undefined on reachable symbol {true.symbols[k]!r}")
        masses[lr] = masses.get(lr, ZERO) + w0
    return LrSpectrum.from_masses(masses)


@dataclass(frozen=True)
class ChannelPair:
    """True channel ``w`` and decoding metric ``v`` sharing one involution.

    ``w`` is reordered to ``v``'s symbol order on construction.
    """

    w: SymmetricChannel
    v: SymmetricChannel

    def __post_init__(self):
        w, v = self.w, self.v
        if set(w.symbols) != set(v.symbols):
            raise ChannelError(
                f"alphabet mismatch: {sorted(w.symbols)} vs {sorted(v.symbols)}; "
                "embed the smaller channel first")
        if w.involution_map() != v.involution_map():
            raise ChannelError("channels are not symmetrized by the same involution")
        if w.symbols != v.symbols:
            order = [w.index(s) for s in v.symbols]
            w = SymmetricChannel(v.symbols, [w.p0[k] for k in order],
                                 [w.p1[k] for k in order], v.involution, name=w.name)
            object.__setattr__(self, "w", w)
        for k, s in enumerate(v.symbols):
            if w.p0[k] > 0 and v.p0[k] == 0:
                what = "undefined" if v.p1[k] == 0 else "infinite"
                raise ChannelError(
                    f"absolute continuity violated: symbol {s!r} is reachable under "
                    f"w but the metric LR there is {what}")

    @property
    def matched(self) -> bool:
        return self.w.p0 == self.v.p0

    def mismatched_spectrum(self) -> LrSpectrum:
        return law_of_metric(self.w, self.v)

    def design_spectrum(self) -> LrSpectrum:
        return self.v.spectrum()

    def to_json(self) -> dict:
        return {"w": self.w.to_json(), "v": self.v.to_json()}


def pair(w: SymmetricChannel, v: SymmetricChannel) -> ChannelPair:
    return ChannelPair(w, v)


def mismatched_spectrum(p: ChannelPair) -> LrSpectrum:
    """Law of ``L_V`` under the true channel's input-0 measure."""
    return p.mismatched_spectrum()


def counterexample_pair() -> ChannelPair:
    """BSC(3/10) embedded on ``{0, e, 1}`` decoded with the ternary metric."""
    v = ternary_counterexample_channel()
    w = make_bsc(Q(3, 10)).embed(v.symbols, [("0", "1"), ("e", "e")])
    return ChannelPair(w, v)


def channel_from_json(obj) -> SymmetricChannel:
    """Parse the channel schema, or the shorthands ``{"bsc": "1/10"}`` / ``{"bec": ...}``."""
    if not isinstance(obj, Mapping):
        raise ChannelError("channel description must be a JSON object")
    if "bsc" in obj:
        return make_bsc(to_rational(obj["bsc"]))
    if "bec" in obj:
        return make_bec(to_rational(obj["bec"]))
    try:
        symbols, p0, p1, inv = obj["symbols"], obj["p0"], obj["p1"], obj["involution"]
    except KeyError as exc:
        raise ChannelError(f"channel JSON missing key {exc.args[0]!r}") from None
    if not (len(symbols) == len(p0) == len(p1)):
        raise ChannelError("channel JSON: symbols, p0 and p1 lengths differ")
    try:
        atoms = [(s, to_rational(a), to_rational(b)) for s, a, b in zip(symbols, p0, p1)]
    except (TypeError, ValueError) as exc:
        raise ChannelError(f"channel JSON: {exc}") from None
    return make_symmetric(atoms, inv, name=str(obj.get("name", "")))


def parse_channel_arg(text: str) -> SymmetricChannel:
    """``bsc:3/10`` / ``bec:1/2`` / ``ternary`` shorthands used by the CLI."""
    kind, _, arg = text.partition(":")
    kind = kind.strip().lower()
    if kind == "bsc":
        return make_bsc(to_rational(arg))
    if kind == "bec":
        return make_bec(to_rational(arg))
    if kind == "ternary" and not arg:
        return ternary_counterexample_channel()
    raise ChannelError(f"unknown channel shorthand {text!r}")


def random_symmetric_channel(rng: np.random.Generator, n_symbols: int,
                             max_weight: int = 12, zero_prob: float = 0.0,
                             n_fixed: int | None = None) -> SymmetricChannel:
    """Random symmetric channel with small-integer weights.

    Symbols ``0 .. n_symbols-1`` are paired consecutively; the trailing
    ``n_fixed`` symbols are fixed points of the involution.
    """
    if n_fixed is None:
        n_fixed = int(rng.integers(0, 2)) + (n_symbols % 2)
        if (n_symbols - n_fixed) % 2:
            n_fixed += 1
    n_fixed = min(n_fixed, n_symbols)
    if (n_symbols - n_fixed) % 2:
        raise ChannelError("paired symbols must come in twos")
    while True:
        w = rng.integers(1, max_weight + 1, size=n_symbols)
        if zero_prob:
            w = np.where(rng.random(n_symbols) < zero_prob, 0, w)
        if w.sum() > 0:
            break
    total = int(w.sum())
    p0 = [Q(int(x), total) for x in w]
    perm = list(range(n_symbols))
    n_pairs = (n_symbols - n_fixed) // 2
    for k in range(n_pairs):
        perm[2 * k], perm[2 * k + 1] = 2 * k + 1, 2 * k
    p1 = [p0[perm[k]] for k in range(n_symbols)]
    return SymmetricChannel(tuple(str(k) for k in range(n_symbols)), p0, p1, perm)


__all__ = [
    "ChannelError", "LrSpectrum", "SymmetricChannel", "ChannelPair",
    "make_symmetric", "make_bsc", "make_bec", "ternary_counterexample_channel",
    "law_of_metric", "pair", "mismatched_spectrum", "counterexample_pair",
    "channel_from_json", "parse_channel_arg", "random_symmetric_channel",
    "INF", "ONE",
]
