"""Robustness conditions for mismatched polar decoding and their preservation.

Every quantity here is a probability of the metric LR ``L_V`` at some
synthesized index, taken either under the true channel ``W`` (the
*mismatched* law) or under ``V`` itself (the *design* law).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterator

import numpy as np

from .channel import ChannelPair, LrSpectrum, SymmetricChannel, random_symmetric_channel
from .evolution import (DEFAULT_LIMITS, MINUS, PLUS, EvolutionLimits, SupportOverflow,
                        TransformPath, child_split, synthesize_laws, transform_laws)
from .metrics import (TieSplit, ZValue, bhattacharyya, check_p_diff_identity,
                      check_pe_minus_recursion, tie_split)
from .rational import ZERO, fmt, to_rational

log = logging.getLogger(__name__)


class Variant(str, Enum):
    WEAK = "theorem1_weak"
    STRICT = "theorem3_strict"

    @classmethod
    def parse(cls, text) -> "Variant":
        if isinstance(text, cls):
            return text
        aliases = {"weak": cls.WEAK, "strict": cls.STRICT}
        return aliases.get(str(text).lower()) or cls(text)


@dataclass(frozen=True)
class Condition:
    margin: Any

    @property
    def holds(self) -> bool:
        return self.margin >= 0


@dataclass(frozen=True)
class ConditionReport:
    """Conditions at one synthesized index.

    Weak variant:   A ``P_V[L<=1] >= P_V[L>=1]``, B ``P_W[L>=1] <= P_V[L>=1]``,
                    C ``P_W[L<=1] >= P_V[L<=1]``.
    Strict variant: A ``P_V[L<1] >= P_V[L>1]``, B ``pe(W,V) <= pe(V)``; ``c`` is None.
    Margins are oriented so that ``margin >= 0`` means the condition holds.
    """

    path: TransformPath
    variant: Variant
    a: Condition
    b: Condition
    c: Condition | None
    w_split: TieSplit
    v_split: TieSplit

    @property
    def N(self) -> int:
        return self.path.N

    @property
    def i(self) -> int:
        return self.path.i

    @property
    def holds(self) -> bool:
        return self.a.holds and self.b.holds and (self.c is None or self.c.holds)

    @property
    def pe_diff(self):
        return self.w_split.pe - self.v_split.pe

    def as_row(self) -> dict:
        row = {"path": self.path.steps, "N": self.N, "i": self.i,
               "variant": self.variant.value,
               "margin_a": fmt(self.a.margin), "holds_a": self.a.holds,
               "margin_b": fmt(self.b.margin), "holds_b": self.b.holds}
        if self.c is not None:
            row.update(margin_c=fmt(self.c.margin), holds_c=self.c.holds)
        else:
            row.update(margin_c="", holds_c="")
        row.update(pe_w=fmt(self.w_split.pe), pe_v=fmt(self.v_split.pe))
        return row


def evaluate_conditions(w: TieSplit, v: TieSplit, variant=Variant.WEAK,
                        path: TransformPath = TransformPath()) -> ConditionReport:
    variant = Variant.parse(variant)
    if variant is Variant.WEAK:
        a = Condition(v.p_le - v.p_ge)
        b = Condition(v.p_ge - w.p_ge)
        c = Condition(w.p_le - v.p_le)
    else:
        a = Condition(v.p_lt - v.p_gt)
        b = Condition(v.pe - w.pe)
        c = None
    return ConditionReport(path, variant, a, b, c, w, v)


@dataclass
class Node:
    """One synthesized index during a tree walk.

    ``laws`` is ``(mismatched, design)`` or ``None`` at leaves that were only
    summarized by their tie splits.
    """

    path: TransformPath
    w_split: TieSplit
    v_split: TieSplit
    laws: tuple | None = None


def walk_tree(pair: ChannelPair, n_max: int, limits: EvolutionLimits = DEFAULT_LIMITS,
              materialize_leaves: bool = False, truncated: list | None = None) -> Iterator[Node]:
    """Yield every node to depth ``n_max``, level by level in index order.

    Leaves at depth ``n_max`` are summarized by tie splits only unless
    ``materialize_leaves``.  When a transform overflows, the child is still
    reported from its split and its subtree is recorded in ``truncated``.
    """
    laws = (pair.mismatched_spectrum(), pair.design_spectrum())
    root = Node(TransformPath(), tie_split(laws[0]), tie_split(laws[1]), laws)
    yield root
    level = [root]
    for depth in range(n_max):
        last = depth + 1 == n_max
        nxt = []
        for node in level:
            if node.laws is None:
                continue
            for step in (MINUS, PLUS):
                path = node.path.child(step)
                if last and not materialize_leaves:
                    child = Node(path, TieSplit(*child_split(node.laws[0], step)),
                                 TieSplit(*child_split(node.laws[1], step)))
                else:
                    try:
                        kids = tuple(transform_laws(node.laws, step, limits, node.path.steps))
                        child = Node(path, tie_split(kids[0]), tie_split(kids[1]), kids)
                    except SupportOverflow as exc:
                        log.warning("%s; subtree below %r truncated", exc, path.steps)
                        if truncated is not None:
                            truncated.append((path.steps, str(exc)))
                        child = Node(path, TieSplit(*child_split(node.laws[0], step)),
                                     TieSplit(*child_split(node.laws[1], step)))
                yield child
                nxt.append(child)
            node.laws = None  # release memory once both children exist
        level = nxt


def check_conditions(pair: ChannelPair, path, variant=Variant.WEAK,
                     limits: EvolutionLimits = DEFAULT_LIMITS) -> ConditionReport:
    path = path if isinstance(path, TransformPath) else TransformPath(path)
    w, v = synthesize_laws([pair.mismatched_spectrum(), pair.design_spectrum()], path, limits)
    return evaluate_conditions(tie_split(w), tie_split(v), variant, path)


@dataclass
class SweepResult:
    variant: Variant
    n_max: int
    reports: list
    violations: list = field(default_factory=list)
    plus_violations: list = field(default_factory=list)
    truncated: list = field(default_factory=list)

    @property
    def root(self) -> ConditionReport:
        return self.reports[0]

    @property
    def hypothesis_met(self) -> bool:
        return self.root.holds

    @property
    def ok(self) -> bool:
        return not self.violations

    def tree(self) -> dict:
        return {r.path.steps: r.as_row() for r in self.reports}


def sweep_preservation(pair: ChannelPair, n_max: int, variant=Variant.WEAK,
                       limits: EvolutionLimits = DEFAULT_LIMITS) -> SweepResult:
    """Condition reports for all ``2**(n_max+1) - 1`` nodes plus preservation audit.

    ``violations`` lists nodes where a preservation rule breaks: in the weak
    variant, a child failing while its parent holds; in the strict variant,
    A lost at any child, B lost after a minus step, or A and B holding
    without ``P_W[L<1] >= P_W[L>1]``.  ``plus_violations`` lists strict B
    failures after a plus step, which are permitted.
    """
    variant = Variant.parse(variant)
    truncated: list = []
    by_path = {}
    result = SweepResult(variant, n_max, [], truncated=truncated)
    for node in walk_tree(pair, n_max, limits, truncated=truncated):
        rep = evaluate_conditions(node.w_split, node.v_split, variant, node.path)
        by_path[node.path.steps] = rep
        result.reports.append(rep)
        if not node.path.steps:
            continue
        parent = by_path[node.path.steps[:-1]]
        step = node.path.steps[-1]
        where = node.path.steps
        if variant is Variant.WEAK:
            if parent.holds and not rep.holds:
                result.violations.append((where, "A/B/C not preserved"))
        else:
            if parent.a.holds and not rep.a.holds:
                result.violations.append((where, "A not preserved"))
            if parent.a.holds and parent.b.holds:
                if step == MINUS and not rep.b.holds:
                    result.violations.append((where, "B not preserved by minus"))
                elif step == PLUS and not rep.b.holds:
                    result.plus_violations.append(where)
    if variant is Variant.STRICT:
        for rep in result.reports:
            if rep.a.holds and rep.b.holds and not w_ordering_holds(rep.w_split):
                result.violations.append((rep.path.steps, "W-ordering implied by A and B fails"))
    return result


def w_ordering_holds(w: TieSplit) -> bool:
    """``P_W[L<1] >= P_W[L>1]``, implied by strict A and B."""
    return w.p_lt >= w.p_gt


def mass_ordering_preserved(s: LrSpectrum) -> tuple[bool, bool]:
    """For a law with ``P[L<1] >= P[L>1]``: does each child keep the inequality?

    Returns ``(minus_ok, plus_ok)``; meaningful for symmetric (own-measure) laws.
    """
    out = []
    for step in (MINUS, PLUS):
        lt, _, gt = child_split(s, step)
        out.append(lt >= gt)
    return tuple(out)


def binary_dominated(p1_low, p1_high) -> bool:
    """First-order stochastic dominance of Bernoulli laws via their CDFs.

    ``True`` when Bernoulli(p1_low) is dominated by Bernoulli(p1_high), i.e.
    ``F_low(x) >= F_high(x)`` at every ``x``.  For a {0,1}-valued variable the
    only informative point is ``x = 0`` where ``F = 1 - p1``.
    """
    cdf = lambda p, x: ZERO if x < 0 else (1 - p if x < 1 else to_rational(1))
    return all(cdf(p1_low, x) >= cdf(p1_high, x) for x in (-1, 0, 1))


def indicator_dominance(w: TieSplit, v: TieSplit) -> dict:
    """Dominance relations of ``1{L>=1}`` and ``1{L<=1}`` under W versus V."""
    return {
        "ge_w_below_v": binary_dominated(w.p_ge, v.p_ge),
        "le_w_above_v": binary_dominated(v.p_le, w.p_le),
    }


@dataclass(frozen=True)
class TieStep:
    path: TransformPath
    p: Any
    p_minus: Any
    p_plus: Any

    @property
    def gap(self):
        return (self.p_minus + self.p_plus) / 2 - self.p

    @property
    def minus_identity(self) -> bool:
        return self.p_minus == 2 * self.p - self.p * self.p

    @property
    def plus_bound(self) -> bool:
        return self.p_plus >= self.p * self.p

    @property
    def submartingale(self) -> bool:
        return self.p_minus + self.p_plus >= 2 * self.p

    @property
    def ok(self) -> bool:
        return self.minus_identity and self.plus_bound and self.submartingale


@dataclass
class TieProcessTrace:
    levels: list
    steps: list
    truncated: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(s.ok for s in self.steps)


def track_tie_process(pair: ChannelPair, n_max: int,
                      limits: EvolutionLimits = DEFAULT_LIMITS) -> TieProcessTrace:
    """``P_W[L = 1]`` at every node and the one-step submartingale audit."""
    truncated: list = []
    ties: dict = {}
    for node in walk_tree(pair, n_max, limits, truncated=truncated):
        ties[node.path.steps] = node.w_split.p_eq
    levels = [{p: ties[p] for p in ties if len(p) == d} for d in range(n_max + 1)]
    steps = []
    for p, value in ties.items():
        if len(p) < n_max and p + MINUS in ties:
            steps.append(TieStep(TransformPath(p), value, ties[p + MINUS], ties[p + PLUS]))
    return TieProcessTrace(levels, steps, truncated)


@dataclass(frozen=True)
class MonotoneEntry:
    transform: str
    kind: str
    given_0: Any
    given_1: Any
    status: str
    reason: str = ""


def _conditional(s: LrSpectrum, step: str, kind: str):
    """``E[1{L' op 1} | 1{L1 op 1} = b]`` for ``b`` in {0, 1} by enumeration."""
    ind = (lambda x: x >= 1) if kind == ">=" else (lambda x: x <= 1)
    num = [ZERO, ZERO]
    den = [ZERO, ZERO]
    for l1, m1 in s.points:
        b = int(ind(l1))
        den[b] += m1
        for l2, m2 in s.points:
            g = l1 * l2 if step == PLUS else (l1 + l2) / (1 + l1 * l2)
            if ind(g):
                num[b] += m1 * m2
    return [num[b] / den[b] if den[b] else None for b in (0, 1)]


def check_monotone_conditional(pair: ChannelPair, path,
                               limits: EvolutionLimits = DEFAULT_LIMITS) -> list:
    """Brute-force monotonicity of the conditional child indicators in the parent's.

    The minus checks only run when ``P_W[L<=1] >= P_W[L>=1]`` at ``path``.
    """
    path = path if isinstance(path, TransformPath) else TransformPath(path)
    w_law = synthesize_laws([pair.mismatched_spectrum(), pair.design_spectrum()],
                            path, limits)[0]
    split = tie_split(w_law)
    entries = []
    for step in (PLUS, MINUS):
        for kind in (">=", "<="):
            name = "plus" if step == PLUS else "minus"
            if step == MINUS and not split.p_le >= split.p_ge:
                entries.append(MonotoneEntry(name, kind, None, None, "skipped",
                                             "P_W[L<=1] < P_W[L>=1]"))
                continue
            e0, e1 = _conditional(w_law, step, kind)
            if e0 is None or e1 is None:
                entries.append(MonotoneEntry(name, kind, e0, e1, "degenerate",
                                             "conditioning event has probability 0"))
            else:
                entries.append(MonotoneEntry(name, kind, e0, e1,
                                             "holds" if e1 >= e0 else "violated"))
    return entries


@dataclass(frozen=True)
class AlignmentEntry:
    path: TransformPath
    pe_sign: int
    z_sign: int | None

    @property
    def verdict(self) -> str:
        if self.z_sign is None:
            return "indeterminate"
        if self.pe_sign == 0 and self.z_sign == 0:
            return "boundary"
        return "aligned" if (self.pe_sign < 0) == (self.z_sign < 0) else "misaligned"


def _sign(x) -> int:
    return (x > 0) - (x < 0)


def check_pe_z_alignment(pair: ChannelPair, n_max: int,
                         limits: EvolutionLimits = DEFAULT_LIMITS) -> list:
    """Per node: sign of ``pe(W,V) - pe(V)`` against sign of ``Z(W,V) - Z(V)``.

    Depth-bounded evidence only; Z comparisons inside the certified error
    bound are reported as indeterminate.
    """
    out = []
    for node in walk_tree(pair, n_max, limits, materialize_leaves=True):
        if node.laws is None:
            continue
        w_law, v_law = node.laws
        if w_law == v_law:
            z_sign = 0
        else:
            z_sign = bhattacharyya(w_law).sign_minus(bhattacharyya(v_law))
        out.append(AlignmentEntry(node.path, _sign(node.w_split.pe - node.v_split.pe), z_sign))
    return out


@dataclass(frozen=True)
class BoundEntry:
    path: TransformPath
    pe_w: Any
    p_w_ge: Any
    p_v_ge: Any
    pe_v: Any
    tie_v: Any
    z_v: ZValue

    @property
    def ordering(self) -> bool:
        return self.p_w_ge <= self.p_v_ge

    @property
    def pe_below_z(self) -> bool | None:
        """``pe(W,V) <= Z(V)``; ``None`` if inside the certified error bound."""
        if self.z_v.exact is not None:
            return self.pe_w <= self.z_v.exact
        if self.pe_w <= self.z_v.lo:
            return True
        if self.pe_w > self.z_v.hi:
            return False
        return None

    def pe_below_matched(self, tie_threshold=ZERO) -> bool | None:
        """``pe(W,V) <= pe(V)``, asserted only where the design tie mass is small."""
        if self.tie_v > tie_threshold:
            return None
        return self.pe_w <= self.pe_v


def check_bounds(pair: ChannelPair, n_max: int,
                 limits: EvolutionLimits = DEFAULT_LIMITS) -> list:
    """Per-node data for the error-probability bounds that follow from A, B, C."""
    out = []
    for node in walk_tree(pair, n_max, limits, materialize_leaves=True):
        if node.laws is None:
            continue
        w, v = node.w_split, node.v_split
        out.append(BoundEntry(node.path, w.pe, w.p_ge, v.p_ge, v.pe, v.p_eq,
                              bhattacharyya(node.laws[1])))
    return out


def identity_checks(pair: ChannelPair, n_max: int, limits: EvolutionLimits = DEFAULT_LIMITS,
                    enumeration_limit: int = 400) -> list:
    """Exact identity reports at every internal node.

    The bilinear enumeration for the plus step is skipped above
    ``enumeration_limit`` support points.
    """
    reports = []
    pending = {}
    for node in walk_tree(pair, n_max, limits):
        path = node.path.steps
        if path and path[-1] == MINUS and path[:-1] in pending:
            s, t = pending.pop(path[:-1])
            rep = check_pe_minus_recursion(s, t, node.w_split, node.v_split)
            reports.append((path[:-1], rep))
        if node.laws is not None and len(path) < n_max:
            s, t = node.laws
            pending[path] = (s, t)
            if len(s) + len(t) <= enumeration_limit:
                plus_s, plus_t = transform_laws([s, t], PLUS, limits, path)
                reports.append((path, check_p_diff_identity(s, t, PLUS, plus_s, plus_t)))
    return reports


def random_symmetric_pair(rng: np.random.Generator, max_symbols: int = 8,
                          max_weight: int = 12) -> ChannelPair:
    """Random pair on a shared alphabet of 2..max_symbols symbols."""
    n = int(rng.integers(2, max_symbols + 1))
    n_fixed = int(rng.integers(0, n // 2 + 1))
    if (n - n_fixed) % 2:
        n_fixed += 1
    if n_fixed == n:
        n_fixed -= 2
    v = random_symmetric_channel(rng, n, max_weight, n_fixed=n_fixed)
    w = random_symmetric_channel(rng, n, max_weight, zero_prob=0.15, n_fixed=n_fixed)
    return ChannelPair(w, v)


def random_robust_pair(rng: np.random.Generator, max_symbols: int = 8,
                       max_weight: int = 12, max_tries: int = 10_000) -> ChannelPair:
    """Rejection-sample a random pair satisfying the weak conditions at the root."""
    for _ in range(max_tries):
        p = random_symmetric_pair(rng, max_symbols, max_weight)
        rep = evaluate_conditions(tie_split(p.mismatched_spectrum()),
                                  tie_split(p.design_spectrum()), Variant.WEAK)
        if rep.holds:
            return p
    raise RuntimeError("no pair satisfying the root conditions found")


def check_info_set_inclusion(v_design: SymmetricChannel, w_true: SymmetricChannel,
                             N: int, size: int,
                             limits: EvolutionLimits = DEFAULT_LIMITS) -> dict:
    """Information sets designed for V and for W; reports whether ``A_V`` is inside ``A_W``."""
    from .construction import build_info_set

    n = N.bit_length() - 1
    a_v = build_info_set(v_design, n, size, limits=limits).info_set
    a_w = build_info_set(w_true, n, size, limits=limits).info_set
    return {"N": N, "size": size, "a_v": list(a_v), "a_w": list(a_w),
            "included": set(a_v) <= set(a_w)}


__all__ = [
    "Variant", "Condition", "ConditionReport", "evaluate_conditions", "Node",
    "walk_tree", "check_conditions", "SweepResult", "sweep_preservation",
    "w_ordering_holds", "mass_ordering_preserved", "binary_dominated",
    "indicator_dominance", "TieStep", "TieProcessTrace", "track_tie_process",
    "MonotoneEntry", "check_monotone_conditional", "AlignmentEntry",
    "check_pe_z_alignment", "BoundEntry", "check_bounds", "identity_checks",
    "random_symmetric_pair", "random_robust_pair", "check_info_set_inclusion",
]
