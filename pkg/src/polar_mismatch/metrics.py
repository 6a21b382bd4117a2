"""Scalar figures of merit on LR spectra and exact identity checks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import gmpy2

from .channel import LrSpectrum
from .evolution import PLUS, TransformPath, transform_minus, transform_plus
from .rational import HALF, INF, ONE, ZERO, fmt, is_rational_square, rational_sqrt

DEFAULT_PRECISION = 256  # bits; ~77 significant decimal digits
Z_DIGITS = 40


def h_tie(lr):
    """Soft error indicator: 1 above one, 1/2 at one, 0 below."""
    if lr > 1:
        return ONE
    if lr == 1:
        return HALF
    return ZERO


@dataclass(frozen=True)
class TieSplit:
    p_lt: Any
    p_eq: Any
    p_gt: Any

    def __post_init__(self):
        if self.p_lt + self.p_eq + self.p_gt != 1:
            raise ValueError("tie split does not sum to one")

    @property
    def p_ge(self):
        return self.p_gt + self.p_eq

    @property
    def p_le(self):
        return self.p_lt + self.p_eq

    @property
    def pe(self):
        return self.p_gt + self.p_eq / 2

    def as_row(self) -> dict:
        return {"p_lt": fmt(self.p_lt), "p_eq": fmt(self.p_eq), "p_gt": fmt(self.p_gt)}


def tie_split(s: LrSpectrum) -> TieSplit:
    lt = eq = ZERO
    for lr, m in s.points:
        if lr < 1:
            lt += m
        elif lr == 1:
            eq += m
        else:
            break
    return TieSplit(lt, eq, 1 - lt - eq)


def pe(s: LrSpectrum):
    """Error probability of the soft ML decision: ``P[L > 1] + P[L = 1] / 2``."""
    return sum((m * h_tie(lr) for lr, m in s.points), ZERO)


@dataclass(frozen=True)
class ZValue:
    """Certified enclosure ``lo <= Z <= hi``; ``exact`` is set when Z is rational."""

    lo: Any
    hi: Any
    exact: Any = None

    @property
    def mid(self):
        if self.exact is not None:
            return gmpy2.mpfr(self.exact, self.lo.precision)
        with _rounding(self.lo.precision, gmpy2.RoundToNearest):
            return (self.lo + self.hi) / 2

    @property
    def error_bound(self):
        with _rounding(self.lo.precision, gmpy2.RoundUp):
            return self.hi - self.lo

    def __float__(self):
        return float(self.mid)

    def __str__(self):
        return decimal_string(self.mid)

    def sign_minus(self, other: "ZValue"):
        """Sign of ``self - other``: -1, 0, +1, or ``None`` when indeterminate."""
        if self.exact is not None and other.exact is not None:
            d = self.exact - other.exact
            return (d > 0) - (d < 0)
        if self.hi < other.lo:
            return -1
        if self.lo > other.hi:
            return 1
        return None

    def square(self) -> "ZValue":
        with _rounding(self.lo.precision, gmpy2.RoundDown):
            lo = self.lo * self.lo
        with _rounding(self.lo.precision, gmpy2.RoundUp):
            hi = self.hi * self.hi
        exact = self.exact * self.exact if self.exact is not None else None
        return ZValue(lo, hi, exact)


def _rounding(precision: int, mode):
    return gmpy2.context(gmpy2.get_context(), precision=precision, round=mode)


def decimal_string(x, digits: int = Z_DIGITS) -> str:
    if not isinstance(x, type(gmpy2.mpfr(0))):
        x = gmpy2.mpfr(x, DEFAULT_PRECISION)
    return format(x, f".{digits}g")


def bhattacharyya(s: LrSpectrum, precision: int = DEFAULT_PRECISION) -> ZValue:
    """``sum(mass * sqrt(lr))`` enclosed by directed rounding at ``precision`` bits."""
    if s.points[-1][0] == INF:
        raise ValueError("Bhattacharyya parameter undefined with mass at LR = inf")
    if all(is_rational_square(lr) for lr in s.lrs):
        z = sum((m * rational_sqrt(lr) for lr, m in s.points), ZERO)
        with _rounding(precision, gmpy2.RoundDown):
            lo = gmpy2.mpfr(z)
        with _rounding(precision, gmpy2.RoundUp):
            hi = gmpy2.mpfr(z)
        return ZValue(lo, hi, z)
    bounds = []
    for mode in (gmpy2.RoundDown, gmpy2.RoundUp):
        with _rounding(precision, mode):
            acc = gmpy2.mpfr(0)
            for lr, m in s.points:
                acc = acc + gmpy2.mpfr(m) * gmpy2.sqrt(gmpy2.mpfr(lr))
            bounds.append(acc)
    return ZValue(bounds[0], bounds[1])


def k_constant(s: LrSpectrum, t: LrSpectrum):
    """``(P_s[L<1] + P_t[L<1]) - (P_s[L>1] + P_t[L>1])``."""
    a, b = tie_split(s), tie_split(t)
    return (a.p_lt + b.p_lt) - (a.p_gt + b.p_gt)


@dataclass(frozen=True)
class IdentityReport:
    name: str
    lhs: Any
    rhs: Any
    diff: Any
    holds: bool

    def as_dict(self) -> dict:
        show = lambda x: str(x) if isinstance(x, ZValue) else fmt(x)
        return {"name": self.name, "lhs": show(self.lhs), "rhs": show(self.rhs),
                "diff": show(self.diff) if not isinstance(self.diff, float) else repr(self.diff),
                "holds": self.holds}


def _pe_of(x):
    return x.pe if isinstance(x, TieSplit) else pe(x)


def _exact_report(name, lhs, rhs) -> IdentityReport:
    return IdentityReport(name, lhs, rhs, lhs - rhs, lhs == rhs)


def check_pe_minus_recursion(s: LrSpectrum, t: LrSpectrum,
                             minus_s=None, minus_t=None) -> IdentityReport:
    """Minus-step recursion of the Pe difference.

    ``s`` and ``t`` are the laws of one metric LR under the true channel and
    under the metric channel.  Checks
    ``pe(s-) - pe(t-) == (pe(s) - pe(t)) * k_constant(s, t)``.  Precomputed
    minus children may be passed as spectra or as :class:`TieSplit`.
    """
    minus_s = minus_s if minus_s is not None else transform_minus(s)
    minus_t = minus_t if minus_t is not None else transform_minus(t)
    lhs = _pe_of(minus_s) - _pe_of(minus_t)
    rhs = (pe(s) - pe(t)) * k_constant(s, t)
    return _exact_report("pe_minus_recursion", lhs, rhs)


def _support_union(s: LrSpectrum, t: LrSpectrum):
    ds, dt = s.as_dict(), t.as_dict()
    values = sorted(set(ds) | set(dt))
    return [(v, ds.get(v, ZERO), dt.get(v, ZERO)) for v in values]


def check_p_diff_identity(s: LrSpectrum, t: LrSpectrum, step: str = PLUS,
                          child_s: LrSpectrum | None = None,
                          child_t: LrSpectrum | None = None) -> IdentityReport:
    """``P_s'[L>=1] - P_t'[L>=1]`` against the ``(s - t) x (s + t)`` bilinear form.

    The right-hand side enumerates the product support directly.
    """
    if child_s is None:
        child_s = transform_plus(s) if step == PLUS else transform_minus(s)
    if child_t is None:
        child_t = transform_plus(t) if step == PLUS else transform_minus(t)
    lhs = tie_split(child_s).p_ge - tie_split(child_t).p_ge
    pts = _support_union(s, t)
    rhs = ZERO
    for l1, s1, t1 in pts:
        d = s1 - t1
        if d == 0:
            continue
        for l2, s2, t2 in pts:
            g = l1 * l2 if step == PLUS else (l1 + l2) / (1 + l1 * l2)
            if g >= 1:
                rhs += d * (s2 + t2)
    return _exact_report(f"p_diff_{'plus' if step == PLUS else 'minus'}", lhs, rhs)


def check_z_plus_squaring(s: LrSpectrum, plus_s: LrSpectrum | None = None,
                          tolerance: float = 1e-40,
                          precision: int = DEFAULT_PRECISION) -> IdentityReport:
    """Bhattacharyya value of the plus child against the square of the parent's."""
    plus_s = plus_s if plus_s is not None else transform_plus(s)
    lhs = bhattacharyya(plus_s, precision)
    rhs = bhattacharyya(s, precision).square()
    if lhs.exact is not None and rhs.exact is not None:
        diff = lhs.exact - rhs.exact
        return IdentityReport("z_plus_squaring", lhs, rhs, diff, diff == 0)
    with _rounding(precision, gmpy2.RoundUp):
        gap = max(abs(lhs.hi - rhs.lo), abs(rhs.hi - lhs.lo))
    return IdentityReport("z_plus_squaring", lhs, rhs, float(gap), gap <= tolerance)


def metric_row(path, s: LrSpectrum, precision: int = DEFAULT_PRECISION) -> dict:
    """CSV-ready row: path, N, i, p_lt, p_eq, p_gt, pe, z."""
    path = path if isinstance(path, TransformPath) else TransformPath(path)
    row = {"path": path.steps, "N": path.N, "i": path.i}
    row.update(tie_split(s).as_row())
    row["pe"] = fmt(pe(s))
    row["z"] = str(bhattacharyya(s, precision))
    if s.approximate:
        row["approximate"] = True
    return row


__all__ = [
    "h_tie", "TieSplit", "tie_split", "pe", "ZValue", "bhattacharyya",
    "k_constant", "IdentityReport", "check_pe_minus_recursion",
    "check_p_diff_identity", "check_z_plus_squaring", "metric_row",
    "decimal_string", "DEFAULT_PRECISION",
]
