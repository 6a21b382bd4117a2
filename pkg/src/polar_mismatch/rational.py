"""Exact rational helpers shared by every module.

Probabilities and likelihood ratios are ``gmpy2.mpq`` values.  They compare
and hash equal to :class:`fractions.Fraction`, so callers may pass either.
The infinite likelihood ratio is represented by ``math.inf``.
"""

from __future__ import annotations

import math
from decimal import Decimal
from fractions import Fraction
from numbers import Rational as _RationalABC

import gmpy2

Q = gmpy2.mpq
ZERO = Q(0)
ONE = Q(1)
HALF = Q(1, 2)
INF = math.inf

_MPQ = type(Q(0))


def to_rational(value) -> gmpy2.mpq:
    """Convert ``value`` to an exact rational.

    Accepts ints, ``Fraction``/``mpq``, ``Decimal`` and strings such as
    ``"3/10"``, ``"0.3"`` or ``"1e-2"``.  Floats are rejected because the
    tie event ``L == 1`` has positive probability and must be exact.
    """
    if isinstance(value, _MPQ):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not probabilities")
    if isinstance(value, int):
        return Q(value)
    if isinstance(value, (Fraction, _RationalABC)):
        return Q(value.numerator, value.denominator)
    if isinstance(value, Decimal):
        f = Fraction(value)
        return Q(f.numerator, f.denominator)
    if isinstance(value, str):
        try:
            f = Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"not an exact rational literal: {value!r}") from exc
        return Q(f.numerator, f.denominator)
    if isinstance(value, float):
        raise TypeError(
            f"float {value!r} is not accepted; pass a string such as '3/10'")
    raise TypeError(f"cannot interpret {type(value).__name__} as a rational")


def fmt(value) -> str:
    """Render a rational (or infinite LR) losslessly as ``"p/q"``."""
    if value == INF:
        return "inf"
    q = to_rational(value)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def parse_lr(text: str):
    """Inverse of :func:`fmt` for likelihood-ratio values."""
    if text.strip().lower() in ("inf", "infinity"):
        return INF
    return to_rational(text)


def likelihood_ratio(p0, p1):
    """``p1 / p0`` with ``p0 == 0 < p1`` mapped to infinity.

    Returns ``None`` when both probabilities vanish (undefined metric).
    """
    if p0 == 0:
        return INF if p1 > 0 else None
    return Q(p1) / Q(p0)


def is_rational_square(q) -> bool:
    q = to_rational(q)
    return gmpy2.is_square(q.numerator) and gmpy2.is_square(q.denominator)


def rational_sqrt(q) -> gmpy2.mpq:
    q = to_rational(q)
    return Q(gmpy2.isqrt(q.numerator), gmpy2.isqrt(q.denominator))
