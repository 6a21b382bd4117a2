"""Information-set construction from a design channel and mismatched error bounds."""

from __future__ import annotations

import csv
import functools
import io
import json
import logging
import warnings
from dataclasses import dataclass, field
from typing import Any

import gmpy2

from .channel import ChannelError, ChannelPair, SymmetricChannel, channel_from_json
from .evolution import (DEFAULT_LIMITS, MINUS, PLUS, EvolutionLimits, TransformPath,
                        transform_laws)
from .metrics import DEFAULT_PRECISION, ZValue, _rounding, bhattacharyya, decimal_string, pe
from .rational import ZERO, Q, fmt, to_rational

log = logging.getLogger(__name__)

SPEC_VERSION = 1
SPEC_FORMAT = "polar-mismatch/code-spec"


class SpecFormatError(ValueError):
    """Malformed code-spec document; the message names the offending location."""


@dataclass(frozen=True)
class IndexMetrics:
    """Matched design-channel figures at one index ``i`` (1-based)."""

    i: int
    z: ZValue
    pe: Any
    tie_mass: Any


@dataclass(frozen=True)
class CodeSpec:
    n: int
    info_set: tuple
    frozen_values: tuple = ()
    design_channel: SymmetricChannel | None = None
    per_index: tuple = ()
    version: int = SPEC_VERSION

    def __post_init__(self):
        N = 1 << self.n
        info = tuple(int(i) for i in self.info_set)
        if list(info) != sorted(set(info)):
            raise ValueError("info_set must be sorted and free of duplicates")
        if info and not (1 <= info[0] and info[-1] <= N):
            raise ValueError(f"info_set indices must lie in 1..{N}")
        object.__setattr__(self, "info_set", info)
        n_frozen = N - len(info)
        frozen = tuple(int(b) for b in self.frozen_values) or (0,) * n_frozen
        if len(frozen) != n_frozen or set(frozen) - {0, 1}:
            raise ValueError(f"frozen_values must be {n_frozen} bits")
        object.__setattr__(self, "frozen_values", frozen)

    @property
    def N(self) -> int:
        return 1 << self.n

    @property
    def frozen_set(self) -> tuple:
        info = set(self.info_set)
        return tuple(i for i in range(1, self.N + 1) if i not in info)

    def frozen_map(self) -> dict:
        return dict(zip(self.frozen_set, self.frozen_values))

    def info_mask(self) -> list:
        """Boolean per index (0-based positions)."""
        info = set(self.info_set)
        return [i in info for i in range(1, self.N + 1)]

    def with_frozen(self, values) -> "CodeSpec":
        return CodeSpec(self.n, self.info_set, tuple(values), self.design_channel,
                        self.per_index, self.version)


def matched_laws(v: SymmetricChannel, n: int, limits: EvolutionLimits = DEFAULT_LIMITS) -> list:
    """Matched LR laws of all ``2**n`` synthesized channels, in index order."""
    level = [v.spectrum()]
    paths = [""]
    for _ in range(n):
        nxt, nxt_paths = [], []
        for s, p in zip(level, paths):
            for step in (MINUS, PLUS):
                nxt.append(transform_laws([s], step, limits, p)[0])
                nxt_paths.append(p + step)
        level, paths = nxt, nxt_paths
    return level


def index_metrics(v: SymmetricChannel, n: int, limits: EvolutionLimits = DEFAULT_LIMITS,
                  precision: int = DEFAULT_PRECISION) -> tuple:
    out = []
    for i, s in enumerate(matched_laws(v, n, limits), start=1):
        out.append(IndexMetrics(i, bhattacharyya(s, precision), pe(s), s.mass_of(1)))
    return tuple(out)


def _compare(a: IndexMetrics, b: IndexMetrics) -> int:
    sign = a.z.sign_minus(b.z)
    if sign is None:
        # enclosures overlap: order by midpoint, this is below certified precision
        log.debug("Z of indices %d and %d agree to certified precision", a.i, b.i)
        da, db = a.z.mid, b.z.mid
        sign = (da > db) - (da < db)
    if sign:
        return sign
    if a.pe != b.pe:
        return -1 if a.pe < b.pe else 1
    return b.i - a.i


def selection_order(per_index) -> list:
    """Indices from most to least reliable: Z, then pe, then larger index."""
    return [m.i for m in sorted(per_index, key=functools.cmp_to_key(_compare))]


def _z_upper(metrics) -> Any:
    with _rounding(DEFAULT_PRECISION, gmpy2.RoundUp):
        total = gmpy2.mpfr(0)
        for m in metrics:
            total = total + m.z.hi
    return total


def build_info_set(v: SymmetricChannel, n: int, size: int | None = None,
                   target_bound=None, limits: EvolutionLimits = DEFAULT_LIMITS) -> CodeSpec:
    """Choose the information set by ascending matched Bhattacharyya value.

    Parameters
    ----------
    v : SymmetricChannel
        Design channel.
    n : int
        Number of polarization levels; blocklength ``2**n``.
    size : int, optional
        Number of information indices.
    target_bound : rational, optional
        Alternative to ``size``: take the longest prefix of the selection
        order whose summed Z (upper enclosure) stays at or below the target.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if (size is None) == (target_bound is None):
        raise ValueError("give exactly one of size and target_bound")
    N = 1 << n
    if size is not None and not 0 <= size <= N:
        raise ValueError(f"size {size} outside 0..{N}")
    per_index = index_metrics(v, n, limits)
    order = selection_order(per_index)
    if size is None:
        target = to_rational(target_bound)
        chosen: list = []
        for i in order:
            if _z_upper([per_index[j - 1] for j in chosen + [i]]) > target:
                break
            chosen.append(i)
        size = len(chosen)
    return CodeSpec(n, tuple(sorted(order[:size])), (), v, per_index)


@dataclass(frozen=True)
class IndexBound:
    i: int
    pe_mismatched: Any
    pe_matched: Any
    z_design: ZValue


@dataclass
class BoundReport:
    terms: list = field(default_factory=list)

    @property
    def sum_pe_mismatched(self):
        return sum((t.pe_mismatched for t in self.terms), ZERO)

    @property
    def sum_pe_matched(self):
        return sum((t.pe_matched for t in self.terms), ZERO)

    @property
    def sum_z_design(self) -> ZValue:
        if not self.terms:
            z = gmpy2.mpfr(0, DEFAULT_PRECISION)
            return ZValue(z, z, ZERO)
        lo = hi = None
        with _rounding(DEFAULT_PRECISION, gmpy2.RoundDown):
            lo = sum((t.z_design.lo for t in self.terms), gmpy2.mpfr(0))
        with _rounding(DEFAULT_PRECISION, gmpy2.RoundUp):
            hi = sum((t.z_design.hi for t in self.terms), gmpy2.mpfr(0))
        exact = None
        if all(t.z_design.exact is not None for t in self.terms):
            exact = sum((t.z_design.exact for t in self.terms), ZERO)
        return ZValue(lo, hi, exact)

    def as_dict(self) -> dict:
        return {
            "sum_pe_mismatched": fmt(self.sum_pe_mismatched),
            "sum_pe_matched": fmt(self.sum_pe_matched),
            "sum_z_design": str(self.sum_z_design),
            "terms": [{"i": t.i, "pe_mismatched": fmt(t.pe_mismatched),
                       "pe_matched": fmt(t.pe_matched), "z_design": str(t.z_design)}
                      for t in self.terms],
        }


def bound_block_error(pair: ChannelPair, spec: CodeSpec,
                      limits: EvolutionLimits = DEFAULT_LIMITS) -> BoundReport:
    """Union bound ``sum over A of pe(W, V)`` for decoding ``pair.w`` with metric ``pair.v``."""
    from .robustness import walk_tree

    if spec.design_channel is not None and spec.design_channel != pair.v:
        warnings.warn("metric channel differs from the code's design channel", stacklevel=2)
    wanted = set(spec.info_set)
    splits = {}
    for node in walk_tree(pair, spec.n, limits):
        if node.path.n == spec.n and node.path.i in wanted:
            splits[node.path.i] = (node.w_split, node.v_split)
    design = {m.i: m for m in spec.per_index}
    report = BoundReport()
    for i in spec.info_set:
        w, v = splits[i]
        if i in design:
            z = design[i].z
        else:
            z = bhattacharyya(_law_at(pair.v, spec.n, i, limits))
        report.terms.append(IndexBound(i, w.pe, v.pe, z))
    return report


def _law_at(v: SymmetricChannel, n: int, i: int, limits):
    from .evolution import synthesize

    return synthesize(v.spectrum(), TransformPath.from_index(1 << n, i), limits)


# -- serialization ---------------------------------------------------------

def _z_to_json(z: ZValue) -> dict:
    return {"z": str(z), "z_lo": fmt(Q(z.lo)), "z_hi": fmt(Q(z.hi)),
            "z_exact": None if z.exact is None else fmt(z.exact),
            "precision": z.lo.precision}


def _z_from_json(obj: dict) -> ZValue:
    prec = int(obj.get("precision", DEFAULT_PRECISION))
    lo = gmpy2.mpfr(to_rational(obj["z_lo"]), prec)
    hi = gmpy2.mpfr(to_rational(obj["z_hi"]), prec)
    exact = obj.get("z_exact")
    return ZValue(lo, hi, None if exact is None else to_rational(exact))


def spec_to_dict(spec: CodeSpec) -> dict:
    return {
        "format": SPEC_FORMAT,
        "version": spec.version,
        "n": spec.n,
        "N": spec.N,
        "info_set": list(spec.info_set),
        "frozen_values": [[i, b] for i, b in zip(spec.frozen_set, spec.frozen_values)],
        "design_channel": spec.design_channel.to_json() if spec.design_channel else None,
        "per_index": [dict(i=m.i, pe=fmt(m.pe), tie_mass=fmt(m.tie_mass), **_z_to_json(m.z))
                      for m in spec.per_index],
    }


def export_spec(spec: CodeSpec) -> bytes:
    return (json.dumps(spec_to_dict(spec), indent=2) + "\n").encode()


def _field(obj, key, where):
    if not isinstance(obj, dict):
        raise SpecFormatError(f"{where}: expected an object")
    if key not in obj:
        raise SpecFormatError(f"{where}.{key}: missing")
    return obj[key]


def import_spec(data) -> CodeSpec:
    """Parse a code-spec document (bytes or str).

    An unsorted information set is normalized with a warning; an unknown
    version raises :class:`SpecFormatError`.
    """
    if isinstance(data, bytes):
        data = data.decode()
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SpecFormatError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    version = _field(doc, "version", "$")
    if version != SPEC_VERSION:
        raise SpecFormatError(f"$.version: unsupported code-spec version {version!r} "
                              f"(this tool reads version {SPEC_VERSION})")
    n = _field(doc, "n", "$")
    if not isinstance(n, int) or n < 0:
        raise SpecFormatError("$.n: expected a non-negative integer")
    N = 1 << n
    if doc.get("N", N) != N:
        raise SpecFormatError(f"$.N: {doc['N']} does not equal 2**n = {N}")
    info = _field(doc, "info_set", "$")
    if not isinstance(info, list) or not all(isinstance(i, int) for i in info):
        raise SpecFormatError("$.info_set: expected a list of integers")
    for k, i in enumerate(info):
        if not 1 <= i <= N:
            raise SpecFormatError(f"$.info_set[{k}]: index {i} outside 1..{N}")
    if len(set(info)) != len(info):
        raise SpecFormatError("$.info_set: duplicate indices")
    if info != sorted(info):
        warnings.warn("info_set was not sorted; normalized", stacklevel=2)
        info = sorted(info)
    frozen_set = [i for i in range(1, N + 1) if i not in set(info)]
    frozen = dict.fromkeys(frozen_set, 0)
    for k, entry in enumerate(doc.get("frozen_values") or []):
        where = f"$.frozen_values[{k}]"
        if not (isinstance(entry, list) and len(entry) == 2):
            raise SpecFormatError(f"{where}: expected [index, bit]")
        i, b = entry
        if i not in frozen:
            raise SpecFormatError(f"{where}: {i} is not a frozen index")
        if b not in (0, 1):
            raise SpecFormatError(f"{where}: bit must be 0 or 1")
        frozen[i] = b
    design = None
    if doc.get("design_channel") is not None:
        try:
            design = channel_from_json(doc["design_channel"])
        except ChannelError as exc:
            raise SpecFormatError(f"$.design_channel: {exc}") from None
    per_index = []
    for k, row in enumerate(doc.get("per_index") or []):
        where = f"$.per_index[{k}]"
        try:
            per_index.append(IndexMetrics(int(_field(row, "i", where)),
                                          _z_from_json(row),
                                          to_rational(_field(row, "pe", where)),
                                          to_rational(_field(row, "tie_mass", where))))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SpecFormatError):
                raise
            raise SpecFormatError(f"{where}: {exc}") from None
    return CodeSpec(n, tuple(info), tuple(frozen[i] for i in frozen_set), design,
                    tuple(per_index), version)


def per_index_csv(spec: CodeSpec) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["i", "z", "pe", "tie_mass", "info"])
    info = set(spec.info_set)
    for m in spec.per_index:
        writer.writerow([m.i, decimal_string(m.z.mid), fmt(m.pe), fmt(m.tie_mass),
                         int(m.i in info)])
    return buf.getvalue()


__all__ = [
    "SPEC_VERSION", "SpecFormatError", "IndexMetrics", "CodeSpec", "matched_laws",
    "index_metrics", "selection_order", "build_info_set", "IndexBound", "BoundReport",
    "bound_block_error", "spec_to_dict", "export_spec", "import_spec", "per_index_csv",
]
