"""Command-line front end: ``polar-mismatch {analyze,verify,construct,simulate,counterexample}``.

Exit codes: 0 success, 1 a proved invariant was broken, 2 invalid input,
3 exact evolution overflowed, 4 simulated BLER above the analytic bound.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import logging
import os
import sys
import time
import warnings

from . import __version__
from .channel import ChannelError, ChannelPair, channel_from_json, counterexample_pair, \
    parse_channel_arg
from .construction import SpecFormatError, build_info_set, import_spec, per_index_csv, \
    spec_to_dict
from .evolution import (DEFAULT_LIMITS, MINUS, PLUS, EvolutionLimits, SupportOverflow,
                        all_paths, transform_laws)
from .metrics import bhattacharyya, metric_row, pe, tie_split
from .rational import fmt, to_rational
from .robustness import (Variant, check_bounds, check_pe_z_alignment, evaluate_conditions,
                         sweep_preservation, track_tie_process)
from .simulator import SimConfig, run_monte_carlo

log = logging.getLogger("polar_mismatch")

EXIT_OK, EXIT_THEOREM, EXIT_INPUT, EXIT_OVERFLOW, EXIT_BOUND = 0, 1, 2, 3, 4


class Inputs:
    """Loads channel/spec arguments and records a sha256 per input."""

    def __init__(self):
        self.hashes: dict = {}

    def _read(self, name, path):
        with open(path, "rb") as fh:
            data = fh.read()
        self.hashes[name] = {"path": path, "sha256": hashlib.sha256(data).hexdigest()}
        return data

    def channel(self, name, text):
        if os.path.exists(text):
            raw = self._read(name, text)
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ChannelError(f"{text}: line {exc.lineno} column {exc.colno}: "
                                   f"{exc.msg}") from None
            return channel_from_json(obj)
        self.hashes[name] = {"literal": text,
                             "sha256": hashlib.sha256(text.encode()).hexdigest()}
        return parse_channel_arg(text)

    def spec(self, name, path):
        return import_spec(self._read(name, path))


def _limits(args) -> EvolutionLimits:
    if getattr(args, "bins", None):
        return EvolutionLimits.quantized(args.bins, args.max_support)
    return EvolutionLimits(max_support=args.max_support)


def _manifest(args, inputs: Inputs, started: float) -> dict:
    config = {k: v for k, v in vars(args).items() if k not in ("func",)}
    return {"command": args.command, "argv": sys.argv[1:], "config": config,
            "version": __version__, "inputs": inputs.hashes,
            "started": _dt.datetime.fromtimestamp(started, _dt.timezone.utc).isoformat(),
            "elapsed_s": round(time.time() - started, 6)}


def _rows_csv(rows) -> str:
    buf = io.StringIO()
    fields: list = []
    for r in rows:
        fields.extend(k for k in r if k not in fields)
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def _emit(args, payload: dict, rows=None, csv_text=None):
    """Write JSON (manifest embedded) or CSV (manifest in a sidecar file)."""
    manifest = payload["manifest"]
    if args.format == "csv":
        text = csv_text if csv_text is not None else _rows_csv(rows or [])
        if args.out:
            with open(args.out + ".manifest.json", "w") as fh:
                json.dump(manifest, fh, indent=2)
    else:
        text = json.dumps(payload, indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _pair_from_args(args, inputs: Inputs) -> ChannelPair:
    if getattr(args, "counterexample", False):
        return counterexample_pair()
    if not args.true or not args.metric:
        raise ChannelError("give --true and --metric (or --counterexample)")
    return ChannelPair(inputs.channel("true", args.true), inputs.channel("metric", args.metric))


# -- commands --------------------------------------------------------------

def cmd_analyze(args, inputs: Inputs, started: float) -> int:
    metric = inputs.channel("metric", args.metric)
    if args.depth < 0:
        raise ValueError("depth must be non-negative")
    if args.true:
        pair = ChannelPair(inputs.channel("true", args.true), metric)
        kinds = ("matched", "mismatched")
        roots = [pair.design_spectrum(), pair.mismatched_spectrum()]
    else:
        kinds = ("matched",)
        roots = [metric.spectrum()]
    limits = _limits(args)
    rows = []
    level = {"": roots}
    for depth in range(args.depth + 1):
        for path in all_paths(depth):
            for kind, s in zip(kinds, level[path.steps]):
                rows.append(dict(table=kind, **metric_row(path, s)))
        if depth == args.depth:
            break
        level = {p + step: transform_laws(laws, step, limits, p)
                 for p, laws in level.items() for step in (MINUS, PLUS)}
    _emit(args, {"manifest": _manifest(args, inputs, started), "rows": rows}, rows)
    return EXIT_OK


def cmd_verify(args, inputs: Inputs, started: float) -> int:
    pair = _pair_from_args(args, inputs)
    limits = _limits(args)
    variants = [Variant.WEAK, Variant.STRICT] if args.variant == "both" \
        else [Variant.parse(args.variant)]
    if args.counterexample and args.variant == "weak" and not args.variant_given:
        variants = [Variant.STRICT]
    report: dict = {"pair": pair.to_json(), "depth": args.depth, "sweeps": {}}
    failures = []
    warnings_out = []
    truncated = []
    rows = []
    for variant in variants:
        sweep = sweep_preservation(pair, args.depth, variant, limits)
        truncated.extend(sweep.truncated)
        entry = {"hypothesis_met": sweep.hypothesis_met,
                 "nodes": [r.as_row() for r in sweep.reports],
                 "violations": [{"path": p, "what": w} for p, w in sweep.violations],
                 "plus_violations": [{"path": p, "what": "strict B fails after plus"}
                                     for p in sweep.plus_violations]}
        report["sweeps"][variant.value] = entry
        rows.extend(r.as_row() for r in sweep.reports)
        if not sweep.hypothesis_met:
            msg = (f"{variant.value}: root conditions not met "
                   f"(A={sweep.root.a.holds}, B={sweep.root.b.holds}"
                   + (f", C={sweep.root.c.holds}" if sweep.root.c else "") + "); hypothesis unmet")
            warnings_out.append(msg)
            log.warning(msg)
        elif variant is Variant.WEAK and sweep.violations:
            failures.extend(f"weak preservation: {p} {w}" for p, w in sweep.violations)
        if variant is Variant.STRICT and sweep.violations:
            failures.extend(f"strict: {p} {w}" for p, w in sweep.violations)
        for p in sweep.plus_violations:
            log.info("plus-violation at %r (expected behaviour)", p)
    trace = track_tie_process(pair, args.depth, limits)
    report["tie_process"] = {
        "levels": [{p: fmt(v) for p, v in lvl.items()} for lvl in trace.levels],
        "steps": [{"path": s.path.steps, "p": fmt(s.p), "p_minus": fmt(s.p_minus),
                   "p_plus": fmt(s.p_plus), "gap": fmt(s.gap), "ok": s.ok}
                  for s in trace.steps]}
    failures.extend(f"tie process: {s.path.steps}" for s in trace.steps if not s.ok)
    if not args.skip_alignment:
        report["alignment"] = [{"path": e.path.steps, "pe_sign": e.pe_sign,
                                "z_sign": e.z_sign, "verdict": e.verdict}
                               for e in check_pe_z_alignment(pair, args.depth, limits)]
        bounds = check_bounds(pair, args.depth, limits)
        report["bounds"] = [{"path": b.path.steps, "p_w_ge": fmt(b.p_w_ge),
                             "p_v_ge": fmt(b.p_v_ge), "ordering": b.ordering,
                             "pe_w": fmt(b.pe_w), "z_v": str(b.z_v),
                             "pe_below_z": b.pe_below_z,
                             "pe_below_matched": b.pe_below_matched(
                                 to_rational(args.tie_threshold))}
                            for b in bounds]
    report["truncated"] = [{"path": p, "reason": r} for p, r in truncated]
    report["failures"] = failures
    report["warnings"] = warnings_out
    _emit(args, {"manifest": _manifest(args, inputs, started), "report": report}, rows)
    for f in failures:
        print(f"FAIL {f}", file=sys.stderr)
    if truncated:
        print(f"overflow: sweep truncated at {truncated[0][0]!r}", file=sys.stderr)
    if failures:
        return EXIT_THEOREM
    return EXIT_OVERFLOW if truncated else EXIT_OK


def cmd_construct(args, inputs: Inputs, started: float) -> int:
    v = inputs.channel("design", args.channel)
    target = to_rational(args.target_bound) if args.target_bound is not None else None
    spec = build_info_set(v, args.n, args.size, target, _limits(args))
    if args.format == "csv":
        payload = {"manifest": _manifest(args, inputs, started)}
        _emit(args, payload, csv_text=per_index_csv(spec))
    else:
        doc = spec_to_dict(spec)
        doc["manifest"] = _manifest(args, inputs, started)
        text = json.dumps(doc, indent=2) + "\n"
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    return EXIT_OK


def cmd_simulate(args, inputs: Inputs, started: float) -> int:
    w = inputs.channel("true", args.true)
    v = inputs.channel("metric", args.metric) if args.metric else w
    pair = ChannelPair(w, v)
    spec = inputs.spec("spec", args.spec)
    cfg = SimConfig(pair, spec, args.trials, args.seed, args.mode, args.tie_tol,
                    keep_trace=bool(args.trace))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = run_monte_carlo(cfg, limits=_limits(args))
    for wmsg in caught:
        log.warning("%s", wmsg.message)
    if args.trace:
        with open(args.trace, "w") as fh:
            fh.write(rep.trace_csv())
    lo, hi = rep.wilson_ci_95
    bound = "n/a" if rep.analytic_bound is None else f"{float(rep.analytic_bound):.6g}"
    print(f"BLER {rep.bler_hat:.6g} (95% CI [{lo:.6g}, {hi:.6g}], "
          f"{rep.block_errors}/{rep.trials}) vs analytic bound {bound}", file=sys.stderr)
    payload = {"manifest": _manifest(args, inputs, started), "report": rep.as_dict()}
    _emit(args, payload, [rep.as_dict() | {"wilson_ci_95": f"{lo};{hi}"}])
    if rep.exceeds_bound(5.0):
        print("empirical BLER exceeds the analytic bound by more than 5 sigma",
              file=sys.stderr)
        return EXIT_BOUND
    return EXIT_OK


def counterexample_summary() -> dict:
    """Channels and exact two-level numbers of the built-in counterexample pair."""
    pair = counterexample_pair()
    w0, v0 = pair.mismatched_spectrum(), pair.design_spectrum()
    w1, v1 = transform_laws([w0, v0], PLUS)
    out = {"w": pair.w.to_json(), "v": pair.v.to_json()}
    for label, (w, v) in (("root", (w0, v0)), ("plus", (w1, v1))):
        strict = evaluate_conditions(tie_split(w), tie_split(v), Variant.STRICT)
        out[label] = {
            "mismatched_spectrum": w.to_json(), "matched_spectrum": v.to_json(),
            "pe_mismatched": fmt(pe(w)), "pe_matched": fmt(pe(v)),
            "z_mismatched": str(bhattacharyya(w)), "z_matched": str(bhattacharyya(v)),
            "strict_a": strict.a.holds, "strict_b": strict.b.holds,
            "margin_a": fmt(strict.a.margin), "margin_b": fmt(strict.b.margin)}
    return out


def cmd_counterexample(args, inputs: Inputs, started: float) -> int:
    summary = counterexample_summary()
    payload = {"manifest": _manifest(args, inputs, started), "counterexample": summary}
    rows = [{"path": label, "pe_mismatched": summary[label]["pe_mismatched"],
             "pe_matched": summary[label]["pe_matched"],
             "strict_a": summary[label]["strict_a"], "strict_b": summary[label]["strict_b"]}
            for label in ("root", "plus")]
    _emit(args, payload, rows)
    return EXIT_OK


# -- parser ----------------------------------------------------------------

def _common(p):
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--max-support", type=int, default=DEFAULT_LIMITS.max_support,
                   help="largest exact LR support before overflow (default %(default)s)")
    p.add_argument("--bins", type=int, default=0,
                   help="quantize spectra to this many points (approximate mode)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polar-mismatch", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="per-index tie split, pe and Z tables")
    p.add_argument("metric", help="design/metric channel: JSON file or bsc:p, bec:p, ternary")
    p.add_argument("--true", help="true channel, adds the mismatched table")
    p.add_argument("--depth", type=int, default=1)
    _common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("verify", help="robustness conditions and their preservation")
    p.add_argument("--true", help="true channel W")
    p.add_argument("--metric", help="metric channel V")
    p.add_argument("--counterexample", action="store_true", help="use the built-in pair")
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--variant", choices=("weak", "strict", "both"), default=None)
    p.add_argument("--tie-threshold", default="0",
                   help="assert pe(W,V) <= pe(V) only where P_V[L=1] is at most this")
    p.add_argument("--skip-alignment", action="store_true")
    _common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("construct", help="information set from a design channel")
    p.add_argument("channel")
    p.add_argument("--n", type=int, required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--size", type=int)
    group.add_argument("--target-bound")
    _common(p)
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("simulate", help="Monte Carlo SC decoding")
    p.add_argument("--true", required=True)
    p.add_argument("--metric", help="decoding metric (default: the true channel)")
    p.add_argument("--spec", required=True, help="code-spec JSON from `construct`")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("exact", "log_float"), default="exact")
    p.add_argument("--tie-tol", type=float, default=1e-9)
    p.add_argument("--trace", help="write per-trial CSV here")
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("counterexample", help="exact numbers of the built-in counterexample")
    _common(p)
    p.set_defaults(func=cmd_counterexample)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "verify":
        args.variant_given = args.variant is not None
        args.variant = args.variant or "weak"
    started = time.time()
    inputs = Inputs()
    try:
        return args.func(args, inputs, started)
    except SupportOverflow as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(f"offending path: {exc.path!r}", file=sys.stderr)
        return EXIT_OVERFLOW
    except (ChannelError, SpecFormatError, ValueError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
