"""Command-line front end.

Exit codes: 0 success, 1 input/validation error, 2 the randomized algorithm
failed on this draw (or every allowed draw).
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .benchverify import (
    bench_pipeline,
    generate_instance,
    load_instance,
    match_factors,
    save_instance,
    tscb_scaling,
)
from .errors import (
    EigFailure,
    Infeasible,
    NotDiagonalisable,
    PrecisionTooLow,
    RepeatedEigenvalues,
    SingularMatrix,
    TensorFormatError,
    WrongConditionEstimate,
)
from .fptensor import read_tensor, write_tensor
from .jennrich import DecompParams, _jsonable, decompose_fp, named_stream
from .numerics import FpContext
from .randlab import probability_experiment

EXIT_OK, EXIT_INPUT, EXIT_PROBABILISTIC = 0, 1, 2
SCHEMA = 1
log = logging.getLogger("tensorjenn")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument errors are validation errors: exit 1, not argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _ctx(bits):
    if bits is None or bits == 53:
        return FpContext.exact()
    return FpContext.emulated(bits)


def _envelope(command, args, payload):
    doc = {"schema": SCHEMA, "command": command, "version": __version__}
    if not args.deterministic:
        doc["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    doc.update(payload)
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _int_list(s):
    try:
        vals = [int(x) for x in s.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _check_n_kappa(n, kappa):
    if n < 2:
        raise UsageError("--n must be at least 2")
    if kappa < 2 * n:
        raise UsageError(f"--kappa must be at least 2n = {2 * n}")


def cmd_decompose(args):
    T = read_tensor(args.input)
    ctx = _ctx(args.precision_bits)
    params = DecompParams.from_schedule(T.n, args.B, args.eps)
    payload = {"input": str(args.input), "n": T.n, "seed": args.seed, "strict": args.strict,
               "params": params.to_dict()}
    try:
        res = decompose_fp(T, args.B, args.eps, ctx, args.seed, params=params, strict=args.strict)
    except (SingularMatrix, RepeatedEigenvalues, EigFailure, NotDiagonalisable) as exc:
        payload["result"] = {"success": False, "error": type(exc).__name__, "message": str(exc),
                             "diagnostics": getattr(exc, "diagnostics", {})}
        _emit(_envelope("decompose", args, payload), args.out)
        log.error("decomposition failed: %s: %s", type(exc).__name__, exc)
        return EXIT_PROBABILISTIC
    payload["result"] = res.to_dict()
    _emit(_envelope("decompose", args, payload), args.out)
    return EXIT_OK if res.success else EXIT_PROBABILISTIC


def cmd_generate(args):
    _check_n_kappa(args.n, args.kappa)
    inst = generate_instance(args.n, args.kappa, named_stream(args.seed, "instance"), seed=args.seed)
    tpath, spath = save_instance(inst, args.out)
    if args.format == "json":
        tpath.unlink()
        tpath = write_tensor(inst.T, Path(args.out).with_suffix(".tensor.json"), fmt="json")
    print(json.dumps({"tensor": str(tpath), "sidecar": str(spath), "kappa": inst.kappa}))
    return EXIT_OK


def cmd_probcheck(args):
    _check_n_kappa(args.n, args.kappa)
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    inst = generate_instance(args.n, args.kappa, named_stream(args.seed, "instance"), seed=args.seed)
    params = DecompParams.from_schedule(args.n, args.B or inst.kappa * 1.0000001, args.eps)
    rep = probability_experiment(inst.U_true, params, args.trials,
                                 int(named_stream(args.seed, "sampling").integers(2 ** 63)),
                                 workers=args.workers)
    ok = rep.passes()
    payload = {"n": args.n, "kappa": inst.kappa, "seed": args.seed,
               "report": json.loads(rep.to_json()), "passes": ok}
    text = _envelope("probcheck", args, payload)
    if args.out:
        Path(args.out).with_suffix(".json").write_text(text)
        Path(args.out).with_suffix(".csv").write_text(rep.to_csv())
    else:
        sys.stdout.write(text)
    return EXIT_OK if all(ok.values()) else EXIT_PROBABILISTIC


def cmd_bench(args):
    ctx = _ctx(args.precision_bits)
    if args.count_ops:
        ctx = ctx.instrumented()
    text = bench_pipeline(args.n_list, args.reps, ctx, seed=args.seed, eps=args.eps)
    _emit(text, args.out)
    ratios = tscb_scaling(tuple(args.scaling_n))
    log.info("tscb op-count ratios count(2n)/count(n): %s", ratios)
    sys.stderr.write("tscb count(2n)/count(n): "
                     + ", ".join(f"n={n}: {r:.3f}" for n, r in ratios.items()) + "\n")
    return EXIT_OK


def cmd_precision_sweep(args):
    if args.instance:
        inst = load_instance(args.instance)
    else:
        _check_n_kappa(args.n, args.kappa)
        inst = generate_instance(args.n, args.kappa, named_stream(args.seed, "instance"),
                                 seed=args.seed)
    B = args.B or 1.05 * inst.kappa
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bits", "success", "residual", "max_error", "retries"])
    for bits in args.bits_list:
        try:
            res = decompose_fp(inst.T, B, args.eps, _ctx(bits), args.seed)
            err = match_factors(res.vectors, inst.U_true).max_error
            w.writerow([bits, int(res.success), repr(res.diagnostics["residual"]), repr(err),
                        res.diagnostics["retries"]])
        except PrecisionTooLow:
            w.writerow([bits, 0, "", "", ""])
        except (SingularMatrix, RepeatedEigenvalues, EigFailure):
            w.writerow([bits, 0, "", "", ""])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def build_parser():
    p = _Parser(prog="tensorjenn",
                                description="Decompose symmetric order-3 tensors into rank-one terms.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        if seed:
            sp.add_argument("--seed", type=int, default=0, help="64-bit master seed")
        sp.add_argument("--deterministic", action="store_true",
                        help="omit the timestamp so identical runs give identical output")

    d = sub.add_parser("decompose", help="decompose a tensor file")
    d.add_argument("--input", required=True)
    d.add_argument("--B", type=float, required=True, help="upper bound on the condition number")
    d.add_argument("--eps", type=float, required=True, help="target forward error")
    d.add_argument("--precision-bits", type=int, default=None)
    d.add_argument("--strict", action="store_true", help="single draw, no retries")
    d.add_argument("--out")
    common(d)
    d.set_defaults(func=cmd_decompose)

    g = sub.add_parser("generate", help="write a random instance and its ground truth")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--kappa", type=float, required=True)
    g.add_argument("--out", required=True, help="output prefix")
    g.add_argument("--format", choices=["binary", "json"], default="binary")
    common(g)
    g.set_defaults(func=cmd_generate)

    pc = sub.add_parser("probcheck", help="Monte Carlo check of the event probabilities")
    pc.add_argument("--n", type=int, required=True)
    pc.add_argument("--kappa", type=float, required=True)
    pc.add_argument("--trials", type=int, default=1000)
    pc.add_argument("--eps", type=float, default=1e-3)
    pc.add_argument("--B", type=float, default=None)
    pc.add_argument("--workers", type=int, default=1)
    pc.add_argument("--out", help="output prefix for .json and .csv")
    common(pc)
    pc.set_defaults(func=cmd_probcheck)

    b = sub.add_parser("bench", help="time the pipeline across dimensions")
    b.add_argument("--n-list", type=_int_list, default=[4, 8])
    b.add_argument("--reps", type=int, default=1)
    b.add_argument("--eps", type=float, default=1e-2)
    b.add_argument("--precision-bits", type=int, default=None)
    b.add_argument("--count-ops", action="store_true")
    b.add_argument("--scaling-n", type=_int_list, default=[8, 16, 32])
    b.add_argument("--workers", type=int, default=1, help="accepted for symmetry; reps run sequentially")
    b.add_argument("--out")
    common(b)
    b.set_defaults(func=cmd_bench)

    s = sub.add_parser("precision-sweep", help="matched error against mantissa width")
    s.add_argument("--n", type=int, default=8)
    s.add_argument("--kappa", type=float, default=20.0)
    s.add_argument("--eps", type=float, default=1e-3)
    s.add_argument("--B", type=float, default=None)
    s.add_argument("--bits-list", type=_int_list, default=[32, 40, 48, 53])
    s.add_argument("--instance", help="prefix of a generated instance to reuse")
    s.add_argument("--out")
    common(s)
    s.set_defaults(func=cmd_precision_sweep)
    return p


def _configure_logging():
    level = os.environ.get("TENSORJENN_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None):
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always", WrongConditionEstimate)
            return args.func(args)
    except (UsageError, Infeasible, PrecisionTooLow, TensorFormatError, ValueError, OSError) as exc:
        sys.stderr.write(f"tensorjenn {args.command}: {type(exc).__name__}: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
