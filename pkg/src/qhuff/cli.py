"""Command line front end: ``qhuff analyze|storage|comm|scale``."""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .circuit.layout import LayoutError, is_power_of_two
from .circuit.prepare import ResourceError
from .comm import SessionError, comm_report, open_session, run_session
from .ensembles import EnsembleFileError, load_ensemble
from .huffman import DistributionError
from .qmath import EnsembleError, source_model
from .scaling import sweep
from .storage import StorageError, storage_run

EXIT_OK, EXIT_USAGE, EXIT_RESOURCE = 0, 2, 3
SIG_DIGITS = 12


class UsageError(ValueError):
    pass


def _clean(obj):
    """Recursively round floats to 12 significant digits and make values JSON friendly."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return float(f"{x:.{SIG_DIGITS}g}")
    return obj


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2) + "\n"


def _code_summary(model) -> dict:
    code = model.code
    return {"codewords": list(code.codewords), "avg_len": code.avg_len, "l_max": code.l_max,
            "l_min": code.l_min, "len_width": code.len_reg_width}


def cmd_analyze(args) -> dict:
    model = source_model(load_ensemble(args.ensemble))
    spec = model.spectrum
    return {
        "spectrum": [float(v) for v in spec.eigenvalues],
        "symbols": list(model.symbols),
        "code": _code_summary(model),
        "entropy": model.entropy,
        "baseline_per_signal": model.entropy,
        "dim": model.ensemble.dim,
    }


def cmd_storage(args) -> dict:
    if args.n < 1 or not is_power_of_two(args.n):
        raise UsageError(f"--n must be a power of two, got {args.n}")
    model = source_model(load_ensemble(args.ensemble))
    exact = args.trials is None
    rep = storage_run(model, args.n, args.delta, exact=exact, trials=args.trials, seed=args.seed,
                      encoder=args.encoder)
    return {"code": _code_summary(model), "entropy": model.entropy, "report": rep.as_dict()}


def cmd_comm(args) -> dict:
    if args.n < 1:
        raise UsageError("--n must be positive")
    if args.truncate_at is not None and not 1 <= args.truncate_at <= args.n:
        raise UsageError(f"--truncate-at must lie in 1..{args.n}")
    if args.flush_every is not None and args.flush_every < 1:
        raise UsageError("--flush-every must be positive")
    model = source_model(load_ensemble(args.ensemble))
    s = open_session(model, args.n, args.delta, trials=args.trials, seed=args.seed)
    run_session(s, flush_every=args.flush_every, truncate_at=args.truncate_at)
    rep = comm_report(s)
    return {"code": _code_summary(model), "entropy": model.entropy, "report": rep.as_dict(),
            "qubits_total": rep.qubits_stored}


def cmd_scale(args) -> dict:
    model = source_model(load_ensemble(args.ensemble))
    if args.mode == "storage" and not all(is_power_of_two(n) for n in args.n_list):
        raise UsageError("storage sweeps need power-of-two --n-list entries")
    if any(n < 1 for n in args.n_list):
        raise UsageError("--n-list entries must be positive")
    return {"code": _code_summary(model), **sweep(model, args.mode, args.n_list, args.flush_every)}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qhuff", description="Variable-length quantum coding experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="spectrum, code and entropy of an ensemble")
    a.add_argument("--ensemble", required=True, help="ensemble JSON file or builtin:NAME")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("storage", help="block storage: encode, truncate, decode")
    s.add_argument("--ensemble", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--delta", type=float, default=None)
    g = s.add_mutually_exclusive_group()
    g.add_argument("--exact", action="store_true", help="enumerate every input sequence (default)")
    g.add_argument("--trials", type=int, default=None, help="sample this many input sequences")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--encoder", choices=("parallel", "sequential"), default="parallel")
    s.set_defaults(func=cmd_storage)

    c = sub.add_parser("comm", help="two-party streaming session")
    c.add_argument("--ensemble", required=True)
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--delta", type=float, default=None)
    c.add_argument("--truncate-at", type=int, default=None)
    c.add_argument("--flush-every", type=int, default=None)
    c.add_argument("--trials", type=int, default=None)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_comm)

    k = sub.add_parser("scale", help="depth and gate-count sweep (construction only)")
    k.add_argument("--ensemble", required=True)
    k.add_argument("--mode", choices=("storage", "comm"), default="storage")
    k.add_argument("--n-list", type=int, nargs="+", required=True)
    k.add_argument("--flush-every", type=int, default=None)
    k.set_defaults(func=cmd_scale)
    return p


def _echo(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        body = args.func(args)
    except ResourceError as exc:
        print(f"qhuff: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (UsageError, EnsembleFileError, EnsembleError, DistributionError, StorageError,
            SessionError, LayoutError, ValueError) as exc:
        print(f"qhuff: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = {"command": _echo(args), **body}
    sys.stdout.write(dumps(report))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
