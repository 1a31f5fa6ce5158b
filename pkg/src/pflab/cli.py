"""Command-line interface.

Subcommands wrap the experiment kinds; flags mirror config keys and win
over the config file.  Exit codes are part of the contract:

* 0 success
* 1 invalid configuration
* 2 numerical failure (NaN / blow-up / boundary sentinel)
* 3 verification failure (an acceptance-style assertion did not hold)

The environment variable ``PFLAB_VERBOSE`` (0/1) selects output
verbosity only; it never affects numerics.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .config import SCHEMA, parse_config
from .errors import ConfigError, NumericalError, VerificationError


def _verbose() -> bool:
    return os.environ.get("PFLAB_VERBOSE", "1") not in ("0", "false", "")


def _add_schema_flags(parser: argparse.ArgumentParser) -> None:
    for key, (_typ, default, help_) in SCHEMA.items():
        parser.add_argument(f"--{key.replace('_', '-')}", dest=f"opt_{key}",
                            metavar="V", default=None,
                            help=f"{help_} (default {default!r})")


def _collect_overrides(args, forced: dict | None = None) -> dict:
    over = {}
    for key in SCHEMA:
        val = getattr(args, f"opt_{key}", None)
        if val is not None:
            over[key] = val
    for key, val in (forced or {}).items():
        over.setdefault(key, val)
    return over


def _load_config(args, forced: dict | None = None):
    text = ""
    if getattr(args, "config", None):
        with open(args.config) as fh:
            text = fh.read()
    return parse_config(text, _collect_overrides(args, forced))


def _run(args, forced: dict | None = None) -> int:
    from .experiments import run_experiment

    cfg = _load_config(args, forced)
    report = run_experiment(cfg)
    if _verbose():
        print(f"[{cfg.kind}] ok; artifacts in {cfg['outdir']}")
        for key, val in report.items():
            if not isinstance(val, (dict, list)):
                print(f"  {key} = {val}")
    return 0


def _cmd_simulate(args) -> int:
    return _run(args)


def _cmd_barenblatt(args) -> int:
    return _run(args, {"experiment": "barenblatt-fit"})


def _cmd_fluid2d(args) -> int:
    forced = {"experiment": "fluid2d-taylor-green", "dimension": "2"}
    if args.variant == "halfplane":
        forced["experiment"] = "fluid2d-halfplane"
    return _run(args, forced)


def _cmd_energy(args) -> int:
    return _run(args, {"experiment": "energy-ledger"})


def _cmd_verify_lemmas(args) -> int:
    code = 0
    for kind in ("stampacchia-suite", "interpolation-suite", "exponent-identities"):
        sub_out = os.path.join(getattr(args, "opt_outdir", None) or "out", kind)
        forced = {"experiment": kind, "outdir": sub_out}
        code = max(code, _run(args, forced))
    return code


def _cmd_track_support(args) -> int:
    from .core import load_field
    from .fronts import save_trace, support_front, SupportTrace

    index = args.index
    base = os.path.dirname(os.path.abspath(index))
    times, fronts_out = [], []
    with open(index) as fh:
        header = fh.readline()
        if not header.strip().startswith("t,"):
            raise ConfigError([(1, f"{index}: expected 't,filename' header")])
        for line in fh:
            t_str, name = line.strip().split(",", 1)
            field = load_field(os.path.join(base, name))
            tau = args.tau
            if tau is None:
                raise ConfigError([(None, "--tau is required")])
            front = support_front(field, float(tau), args.mode)
            times.append(float(t_str))
            fronts_out.append(np.nan if front is None else front)
    trace = SupportTrace(float(args.tau), np.asarray(times), np.asarray(fronts_out))
    save_trace(trace, args.out)
    if _verbose():
        print(f"trace with {len(times)} samples written to {args.out}")
    return 0


def _cmd_fit_exponent(args) -> int:
    from .fronts import SupportTrace, fit_exponent

    with open(args.trace) as fh:
        first = fh.readline()
        tau = 0.0
        if first.startswith("# tau="):
            tau = float(first.split("=", 1)[1])
            fh.readline()  # column header
        times, fr = [], []
        for line in fh:
            t_str, f_str = line.strip().split(",", 1)
            times.append(float(t_str))
            fr.append(float(f_str) if f_str else np.nan)
    trace = SupportTrace(tau or 1.0, np.asarray(times), np.asarray(fr))
    fit = fit_exponent(trace, drop_frac=float(args.drop_frac))
    print(f"slope = {fit.slope:.17g}")
    print(f"intercept = {fit.intercept:.17g}")
    print(f"window = {fit.window[0]:.17g}..{fit.window[1]:.17g}")
    print(f"residual_rms = {fit.residual_rms:.17g}")
    return 0


def _cmd_accept(args) -> int:
    from .acceptance import run_acceptance

    outdir = getattr(args, "opt_outdir", None) or "accept-out"
    results = run_acceptance(outdir, only=args.only)
    failed = [r for r in results if not r.passed]
    return 3 if failed else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pflab",
        description="Degenerate power-law diffusion and power-law fluid "
                    "laboratory: simulations, support-front envelopes, "
                    "energy ledgers and inequality suites.")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", help="key = value config file")
        _add_schema_flags(p)
        return p

    with_config(sub.add_parser("simulate", help="run the experiment named "
                                                "in the config"))
    with_config(sub.add_parser("barenblatt", help="self-similar front fit / "
                                                  "accuracy study"))
    pf = with_config(sub.add_parser("fluid2d", help="2-D fluid experiments"))
    pf.add_argument("--variant", choices=("taylor-green", "halfplane"),
                    default="taylor-green")
    with_config(sub.add_parser("energy", help="tail-energy ledger and checks"))
    with_config(sub.add_parser("verify-lemmas", help="iteration, interpolation "
                                                     "and identity suites"))

    pt = sub.add_parser("track-support", help="extract a front trace from an "
                                              "exported trajectory")
    pt.add_argument("--index", required=True, help="trajectory index CSV")
    pt.add_argument("--tau", required=True, type=float)
    pt.add_argument("--mode", choices=("halfspace", "radial"), default="halfspace")
    pt.add_argument("--out", default="trace.csv")

    pe = sub.add_parser("fit-exponent", help="fit a power law to a trace CSV")
    pe.add_argument("--trace", required=True)
    pe.add_argument("--drop-frac", default="0.1")

    pa = sub.add_parser("accept", help="run the full acceptance suite")
    pa.add_argument("--only", default=None,
                    help="comma-separated criterion numbers to run")
    _add_schema_flags(pa)

    args = parser.parse_args(argv)
    handlers = {
        "simulate": _cmd_simulate,
        "barenblatt": _cmd_barenblatt,
        "fluid2d": _cmd_fluid2d,
        "energy": _cmd_energy,
        "verify-lemmas": _cmd_verify_lemmas,
        "track-support": _cmd_track_support,
        "fit-exponent": _cmd_fit_exponent,
        "accept": _cmd_accept,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print("configuration error:", file=sys.stderr)
        for line, msg in exc.errors:
            where = f"line {line}: " if line else ""
            print(f"  {where}{msg}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except VerificationError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
