"""Command-line harness.

Exit codes: 0 verified (or nothing to verify), 1 verification failed,
2 usage or config error, 3 numerical failure. Errors go to stderr as one
line of JSON.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings

from . import runner
from .errors import ConfigError, Gm2Error, NumericalFailureError

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _emit_error(kind, message, **extra):
    payload = {"error": kind, "message": str(message)}
    payload.update({k: v for k, v in extra.items() if v is not None})
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--out", help="write telemetry CSV to this path")
    common.add_argument("--stride", type=int, help="record every n-th step")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--quiet", action="store_true", help="suppress the JSON summary")

    parser = _Parser(prog="gm2lab", description="Momentum-method experiment harness")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run-method", "run a discrete method"),
        ("simulate-ode", "integrate a continuous flow with RK4"),
        ("verify-lyapunov", "run and certify Lyapunov decay"),
        ("spectral", "closed-form spectra on a diagonal quadratic"),
        ("certify-iqc", "closed-form quadratic-constraint certificate"),
        ("gradient-norm-bound", "convex NAG gradient-norm and value bounds"),
    ):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("config")
    p = sub.add_parser("compare", parents=[common], help="compare two runs step by step")
    p.add_argument("config_a")
    p.add_argument("config_b")
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--metric", choices=("x_sequence", "f_gap"), default="x_sequence")
    return parser


def _load(path, args):
    cfg = runner.load_config(path)
    if args.seed is not None:
        cfg.values["seed"] = args.seed
    if args.stride is not None:
        if args.stride < 1:
            raise ConfigError("--stride must be >= 1", field="stride")
        cfg.values["stride"] = args.stride
    return cfg


def _finish(args, summary, records=None, seed=0):
    if records is not None and args.out:
        runner.write_csv(args.out, records, seed)
    if not args.quiet:
        sys.stdout.write(runner.to_json(summary) + "\n")
    return EXIT_OK if summary.get("passed", True) else EXIT_FAIL


def _run_kind(args, default_method, forced_verify=None, flow=False):
    cfg = _load(args.config, args)
    method = cfg.values.setdefault("method", default_method)
    if flow != (method in runner.FLOW_METHODS):
        want = "flow" if flow else "discrete method"
        cfg.fail("method", f"'{method}' is not a {want}")
    if forced_verify:
        cfg.values["verify"] = forced_verify
    res = runner.run(cfg)
    last = res.records[-1]
    summary = {"command": args.command, "method": method, "seed": cfg.seed,
               "records": len(res.records), "final_f_gap": last.f_gap,
               "final_grad_norm_sq": last.grad_norm_sq, "passed": res.passed}
    if res.report is not None:
        summary["report"] = res.report
    return _finish(args, summary, res.records, cfg.seed)


def _dispatch(args):
    cmd = args.command
    if cmd == "run-method":
        return _run_kind(args, "gm2")
    if cmd == "simulate-ode":
        return _run_kind(args, "gm2_ode", flow=True)
    if cmd == "verify-lyapunov":
        cfg_method = runner.load_config(args.config).get("method", "gm2")
        return _run_kind(args, "gm2", "lyapunov", flow=cfg_method in runner.FLOW_METHODS)
    if cmd == "gradient-norm-bound":
        cfg = _load(args.config, args)
        cfg.values["method"] = "nag_cvx"
        cfg.values["verify"] = "gradient_norm"
        res = runner.run(cfg)
        summary = {"command": cmd, "seed": cfg.seed, "records": len(res.records),
                   "report": res.report, "passed": res.passed}
        return _finish(args, summary, res.records, cfg.seed)
    if cmd == "spectral":
        report = runner.spectral_report(_load(args.config, args))
        return _finish(args, report)
    if cmd == "certify-iqc":
        report = runner.iqc_report(_load(args.config, args))
        return _finish(args, report)
    if cmd == "compare":
        ca, cb = _load(args.config_a, args), _load(args.config_b, args)
        rep = runner.compare(ca, cb, args.metric, args.tol)
        return _finish(args, rep.to_dict())
    raise _UsageError(f"unknown command {cmd!r}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        _emit_error("usage", exc)
        return EXIT_USAGE
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return _dispatch(args)
    except _UsageError as exc:
        _emit_error("usage", exc)
        return EXIT_USAGE
    except ConfigError as exc:
        _emit_error("config", exc, line=exc.line, field=exc.field)
        return EXIT_USAGE
    except NumericalFailureError as exc:
        _emit_error("numerical", exc, index=exc.index,
                    last_time=getattr(exc, "last_time", None))
        return EXIT_NUMERIC
    except FloatingPointError as exc:
        _emit_error("numerical", exc)
        return EXIT_NUMERIC
    except (Gm2Error, ValueError) as exc:
        _emit_error("config", f"{type(exc).__name__}: {exc}")
        return EXIT_USAGE
    except OSError as exc:
        _emit_error("io", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
