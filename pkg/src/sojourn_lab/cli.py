"""Command-line front end.

Exit codes: 0 success, 1 validation failures, 2 argument errors,
3 numeric or regime errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import asymptotics as asy
from .berman import (
    DEFAULT_LADDER,
    BermanSpec,
    BermanStore,
    berman_hat,
    berman_interval,
    berman_limit,
    limit_spec_dict,
    parse_field,
)
from .errors import InvalidArgumentError, SojournLabError
from .models import GridSpec, parse_model, simulate
from .montecarlo import (
    SCHEMA,
    GridPolicy,
    convergence_study,
    estimate_passage_law,
    estimate_tail,
    format_report,
)
from .rng import default_seed
from .sojourn import REGIME_RULE, SojournProblem

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _float(text):
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _floats(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _scaling(text):
    if text == REGIME_RULE:
        return text
    v = _float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"--v must be positive or 'regime', got {text}")
    return v


def _add_common(p):
    p.add_argument("--config", help="flat key=value file; command-line flags take precedence")
    p.add_argument("--seed", type=int, default=None, help="base seed (default: $SOJOURN_LAB_SEED, else 0)")
    p.add_argument("--threads", type=int, default=1, help="worker processes")
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.add_argument("--out", help="output file (default stdout)")


def _add_problem(p, need_x=True):
    p.add_argument("--model", default="brownian", help="brownian | fbm:H | power-sigma2:p | selfsim:H,a | line | zero")
    p.add_argument("--c", type=_float, default=1.0, help="drift c of the trend -ct")
    p.add_argument("--u", type=_float, default=1.0, help="level u")
    if need_x:
        p.add_argument("--x", type=_float, default=0.0, help="sojourn threshold x")
    p.add_argument("--T", type=_float, default=math.inf, help="time horizon (inf for infinite)")


def _add_grid(p):
    p.add_argument("--steps", type=int, default=None, help="grid steps over [0, T] (finite T)")
    p.add_argument("--step", type=_float, default=2.0**-12, help="grid step when --steps is not given")
    p.add_argument("--K", type=_float, default=5.0, help="truncation multiple for T = inf")


def build_parser():
    parser = _Parser(prog="sojourn-lab", description="Sojourn times of Gaussian processes with trend.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="draw one path and print t, X(t), X(t) - ct")
    _add_common(p)
    p.add_argument("--model", default="brownian")
    p.add_argument("--c", type=_float, default=0.0)
    p.add_argument("--T", type=_float, default=1.0)
    p.add_argument("--steps", type=int, default=1024)
    p.add_argument("--replicate", type=int, default=0)

    p = sub.add_parser("tail", help="Monte Carlo estimate of the sojourn tail probability")
    _add_common(p)
    _add_problem(p)
    _add_grid(p)
    p.add_argument("--v", type=_scaling, default=1.0, help="scaling v > 0, or 'regime' for the regime's v(u)")
    p.add_argument("--reps", type=int, default=10_000)
    p.add_argument("--method", choices=("auto", "dense", "bridge"), default="auto")

    p = sub.add_parser("passage", help="conditional law of normalized passage times")
    _add_common(p)
    _add_problem(p, need_x=False)
    _add_grid(p)
    p.add_argument("--x1", type=_float, default=0.0)
    p.add_argument("--x2", type=_float, default=0.0)
    p.add_argument("--v", type=_scaling, default=REGIME_RULE)
    p.add_argument("--reps", type=int, default=10_000)
    p.add_argument("--y", type=_floats, default=[-2.0, -1.0, 0.0, 1.0, 2.0], help="points for the empirical CDF")

    p = sub.add_parser("asymptotic", help="evaluate the exact asymptotic of the sojourn tail")
    _add_common(p)
    _add_problem(p)
    p.add_argument("--regime", "--theorem", dest="regime", default=None, help="force a regime: stationary-infinite | stationary-finite | selfsimilar-infinite | selfsimilar-finite (short numeric aliases accepted)")
    p.add_argument("--constant", action="append", default=[], help="LABEL=VALUE for a Berman constant (repeatable)")
    p.add_argument("--store", help="Berman estimate store (JSON) to read constants from")

    p = sub.add_parser("berman", help="Monte Carlo Berman constants")
    _add_common(p)
    p.add_argument("--process", default="brownian")
    p.add_argument("--field", default="zero", help="zero | power:gamma,beta")
    p.add_argument("--x", type=_float, default=0.0)
    p.add_argument("--S", type=_floats, default=list(DEFAULT_LADDER), help="S ladder, or a single S with --hat")
    p.add_argument("--interval", type=_floats, default=None, help="a,b for a single interval estimate")
    p.add_argument("--hat", action="store_true", help="two-sided constant over [-S, S]")
    p.add_argument("--step", type=_float, default=None)
    p.add_argument("--reps", type=int, default=10_000)
    p.add_argument("--method", choices=("auto", "anchored", "crude"), default="auto")
    p.add_argument("--store", help="append the estimate to this JSON store")

    p = sub.add_parser("convergence", help="Monte Carlo versus asymptotic along a ladder of u")
    _add_common(p)
    _add_problem(p)
    p.add_argument("--u-ladder", type=_floats, required=True)
    p.add_argument("--step", type=_float, default=2.0**-12)
    p.add_argument("--K", type=_float, default=5.0)
    p.add_argument("--reps", type=int, default=10_000)
    p.add_argument("--constant", action="append", default=[])

    p = sub.add_parser("validate", help="run the acceptance suites")
    _add_common(p)
    p.add_argument("--suite", default="all", help="all | exact | berman | analytic | properties | 1,2,...")
    p.add_argument("--fast", action="store_true")
    return parser


# ---------------------------------------------------------------------------


def read_config(path):
    values = {}
    try:
        with open(path) as fh:
            for n, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                key, sep, val = line.partition("=")
                if not sep:
                    raise UsageError(f"{path}:{n}: expected key=value, got {raw.strip()!r}")
                values[key.strip().lstrip("-").replace("-", "_")] = val.strip()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    return values


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        file_values = read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(file_values) - known)
        if unknown:
            raise UsageError(f"config {args.config}: unknown keys {unknown} for '{args.command}'")
        for action in sub._actions:
            if action.dest not in file_values:
                continue
            raw = file_values[action.dest]
            if isinstance(action, argparse._StoreTrueAction):
                if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    raise UsageError(f"config {args.config}: {action.dest} expects true/false, got {raw!r}")
                file_values[action.dest] = raw.lower() in ("true", "1", "yes")
            elif isinstance(action, argparse._AppendAction):
                file_values[action.dest] = [v.strip() for v in raw.split(";") if v.strip()]
        # string defaults are converted by each option's type, so file values get the same checks as flags
        sub.set_defaults(**file_values)
        args = parser.parse_args(argv)
    if args.seed is None:
        args.seed = default_seed(0)
    if args.threads < 1:
        raise UsageError("--threads must be >= 1")
    return args


def _problem(args, x=None, scaling=REGIME_RULE):
    model = parse_model(args.model)
    return SojournProblem(model, args.c, args.u, args.x if x is None else x, args.T, scaling)


def _grid(args, problem):
    if not problem.infinite:
        steps = args.steps if args.steps else max(2, int(round(problem.horizon / args.step)))
        return GridSpec(problem.horizon, steps)
    if args.steps:
        step = GridPolicy(args.step, args.K).horizon(problem) / args.steps
        return GridPolicy(step, args.K, 1).grid_for(problem)
    return GridPolicy(args.step, args.K).grid_for(problem)


def _constants(args):
    values = {}
    if getattr(args, "store", None):
        values.update(BermanStore(args.store).by_label())
    for item in getattr(args, "constant", []):
        label, sep, val = item.rpartition("=")
        if not sep:
            raise UsageError(f"--constant expects LABEL=VALUE, got {item!r}")
        values[label] = float(val)
    return values


def _emit(args, payload, out):
    text = json.dumps({"schema": SCHEMA, "command": args.command, "result": payload}, indent=1, default=_json_default)
    _write(args, text + "\n", out)


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _write(args, text, out):
    if args.out:
        try:
            with open(args.out, "w") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write {args.out}: {exc}") from exc
    else:
        out.write(text)


def _rows_csv(rows, columns):
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(columns)
    for r in rows:
        w.writerow(["%.17g" % r[c] if isinstance(r[c], float) else r[c] for c in columns])
    return buf.getvalue()


def cmd_simulate(args, out):
    model = parse_model(args.model)
    path = simulate(model, GridSpec(args.T, args.steps), args.seed, args.replicate)
    t = path.times
    rows = [{"t": float(a), "X": float(b), "Y": float(b - args.c * a)} for a, b in zip(t, path.values)]
    if args.format == "csv":
        _write(args, _rows_csv(rows, ("t", "X", "Y")), out)
    else:
        _emit(args, {"model": model.label(), "seed": args.seed, "replicate": args.replicate, "path": rows}, out)
    return EXIT_OK


def cmd_tail(args, out):
    problem = _problem(args, scaling=args.v)
    est = estimate_tail(problem, _grid(args, problem), args.reps, args.seed, args.threads, args.method)
    _write(args, format_report([est], args.format), out)
    return EXIT_OK


def cmd_passage(args, out):
    problem = _problem(args, x=args.x1, scaling=args.v)
    rec = estimate_passage_law(problem, args.x1, args.x2, _grid(args, problem), args.reps, args.seed, args.threads)
    payload = rec.to_dict()
    payload["cdf"] = {f"{y:g}": rec.cdf(y) for y in args.y}
    payload["problem"] = problem.to_dict()
    if args.format == "csv":
        rows = [{"y": y, "cdf": rec.cdf(y)} for y in args.y]
        _write(args, _rows_csv(rows, ("y", "cdf")), out)
    else:
        _emit(args, payload, out)
    return EXIT_OK


def cmd_asymptotic(args, out):
    problem = _problem(args)
    res = asy.evaluate_asymptotic(problem, _constants(args), args.regime)
    payload = res.to_dict()
    payload["problem"] = problem.to_dict()
    if args.format == "csv":
        cols = ("value", "constant", "algebraic", "gauss_tail", "scaling", "regime")
        _write(args, _rows_csv([payload], cols), out)
    else:
        _emit(args, payload, out)
    return EXIT_OK


def cmd_berman(args, out):
    process = parse_model(args.process)
    field = parse_field(args.field)
    if args.interval is not None:
        if len(args.interval) != 2:
            raise UsageError("--interval expects a,b")
        spec = BermanSpec(process, field, args.x, tuple(args.interval), args.step, args.reps, args.seed)
        est = berman_interval(spec, args.threads)
        key = spec.to_dict()
    elif args.hat:
        if len(args.S) != 1:
            raise UsageError("--hat expects a single --S value")
        est = berman_hat(process, field, args.x, args.S[0], args.step, args.reps, args.seed, args.threads)
        key = {"kind": "hat", **BermanSpec(process, field, args.x, (-args.S[0], args.S[0]), args.step, args.reps, args.seed).to_dict()}
    else:
        step = 2.0**-10 if args.step is None else args.step
        est = berman_limit(process, args.x, args.S, step, args.reps, args.seed, field, args.method, args.threads)
        key = limit_spec_dict(process, args.x, args.S, step, args.reps, args.seed, field, args.method)
    if args.store:
        store = BermanStore(args.store)
        store.put(key, est)
        store.save()
    if args.format == "csv":
        rows = [{"S": r.S, "point": r.point, "stderr": r.stderr} for r in est.ladder]
        rows.append({"S": "extrapolated" if est.ladder else "interval", "point": est.point, "stderr": est.stderr})
        _write(args, _rows_csv(rows, ("S", "point", "stderr")), out)
    else:
        _emit(args, {"spec": key, "estimate": est.to_dict()}, out)
    return EXIT_OK


def cmd_convergence(args, out):
    problem = _problem(args)
    study = convergence_study(
        problem, args.u_ladder, GridPolicy(args.step, args.K), args.reps, args.seed, _constants(args), args.threads
    )
    rows = [
        {
            "u": r.u,
            "p_hat": r.mc.p_hat,
            "stderr": r.mc.stderr,
            "asymptotic": r.asymptotic.value,
            "ratio": r.ratio,
            "regime": r.asymptotic.regime,
        }
        for r in study.rows
    ]
    if args.format == "csv":
        _write(args, _rows_csv(rows, ("u", "p_hat", "stderr", "asymptotic", "ratio", "regime")), out)
    else:
        _emit(args, {"rows": [r.to_dict() for r in study.rows], "trend_ok": study.trend_ok}, out)
    return EXIT_OK


def cmd_validate(args, out):
    from .validation import run_suite

    try:
        results = run_suite(args.suite, args.fast, report=lambda line: print(line, file=out))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed", file=out)
    if args.out:
        payload = [
            {"criterion": r.number, "title": r.title, "passed": r.passed, "seconds": r.seconds,
             "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in r.checks]}
            for r in results
        ]
        _write(args, json.dumps({"schema": SCHEMA, "command": "validate", "result": payload}, indent=1) + "\n", out)
    return EXIT_OK if passed == len(results) else EXIT_FAILED


COMMANDS = {
    "simulate": cmd_simulate,
    "tail": cmd_tail,
    "passage": cmd_passage,
    "asymptotic": cmd_asymptotic,
    "berman": cmd_berman,
    "convergence": cmd_convergence,
    "validate": cmd_validate,
}


def run(argv=None, out=None, err=None):
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        args = parse_args(sys.argv[1:] if argv is None else list(argv))
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(build_parser().format_usage().rstrip(), file=err)
        print(str(exc), file=err)
        return EXIT_USAGE
    except SystemExit as exc:
        # --help and friends
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    except InvalidArgumentError as exc:
        print(f"error: invalid argument: {exc}", file=err)
        return EXIT_USAGE
    except SojournLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=err)
        return EXIT_NUMERIC
    except (ValueError, ArithmeticError) as exc:
        print(f"error: numeric failure: {exc}", file=err)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_NUMERIC


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
