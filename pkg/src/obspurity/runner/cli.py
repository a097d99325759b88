"""Command-line entry point.

Subcommands: validate, static, dynamics, sweep, fit-lambda, purity.
Exit codes: 0 success, 2 configuration error, 3 gate failure,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..dynamics import fit_lambda
from ..exceptions import ConfigError, ConvergenceError, SizeGuardError, TrivialObservableError
from ..metrics import build_report, diagonal_ensemble
from ..spins import LmgParams, SpinSystem, TimParams, lmg_hamiltonian, observable_family, stretched_state, tim_hamiltonian
from .config import SCHEMA_VERSION, load_config, parse_observable, resolve_config
from .scenarios import run_scenario, run_sweep
from .tables import ResultTable
from .validate import run_validate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GATE = 3
EXIT_NUMERICAL = 4
THREADS_ENV = "OBSPURITY_THREADS"
DEFAULT_CONFIGS = {"static": "static_family", "dynamics": "lmg_infidelity", "sweep": "dim_sweep"}


def _default_threads():
    raw = os.environ.get(THREADS_ENV, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
    common.add_argument("--threads", type=int, default=None,
                        help=f"worker threads (default: ${THREADS_ENV} or 1)")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--config", default=None, help="scenario file or bundled scenario name")

    parser = argparse.ArgumentParser(prog="obspurity", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="run the built-in oracle suite")
    p.add_argument("--quick", action="store_true", help="smaller Monte-Carlo samples")

    for name, text in (("static", "static error study"), ("dynamics", "dynamical error study"),
                       ("sweep", "parameter sweep over a scenario")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--strict", action="store_true",
                       help="exit with the gate-failure code if a plateau is more than 3 sigma off its prediction")

    p = sub.add_parser("fit-lambda", parents=[common], help="fit lambda to an infidelity series")
    p.add_argument("input", help="CSV with columns t (or time) and infidelity")
    p.add_argument("--s0", type=float, default=None, help="inverse participation ratio of the initial state")
    p.add_argument("--model", choices=("lmg", "tim"), default="lmg")
    p.add_argument("--particles", type=int, default=15)
    p.add_argument("--field", type=float, default=0.4, help="field in units of the coupling")
    p.add_argument("--state", default="x-", help="product initial state: axis and sign, e.g. x- or z+")

    p = sub.add_parser("purity", parents=[common], help="print the purity report of an observable")
    p.add_argument("family", help="observable descriptor, e.g. 'spin-power axis=x power=6'")
    p.add_argument("--model", choices=("lmg", "tim"), default="lmg")
    p.add_argument("--particles", type=int, default=15)
    p.add_argument("--field", type=float, default=0.4)
    p.add_argument("--representation", choices=("symmetric", "full"), default=None)
    return parser


def _load(args):
    name = args.config or DEFAULT_CONFIGS[args.command]
    cfg = load_config(resolve_config(name))
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, output_dir=args.out)
    return cfg


def _threads(args, cfg=None):
    if args.threads is not None:
        return max(1, args.threads)
    if cfg is not None and cfg.threads:
        return cfg.threads
    return _default_threads()


def _strict_failures(result):
    bad = []
    plateaus = result.summary.get("plateaus", {}) if hasattr(result, "summary") else {}
    for label, (_, _, plateau, se, pred, _) in plateaus.items():
        if se > 0 and abs(plateau - pred) > 3 * se:
            bad.append(label)
    return bad


def cmd_validate(args):
    seed = 1234 if args.seed is None else args.seed
    report = run_validate(seed, quick=args.quick)
    for line in report.lines():
        print(line)
    if args.out:
        report.table(seed).write(args.out)
    return EXIT_OK if report.passed else EXIT_GATE


def cmd_scenario(args):
    cfg = _load(args)
    if args.command == "sweep":
        result = run_sweep(cfg, _threads(args, cfg))
        points = result.points
    else:
        expected = "static" if args.command == "static" else None
        if expected and cfg.kind != expected:
            raise ConfigError(f"config kind is {cfg.kind!r}, the static command needs 'static'", field="scenario.kind")
        result = run_scenario(cfg, _threads(args, cfg))
        points = [(None, result)]
    paths = result.write(args.out)
    for path in paths:
        print(f"wrote {path}")
    if args.command == "sweep" and result.failures:
        print(f"{len(result.failures)} sweep point(s) failed; see sweep_failures.csv", file=sys.stderr)
    if args.strict:
        bad = [label for _, r in points for label in _strict_failures(r)]
        if bad:
            print(f"plateau outside 3 sigma of prediction: {', '.join(bad)}", file=sys.stderr)
            return EXIT_GATE
    return EXIT_OK


def _read_series(path):
    times, values = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        tcol = "t" if "t" in cols else "time" if "time" in cols else None
        if tcol is None or "infidelity" not in cols:
            raise ConfigError(f"{path}: need columns 't' (or 'time') and 'infidelity', found {cols}")
        for row_number, row in enumerate(reader, start=2):
            try:
                t, v = float(row[tcol]), float(row["infidelity"])
            except (TypeError, ValueError):
                raise ConfigError(f"{path}: row {row_number}: malformed number") from None
            if not (math.isfinite(t) and math.isfinite(v)):
                raise ConfigError(f"{path}: row {row_number}: non-finite value")
            times.append(t)
            values.append(v)
    return np.array(times), np.array(values)


def _product_state(text, system):
    axis, sign = text[0], text[1:]
    if axis not in "xyz" or sign not in ("+", "-"):
        raise ConfigError(f"state must look like x- or z+, got {text!r}", field="state")
    return stretched_state(system, axis, +1 if sign == "+" else -1)


def cmd_fit_lambda(args):
    times, values = _read_series(args.input)
    if args.s0 is not None:
        s0 = args.s0
    else:
        if args.model == "lmg":
            system = SpinSystem(args.particles)
            H = lmg_hamiltonian(LmgParams(args.particles, args.field))
        else:
            system = SpinSystem(args.particles, "full")
            H = tim_hamiltonian(TimParams(args.particles, args.field))
        s0 = diagonal_ensemble(H, _product_state(args.state, system)).ipr
    fit = fit_lambda(times, values, s0)
    print(f"lambda={fit.strength:.17g} residual={fit.residual:.17g} s0={s0:.17g}" + (f" note={fit.note}" if fit.note else ""))
    if args.out:
        table = ResultTable("lambda_fit_curve", ["time", "infidelity", "fit", "lambda_fit", "s0"])
        seed = 0 if args.seed is None else args.seed
        for t, v, c in zip(times, values, fit.curve):
            table.add(scenario_id="fit-lambda", master_seed=seed, state_index=0, n_instances=0, time=t,
                      infidelity=v, fit=c, lambda_fit=fit.strength, s0=s0)
        print(f"wrote {table.write(args.out)}")
    return EXIT_OK


def cmd_purity(args):
    try:
        spec = parse_observable("A", args.family)
    except ValueError as exc:
        raise ConfigError(str(exc), field="family") from None
    rep = args.representation or ("symmetric" if args.model == "lmg" else "full")
    system = SpinSystem(args.particles, rep)
    if args.model == "lmg":
        H = lmg_hamiltonian(LmgParams(args.particles, args.field), system)
    else:
        H = tim_hamiltonian(TimParams(args.particles, args.field))
    try:
        op = observable_family(spec.kind, system, **spec.params)
    except (KeyError, ValueError) as exc:
        raise ConfigError(str(exc), field="family") from None
    report = build_report(op, H, spec.describe())
    print(f"observable: {spec.describe()}")
    print(f"representation: {rep} (d={report.dim})")
    print(f"purity: {report.purity:.17g}")
    print(f"diag_purity: {report.diag_purity:.17g}")
    print(f"modified_purity: {report.modified_purity:.17g}")
    print(f"haar_mean: {report.haar_mean:.17g}")
    print(f"schema_version: {SCHEMA_VERSION}")
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    handlers = {"validate": cmd_validate, "static": cmd_scenario, "dynamics": cmd_scenario, "sweep": cmd_scenario,
                "fit-lambda": cmd_fit_lambda, "purity": cmd_purity}
    try:
        return handlers[args.command](args)
    except (ConfigError, TrivialObservableError, SizeGuardError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
