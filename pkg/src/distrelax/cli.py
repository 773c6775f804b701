"""Command-line interface.

Subcommands: ``solve``, ``sweep``, ``loadflow``, ``export`` and ``validate``.
Exit codes: 0 success, 1 usage error, 2 data error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import exactness as ex
from .fixtures import FIXTURE_HOURS, profiles_path, resolve_feeder
from .formulation import CONFIGURATIONS, METHODS, OBJECTIVES, FormulationConfig, FormulationError
from .formulation import build_program, negative_candidates
from .harness import ConfigError, SweepConfig, emit_reports, load_sweep_config, run_sweep, with_overrides
from .loadflow import run_loadflow, violations
from .network import FeederError, ScenarioOptions, build_scenario, fixed_scenario, load_feeder, load_profiles
from .program import solve_program, to_standard_form
from .solver import StandardFormError, export_standard_form

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_problem_args(p):
    p.add_argument("--feeder", default="four_bus", help="feeder file or packaged fixture name (default four_bus)")
    p.add_argument("--profiles", help="profile CSV (default: packaged synthetic year)")
    p.add_argument("--hour", type=int, help="profile hour; omitted = peak loads without PV")
    p.add_argument("--method", default="ropf", type=str.upper, choices=METHODS)
    p.add_argument("--config", dest="configuration", default="NS-NC", type=str.upper, choices=tuple(CONFIGURATIONS))
    p.add_argument("--objective", default="min-import", choices=OBJECTIVES)
    p.add_argument("--q-value", type=float, help="fixed reactive import (objective fixed-q)")
    p.add_argument("--q-ref", type=float, help="reactive import target (objective q-target)")
    p.add_argument("--epsilon", type=float, default=0.0, help="current penalty weight")
    p.add_argument("--capacitor-mode", choices=("fixed", "variable"))
    p.add_argument("--nick-current-side", choices=("bus", "up"), default="bus")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="distrelax", description="Cone relaxations of radial-feeder OPF and their exactness.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve one hour and print the exactness report")
    _add_problem_args(p)
    p.add_argument("--exact-tol", type=float, default=ex.EXACT_TOL)
    p.add_argument("--gap-eps", type=float, default=ex.GAP_EPS)

    p = sub.add_parser("export", help="write the standard-form program of one hour")
    _add_problem_args(p)
    p.add_argument("--output", "-o", required=True)

    p = sub.add_parser("sweep", help="run an hourly sweep and write CSV reports")
    p.add_argument("--config-file", help="JSON sweep configuration")
    p.add_argument("--feeder")
    p.add_argument("--profiles")
    p.add_argument("--hours", help="START:COUNT (default: the fixture day)")
    p.add_argument("--config", dest="configuration", type=str.upper, choices=tuple(CONFIGURATIONS))
    p.add_argument("--method", type=str.upper, choices=METHODS)
    p.add_argument("--objective", choices=OBJECTIVES)
    p.add_argument("--q-value", type=float)
    p.add_argument("--q-ref", type=float)
    p.add_argument("--epsilons", help="comma-separated penalty weights, e.g. 0,0.01")
    p.add_argument("--capacitor-mode", choices=("fixed", "variable"))
    p.add_argument("--exact-tol", type=float)
    p.add_argument("--gap-eps", type=float)
    p.add_argument("--output", "-o")
    p.add_argument("--workers", type=int)

    p = sub.add_parser("loadflow", help="load flow of a set-point file and its bound violations")
    p.add_argument("--feeder", default="four_bus")
    p.add_argument("--setpoints", required=True, help="CSV with columns bus,p,q (p.u. withdrawals)")
    p.add_argument("--no-shunts", action="store_true")
    p.add_argument("--no-current-bounds", action="store_true")

    p = sub.add_parser("validate", help="check a feeder file")
    p.add_argument("feeder")
    return parser


def _formulation(args) -> FormulationConfig:
    return FormulationConfig.for_configuration(
        args.configuration, args.method, objective=args.objective, q_value=args.q_value, q_ref=args.q_ref,
        epsilon=args.epsilon, nick_current_side=args.nick_current_side)


def _scenario(args, feeder):
    if args.hour is None:
        return fixed_scenario(feeder)
    profiles = load_profiles(args.profiles or profiles_path())
    return build_scenario(feeder, profiles, args.hour, ScenarioOptions(capacitor_mode=args.capacitor_mode))


def cmd_solve(args, out) -> int:
    cfg = _formulation(args)
    feeder = load_feeder(resolve_feeder(args.feeder))
    sc = _scenario(args, feeder)
    sol = solve_program(build_program(feeder, sc, cfg))
    if not sol.optimal:
        print(f"solver status: {sol.status} (hour {args.hour if args.hour is not None else 'peak'})", file=out)
        rep = ex.classify(sol)
        print(rep.summary(), file=out)
        return EXIT_SOLVER
    p, q = ex.setpoints(sol, feeder)
    lf = run_loadflow(feeder, p, q, b=sol.program.meta["b"])
    vr = violations(lf, feeder, current_bounds=cfg.current_bounds) if lf.converged else None
    if cfg.method == "ROPF" and cfg.epsilon == 0:
        gap = ex.loadflow_gap_bound(sol, lf, vr) if vr is not None else float("inf")
    else:
        ref = solve_program(build_program(feeder, sc, FormulationConfig.for_configuration(
            args.configuration, "ROPF", objective=args.objective, q_value=args.q_value, q_ref=args.q_ref)))
        gap = ex.true_objective(sol) - ex.true_objective(ref) if ref.optimal else float("nan")
    rep = ex.classify(sol, vr, gap_bound=gap, threshold=args.exact_tol, gap_eps=args.gap_eps)
    print(f"feeder {feeder.name or args.feeder}, hour {args.hour if args.hour is not None else 'peak'}, "
          f"method {cfg.method}, configuration {args.configuration}, objective {cfg.objective}", file=out)
    print(rep.summary(), file=out)
    if not lf.converged:
        print("load flow did not converge" + (" (voltage collapse)" if lf.collapsed else ""), file=out)
    if cfg.method == "NICK":
        neg = negative_candidates(sol)
        if neg:
            labels = ", ".join(feeder.labels[l] for l in neg)
            print(f"warning: negative current-bound candidates on lines {labels}", file=out)
    return EXIT_OK


def cmd_export(args, out) -> int:
    cfg = _formulation(args)
    feeder = load_feeder(resolve_feeder(args.feeder))
    sf, _ = to_standard_form(build_program(feeder, _scenario(args, feeder), cfg))
    export_standard_form(sf, args.output)
    print(f"wrote {args.output}: {sf.n} variables, {sf.A.shape[0]} equalities, {sf.G.shape[0]} cone rows", file=out)
    return EXIT_OK


def _parse_hours(text: str):
    try:
        start, count = (int(t) for t in text.split(":"))
    except ValueError:
        raise UsageError(f"--hours: expected START:COUNT, got {text!r}") from None
    return start, count


def cmd_sweep(args, out) -> int:
    if args.config_file:
        config = load_sweep_config(args.config_file)
    else:
        if not args.feeder:
            raise UsageError("sweep: give --config-file or --feeder")
        config = SweepConfig(feeder=args.feeder, hour_start=FIXTURE_HOURS.start, hour_count=len(FIXTURE_HOURS),
                             configuration=args.configuration or "NS-NC", method=args.method or "GAN",
                             objective=args.objective or "min-import", q_value=args.q_value, q_ref=args.q_ref)
    hours = _parse_hours(args.hours) if args.hours else (None, None)
    eps = None
    if args.epsilons:
        try:
            eps = tuple(float(t) for t in args.epsilons.split(","))
        except ValueError:
            raise UsageError(f"--epsilons: expected comma-separated numbers, got {args.epsilons!r}") from None
    config = with_overrides(config, feeder=args.feeder if args.config_file else None, profiles=args.profiles,
                            hour_start=hours[0], hour_count=hours[1], configuration=args.configuration,
                            method=args.method, objective=args.objective, q_value=args.q_value, q_ref=args.q_ref,
                            epsilons=eps, capacitor_mode=args.capacitor_mode, exact_tol=args.exact_tol,
                            gap_eps=args.gap_eps, output=args.output, workers=args.workers)
    summary = run_sweep(config)
    paths = emit_reports(summary, config.output)
    for a in summary.aggregates:
        print(f"epsilon {a.epsilon:g}: {a.hours} hours, infeasible {a.infeasible_pct:.1f}%, "
              f"inexact among feasible {a.inexact_pct_feasible:.1f}%", file=out)
    for key, path in paths.items():
        print(f"{key}: {path}", file=out)
    failed = [r for r in summary.records if r.status == "error"]
    for r in failed:
        print(f"hour {r.hour}: {r.message}", file=out)
    return EXIT_SOLVER if failed else EXIT_OK


def _read_setpoints(path, feeder):
    p = np.zeros(feeder.n + 1)
    q = np.zeros(feeder.n + 1)
    seen = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"bus", "p", "q"} <= set(reader.fieldnames):
            raise FeederError(f"{path}: expected header bus,p,q")
        for lineno, row in enumerate(reader, start=2):
            try:
                l = feeder.index_of(row["bus"])
                p[l], q[l] = float(row["p"]), float(row["q"])
            except (KeyError, ValueError) as exc:
                raise FeederError(f"{path}:{lineno}: {exc}") from None
            seen.add(l)
    missing = [feeder.labels[l] for l in range(1, feeder.n + 1) if l not in seen]
    if missing:
        raise FeederError(f"{path}: no set-point for bus(es) {', '.join(missing)}")
    return p, q


def cmd_loadflow(args, out) -> int:
    feeder = load_feeder(resolve_feeder(args.feeder))
    p, q = _read_setpoints(args.setpoints, feeder)
    b = np.zeros(feeder.n + 1) if args.no_shunts else None
    lf = run_loadflow(feeder, p, q, b=b)
    if not lf.converged:
        print(f"load flow failed after {lf.iterations} iterations" + (" (voltage collapse)" if lf.collapsed else ""),
              file=out)
        return EXIT_SOLVER
    vr = violations(lf, feeder, current_bounds=not args.no_current_bounds)
    print(f"converged in {lf.iterations} iterations, max equation residual {lf.residual:.3g}", file=out)
    print(f"import {lf.import_p:.6f} + j{lf.import_q:.6f} p.u.", file=out)
    print("bus  |V| p.u.   line  |I| p.u.", file=out)
    for l in range(1, feeder.n + 1):
        print(f"{feeder.labels[l]:>4} {np.sqrt(lf.v[l]):9.6f} {feeder.labels[l]:>5} {np.sqrt(lf.f[l]):9.6f}", file=out)
    print(f"voltage violation {vr.voltage:.6g} (bus {_label(feeder, vr.worst_voltage_bus)})", file=out)
    print(f"current violation {vr.current:.6g} (line {_label(feeder, vr.worst_current_line)})", file=out)
    print(f"usable {vr.usable}", file=out)
    return EXIT_OK


def _label(feeder, l):
    return "-" if l is None else feeder.labels[l]


def cmd_validate(args, out) -> int:
    feeder = load_feeder(resolve_feeder(args.feeder))
    zones = ", ".join(f"{k} {v:g} kV" for k, v in feeder.base_voltages.items())
    print(f"{args.feeder}: ok, {feeder.n} buses below root {feeder.labels[0]}, {feeder.base_power:g} MVA base, "
          f"zones {zones}, peak load {feeder.peak_load:.4f} p.u.", file=out)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "export": cmd_export, "sweep": cmd_sweep, "loadflow": cmd_loadflow,
            "validate": cmd_validate}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args, out)
    except (UsageError, FormulationError, ConfigError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FeederError, StandardFormError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
