"""Hourly scenario sweeps, aggregate statistics and CSV reports.

For every hour the sweep builds the scenario, solves the plain relaxation as
a reference lower bound, solves the configured relaxation for each penalty
weight, runs a load flow on the resulting set-points and classifies the
result. Hours are independent; a bounded process pool may run them in
parallel and results are merged in hour order.

CSV outputs (schema version 1, files suffixed ``_v1``)
-------------------------------------------------------
``hours_v1.csv``      one row per (hour, epsilon), columns ``HOUR_COLUMNS``
``aggregate_v1.csv``  one row per epsilon, columns ``AGGREGATE_COLUMNS``
``scatter_voltage_v1.csv`` / ``scatter_current_v1.csv``
                      largest cone residual against the largest upper
                      voltage (resp. current rating) multiplier per row

Percentages are in [0, 100] with explicit denominators: infeasibility over
all hours, inexactness over feasible hours, and inexactness over hours whose
reactive target is reachable. Sub-optimality columns hold the gap bound in
percent of the feeder's peak load, averaged over feasible hours only. Empty
cells mean "not defined" (an empty denominator or a missing value).
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import exactness as ex
from .fixtures import profiles_path, resolve_feeder
from .formulation import CONFIGURATIONS, METHODS, OBJECTIVES, FormulationConfig, FormulationError, build_program
from .loadflow import USABLE_TOL, run_loadflow, violations
from .network import Feeder, ProfileSet, ScenarioOptions, build_scenario, load_feeder, load_profiles
from .program import solve_program

WORKERS_ENV = "DISTRELAX_WORKERS"
SCHEMA_VERSION = 1

HOUR_COLUMNS = (
    "hour", "method", "configuration", "objective", "epsilon", "status", "classification", "exact", "usable",
    "max_residual", "worst_line", "objective_value", "penalized_objective", "ropf_objective", "gap_bound",
    "gap_bound_pct_peak", "voltage_violation", "current_violation", "max_voltage_dual", "max_current_dual",
    "reachable", "lf_converged", "iterations", "message",
)
AGGREGATE_COLUMNS = (
    "method", "configuration", "objective", "epsilon", "hours", "feasible_hours", "infeasible_pct",
    "unsolved_hours", "inexact_pct_feasible", "zero_gap_pct_feasible", "reachable_hours", "inexact_pct_reachable",
    "peak_suboptimality_pct", "avg_suboptimality_pct", "max_residual", "exact_unusable_hours",
)
SCATTER_COLUMNS = ("hour", "epsilon", "max_residual", "{dual}", "exact", "usable")


class ConfigError(ValueError):
    """Invalid or inconsistent sweep configuration."""


@dataclass(frozen=True)
class SweepConfig:
    """Everything one sweep needs; mirrors the JSON config file keys.

    ``feeder`` is a path or a packaged fixture name; ``profiles`` defaults to
    the packaged synthetic year. Hours run from ``hour_start`` for
    ``hour_count`` hours.
    """

    feeder: str
    profiles: str | None = None
    hour_start: int = 0
    hour_count: int = 24
    configuration: str = "NS-NC"
    method: str = "GAN"
    objective: str = "min-import"
    q_value: float | None = None
    q_ref: float | None = None
    epsilons: tuple = (0.0,)
    exact_tol: float = ex.EXACT_TOL
    gap_eps: float = ex.GAP_EPS
    usable_tol: float = USABLE_TOL
    capacitor_mode: str | None = None
    pv_penetration: float = 2.5
    output: str = "sweep-out"
    workers: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "configuration", self.configuration.upper())
        object.__setattr__(self, "method", self.method.upper())
        object.__setattr__(self, "epsilons", tuple(float(e) for e in self.epsilons))
        self.validate()

    def validate(self):
        if self.configuration not in CONFIGURATIONS:
            raise ConfigError(f"configuration: expected one of {', '.join(CONFIGURATIONS)}, got {self.configuration!r}")
        if self.method not in METHODS:
            raise ConfigError(f"method: expected one of {', '.join(METHODS)}, got {self.method!r}")
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"objective: expected one of {', '.join(OBJECTIVES)}, got {self.objective!r}")
        if self.hour_count < 1 or self.hour_start < 0:
            raise ConfigError("hours: hour_start must be >= 0 and hour_count >= 1")
        if not self.epsilons or any(e < 0 or not math.isfinite(e) for e in self.epsilons):
            raise ConfigError("epsilons: need at least one finite nonnegative penalty weight")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        try:
            self.formulation().validate()
        except FormulationError as exc:
            raise ConfigError(f"method {self.method} with configuration {self.configuration}: {exc}") from None

    @property
    def hours(self) -> range:
        return range(self.hour_start, self.hour_start + self.hour_count)

    def formulation(self, method: str | None = None, epsilon: float = 0.0) -> FormulationConfig:
        return FormulationConfig.for_configuration(self.configuration, method or self.method,
                                                   objective=self.objective, q_value=self.q_value,
                                                   q_ref=self.q_ref, epsilon=epsilon)

    def scenario_options(self) -> ScenarioOptions:
        return ScenarioOptions(pv_penetration=self.pv_penetration, capacitor_mode=self.capacitor_mode)

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> "SweepConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        if "feeder" not in data:
            raise ConfigError("config key 'feeder' is required")
        data = dict(data)
        if base_dir is not None:
            for key in ("feeder", "profiles", "output"):
                val = data.get(key)
                if val is None or Path(val).is_absolute():
                    continue
                # relative paths are taken from the config file's directory
                if key == "output" or (base_dir / val).exists():
                    data[key] = str(base_dir / val)
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def load_sweep_config(path) -> SweepConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return SweepConfig.from_dict(data, path.parent)


def worker_count(config: SweepConfig) -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be a positive integer, got {env!r}") from None
        if n < 1:
            raise ConfigError(f"{WORKERS_ENV} must be a positive integer, got {env!r}")
        return n
    return config.workers


@dataclass(frozen=True)
class HourRecord:
    hour: int
    method: str
    configuration: str
    objective: str
    epsilon: float
    status: str
    classification: str
    exact: bool
    usable: bool | None
    max_residual: float
    worst_line: str
    objective_value: float
    penalized_objective: float
    ropf_objective: float
    gap_bound: float
    gap_bound_pct_peak: float
    voltage_violation: float
    current_violation: float
    max_voltage_dual: float
    max_current_dual: float
    reachable: bool
    lf_converged: bool | None
    iterations: int
    message: str = ""


@dataclass(frozen=True)
class AggregateRow:
    method: str
    configuration: str
    objective: str
    epsilon: float
    hours: int
    feasible_hours: int
    infeasible_pct: float
    unsolved_hours: int
    inexact_pct_feasible: float
    zero_gap_pct_feasible: float
    reachable_hours: int
    inexact_pct_reachable: float
    peak_suboptimality_pct: float
    avg_suboptimality_pct: float
    max_residual: float
    exact_unusable_hours: int


@dataclass
class SweepSummary:
    config: SweepConfig
    records: list
    aggregates: list = field(default_factory=list)


# ---------------------------------------------------------------- per hour

_STATE: dict = {}


def _init_worker(feeder: Feeder, profiles: ProfileSet, config: SweepConfig):
    _STATE.update(feeder=feeder, profiles=profiles, config=config)


def _run_hour_worker(hour: int):
    return run_hour(_STATE["feeder"], _STATE["profiles"], _STATE["config"], hour)


def run_hour(feeder: Feeder, profiles: ProfileSet, config: SweepConfig, hour: int) -> list:
    """Rows (one per penalty weight) for a single hour; never raises."""
    nan = float("nan")
    try:
        scenario = build_scenario(feeder, profiles, hour, config.scenario_options())
        ref = solve_program(build_program(feeder, scenario, config.formulation("ROPF")))
        ref_value = ex.true_objective(ref) if ref.optimal else nan
    except Exception as exc:  # recorded per row, the sweep goes on
        return [_error_record(config, hour, eps, f"{type(exc).__name__}: {exc}") for eps in config.epsilons]
    rows = []
    for eps in config.epsilons:
        try:
            if config.method == "ROPF" and eps == 0:
                sol = ref
            else:
                sol = solve_program(build_program(feeder, scenario, config.formulation(epsilon=eps)))
            rows.append(_classify_hour(feeder, config, hour, eps, sol, ref, ref_value))
        except Exception as exc:
            rows.append(_error_record(config, hour, eps, f"{type(exc).__name__}: {exc}"))
    return rows


def _classify_hour(feeder, config, hour, eps, sol, ref, ref_value) -> HourRecord:
    nan = float("nan")
    lf_ok = None
    vr = None
    lf = None
    if sol.optimal:
        p, q = ex.setpoints(sol, feeder)
        lf = run_loadflow(feeder, p, q, b=sol.program.meta["b"])
        lf_ok = lf.converged
        if lf.converged:
            vr = violations(lf, feeder, current_bounds=config.formulation().current_bounds,
                            threshold=config.usable_tol)
    gap = None
    if sol.optimal:
        if config.method == "ROPF":
            gap = ex.loadflow_gap_bound(sol, lf, vr) if vr is not None else math.inf
        elif ref.optimal:
            gap = ex.true_objective(sol) - ref_value
        else:
            gap = math.nan
    rep = ex.classify(sol, vr, gap_bound=gap, threshold=config.exact_tol, gap_eps=config.gap_eps)
    if sol.optimal and lf is not None and not lf.converged:
        msg = "load flow collapsed" if lf.collapsed else "load flow did not converge"
    else:
        msg = ""
    reachable = (config.objective == "q-target" and ref.optimal and ref_value < config.gap_eps)
    peak = feeder.peak_load
    return HourRecord(
        hour=hour, method=config.method, configuration=config.configuration, objective=config.objective,
        epsilon=eps, status=sol.status, classification=rep.classification, exact=rep.exact,
        usable=rep.usable, max_residual=rep.max_residual,
        worst_line=feeder.labels[rep.worst_line] if rep.worst_line else "",
        objective_value=rep.objective, penalized_objective=rep.penalized_objective,
        ropf_objective=ref_value, gap_bound=rep.gap_bound,
        gap_bound_pct_peak=rep.gap_bound / peak * 100.0 if peak > 0 else nan,
        voltage_violation=rep.voltage_violation, current_violation=rep.current_violation,
        max_voltage_dual=rep.max_voltage_dual, max_current_dual=rep.max_current_dual,
        reachable=bool(reachable), lf_converged=lf_ok, iterations=sol.raw.iterations, message=msg)


def _error_record(config, hour, eps, msg) -> HourRecord:
    nan = float("nan")
    return HourRecord(hour, config.method, config.configuration, config.objective, eps, "error", ex.UNSOLVED,
                      False, None, nan, "", nan, nan, nan, nan, nan, nan, nan, nan, nan, False, None, 0, msg)


# ------------------------------------------------------------------ sweep

def run_sweep(config: SweepConfig, feeder: Feeder | None = None, profiles: ProfileSet | None = None) -> SweepSummary:
    """Run every configured hour; deterministic for a given config."""
    if feeder is None:
        feeder = load_feeder(resolve_feeder(config.feeder))
    if profiles is None:
        profiles = load_profiles(config.profiles or profiles_path())
    if config.hour_start + config.hour_count > profiles.hours:
        raise ConfigError(f"hours {config.hour_start}..{config.hour_start + config.hour_count - 1} exceed "
                          f"the profile length {profiles.hours}")
    workers = min(worker_count(config), config.hour_count)
    if workers == 1:
        per_hour = [run_hour(feeder, profiles, config, h) for h in config.hours]
    else:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                                 initargs=(feeder, profiles, config)) as pool:
            # map yields in submission order, so rows stay in hour order
            per_hour = list(pool.map(_run_hour_worker, config.hours))
    records = [r for rows in per_hour for r in rows]
    return SweepSummary(config, records, aggregate(records, config))


def _pct(num: int, den: int) -> float:
    return 100.0 * num / den if den else math.nan


def aggregate(records, config: SweepConfig) -> list:
    """Per-epsilon statistics over hour records."""
    out = []
    for eps in config.epsilons:
        rows = [r for r in records if r.epsilon == eps]
        feasible = [r for r in rows if r.status == "optimal"]
        infeasible = [r for r in rows if r.classification == ex.INFEASIBLE_CLASS]
        unsolved = [r for r in rows if r.classification == ex.UNSOLVED]
        inexact = [r for r in feasible if not r.exact]
        zero_gap = [r for r in feasible if r.classification == ex.INEXACT_ZERO_GAP]
        reach = [r for r in feasible if r.reachable]
        subopt = [r.gap_bound_pct_peak for r in feasible if math.isfinite(r.gap_bound_pct_peak)]
        resid = [r.max_residual for r in feasible]
        out.append(AggregateRow(
            method=config.method, configuration=config.configuration, objective=config.objective, epsilon=eps,
            hours=len(rows), feasible_hours=len(feasible), infeasible_pct=_pct(len(infeasible), len(rows)),
            unsolved_hours=len(unsolved), inexact_pct_feasible=_pct(len(inexact), len(feasible)),
            zero_gap_pct_feasible=_pct(len(zero_gap), len(feasible)), reachable_hours=len(reach),
            inexact_pct_reachable=_pct(sum(1 for r in reach if not r.exact), len(reach)),
            peak_suboptimality_pct=max(subopt) if subopt else math.nan,
            avg_suboptimality_pct=float(np.mean(subopt)) if subopt else math.nan,
            max_residual=max(resid) if resid else math.nan,
            exact_unusable_hours=sum(1 for r in feasible if r.exact and r.usable is False)))
    return out


# ---------------------------------------------------------------- reports

def format_value(v) -> str:
    """Deterministic CSV cell text."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if math.isnan(v):
            return ""
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{float(v):.10g}"
    return str(v)


def _write_csv(path: Path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format_value(row[c]) for c in columns])


def emit_reports(summary: SweepSummary, directory) -> dict:
    """Write the per-hour, aggregate and scatter CSVs; returns their paths."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    hours = [asdict(r) for r in summary.records]
    paths = {
        "hours": d / f"hours_v{SCHEMA_VERSION}.csv",
        "aggregate": d / f"aggregate_v{SCHEMA_VERSION}.csv",
        "scatter_voltage": d / f"scatter_voltage_v{SCHEMA_VERSION}.csv",
        "scatter_current": d / f"scatter_current_v{SCHEMA_VERSION}.csv",
    }
    _write_csv(paths["hours"], HOUR_COLUMNS, hours)
    _write_csv(paths["aggregate"], AGGREGATE_COLUMNS, [asdict(a) for a in summary.aggregates])
    for key, dual in (("scatter_voltage", "max_voltage_dual"), ("scatter_current", "max_current_dual")):
        cols = tuple(c.format(dual=dual) for c in SCATTER_COLUMNS)
        rows = [r for r in hours if r["status"] == "optimal"]
        _write_csv(paths[key], cols, rows)
    return paths


def read_hour_records(path) -> list:
    """Parse an ``hours_v1.csv`` back into ``HourRecord`` objects."""
    types = {f.name: f.type for f in fields(HourRecord)}
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            kw = {}
            for k, v in row.items():
                t = types[k]
                if t == "int":
                    kw[k] = int(v)
                elif t == "float":
                    kw[k] = float(v) if v else math.nan
                elif t.startswith("bool"):
                    kw[k] = None if v == "" else v == "1"
                else:
                    kw[k] = v
            out.append(HourRecord(**kw))
    return out


def with_overrides(config: SweepConfig, **changes) -> SweepConfig:
    changes = {k: v for k, v in changes.items() if v is not None}
    try:
        return replace(config, **changes)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
