import csv
import json
import math

import pytest

from distrelax import exactness as ex
from distrelax.harness import (
    AGGREGATE_COLUMNS,
    HOUR_COLUMNS,
    WORKERS_ENV,
    ConfigError,
    SweepConfig,
    aggregate,
    emit_reports,
    format_value,
    load_sweep_config,
    read_hour_records,
    run_sweep,
    worker_count,
)

SHORT = dict(feeder="four_bus", hour_start=4136, hour_count=6)


@pytest.fixture(scope="module")
def gan_sweep(tmp_path_factory):
    cfg = SweepConfig(configuration="NS-C", method="GAN", epsilons=(0.0, 0.01), **SHORT)
    summary = run_sweep(cfg)
    out = tmp_path_factory.mktemp("gan")
    return summary, emit_reports(summary, out)


def test_hour_csv_schema(gan_sweep):
    _, paths = gan_sweep
    with open(paths["hours"]) as fh:
        header = next(csv.reader(fh))
    assert tuple(header) == HOUR_COLUMNS
    with open(paths["aggregate"]) as fh:
        assert tuple(next(csv.reader(fh))) == AGGREGATE_COLUMNS
    with open(paths["scatter_voltage"]) as fh:
        assert next(csv.reader(fh)) == ["hour", "epsilon", "max_residual", "max_voltage_dual", "exact", "usable"]


def test_rows_in_hour_order(gan_sweep):
    summary, _ = gan_sweep
    keys = [(r.hour, r.epsilon) for r in summary.records]
    assert keys == sorted(keys)
    assert len(keys) == 12


def test_aggregate_recomputed_from_csv(gan_sweep):
    summary, paths = gan_sweep
    records = read_hour_records(paths["hours"])
    again = aggregate(records, summary.config)
    with open(paths["aggregate"]) as fh:
        rows = list(csv.DictReader(fh))
    for row, agg in zip(rows, again):
        for col in AGGREGATE_COLUMNS:
            assert row[col] == format_value(getattr(agg, col)), col


def test_percentages_and_denominators(gan_sweep):
    summary, _ = gan_sweep
    for agg in summary.aggregates:
        rows = [r for r in summary.records if r.epsilon == agg.epsilon]
        feasible = [r for r in rows if r.status == "optimal"]
        assert agg.feasible_hours == len(feasible)
        assert 0 <= agg.inexact_pct_feasible <= 100
        assert agg.inexact_pct_feasible == pytest.approx(
            100 * sum(not r.exact for r in feasible) / len(feasible))


def test_suboptimality_units(gan_sweep, feeders):
    summary, _ = gan_sweep
    peak = feeders["four_bus"].peak_load
    for r in summary.records:
        assert r.gap_bound_pct_peak == pytest.approx((r.objective_value - r.ropf_objective) / peak * 100, abs=1e-9)


def test_penalty_clears_inexact_hours(gan_sweep):
    summary, _ = gan_sweep
    by_eps = {a.epsilon: a for a in summary.aggregates}
    assert by_eps[0.0].inexact_pct_feasible > 0
    assert by_eps[0.01].inexact_pct_feasible == 0


def test_reproducible_bytes(tmp_path):
    cfg = SweepConfig(configuration="NS-NC", method="NICK", hour_start=4138, hour_count=3, feeder="four_bus")
    a = emit_reports(run_sweep(cfg), tmp_path / "a")
    b = emit_reports(run_sweep(cfg), tmp_path / "b")
    for key in a:
        assert a[key].read_bytes() == b[key].read_bytes()


def test_worker_pool_matches_serial(tmp_path):
    base = dict(configuration="NS-NC", method="GAN", hour_start=4138, hour_count=3, feeder="four_bus")
    a = emit_reports(run_sweep(SweepConfig(workers=1, **base)), tmp_path / "a")
    b = emit_reports(run_sweep(SweepConfig(workers=2, **base)), tmp_path / "b")
    assert a["hours"].read_bytes() == b["hours"].read_bytes()


def test_scatter_duals_zero_without_binding_bounds(tmp_path):
    cfg = SweepConfig(feeder="two_bus", configuration="NS-NC", method="ROPF", hour_start=0, hour_count=3)
    paths = emit_reports(run_sweep(cfg), tmp_path)
    for key, col in (("scatter_voltage", "max_voltage_dual"), ("scatter_current", "max_current_dual")):
        with open(paths[key]) as fh:
            vals = [float(r[col]) for r in csv.DictReader(fh)]
        assert vals and all(abs(v) < 1e-7 for v in vals)


def test_infeasible_hours_leave_inexact_denominator():
    cfg = SweepConfig(configuration="NS-C", method="HUANG", hour_start=4140, hour_count=2, feeder="four_bus")
    summary = run_sweep(cfg)
    agg = summary.aggregates[0]
    assert agg.infeasible_pct == 100.0
    assert agg.feasible_hours == 0 and math.isnan(agg.inexact_pct_feasible)
    assert {r.classification for r in summary.records} == {ex.INFEASIBLE_CLASS}


def test_hour_errors_are_recorded(tmp_path, feeders):
    text = (tmp_path / "x.csv")
    text.write_text("hour,key,multiplier\n0,other,0.5\n1,other,0.5\n")
    cfg = SweepConfig(feeder="four_bus", profiles=str(text), hour_start=0, hour_count=2)
    summary = run_sweep(cfg)
    assert [r.status for r in summary.records] == ["error", "error"]
    assert "load" in summary.records[0].message
    assert summary.aggregates[0].unsolved_hours == 2


def test_reachable_flag_for_q_target():
    cfg = SweepConfig(feeder="four_bus", configuration="NS-NC", method="GAN", objective="q-target", q_ref=0.0,
                      hour_start=4140, hour_count=1)
    rec = run_sweep(cfg).records[0]
    assert rec.reachable and rec.ropf_objective < 1e-6


@pytest.mark.parametrize("data,msg", [
    (dict(feeder="four_bus", configuration="S-C", method="GAN"), "shunts"),
    (dict(feeder="four_bus", method="NOPE"), "method"),
    (dict(feeder="four_bus", epsilons=[]), "epsilons"),
    (dict(feeder="four_bus", hour_count=0), "hours"),
    (dict(feeder="four_bus", colour="red"), "unknown config key"),
    (dict(method="GAN"), "feeder"),
    (dict(feeder="four_bus", objective="q-target"), "q_ref"),
])
def test_config_errors(data, msg):
    with pytest.raises(ConfigError, match=msg):
        SweepConfig.from_dict(data)


def test_config_file_paths_are_relative_to_file(tmp_path):
    (tmp_path / "sub").mkdir()
    cfg_path = tmp_path / "sub" / "sweep.json"
    cfg_path.write_text(json.dumps({"feeder": "four_bus", "output": "out", "epsilons": [0, 0.01]}))
    cfg = load_sweep_config(cfg_path)
    assert cfg.feeder == "four_bus"
    assert cfg.output == str(tmp_path / "sub" / "out")
    assert cfg.epsilons == (0.0, 0.01)


def test_config_file_syntax_error(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{\n  \"feeder\": }")
    with pytest.raises(ConfigError, match=r"bad.json:2"):
        load_sweep_config(p)


def test_worker_env_override(monkeypatch):
    cfg = SweepConfig(feeder="four_bus", workers=3)
    assert worker_count(cfg) == 3
    monkeypatch.setenv(WORKERS_ENV, "2")
    assert worker_count(cfg) == 2
    monkeypatch.setenv(WORKERS_ENV, "zero")
    with pytest.raises(ConfigError, match=WORKERS_ENV):
        worker_count(cfg)


def test_format_value():
    assert format_value(float("nan")) == ""
    assert format_value(True) == "1"
    assert format_value(0.1 + 0.2) == "0.3"
    assert format_value(None) == ""
