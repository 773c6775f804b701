import csv
import io
import json
import subprocess
import sys

import pytest

from distrelax.cli import EXIT_DATA, EXIT_OK, EXIT_SOLVER, EXIT_USAGE, main
from distrelax.fixtures import fixture_path
from distrelax.solver import import_standard_form


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def test_validate_fixture():
    code, out = run("validate", str(fixture_path("fifteen_bus")))
    assert code == EXIT_OK and "15 buses" in out


def test_validate_broken_file(tmp_path, capsys):
    p = tmp_path / "bad.feeder"
    p.write_text("distrelax-feeder 1\n[bases]\npower_mva = x\n")
    code, _ = run("validate", str(p))
    assert code == EXIT_DATA
    assert "power_mva" in capsys.readouterr().err


def test_solve_nick_prints_report():
    code, out = run("solve", "--method", "nick", "--config", "s-c", "--objective", "min-import")
    assert code == EXIT_OK
    assert "classification      exact" in out
    assert "gap bound" in out


def test_solve_hour_with_penalty():
    code, out = run("solve", "--feeder", "four_bus", "--hour", "4140", "--method", "gan", "--config", "ns-c",
                    "--epsilon", "0.01")
    assert code == EXIT_OK and "epsilon 0.01" in out


def test_solve_infeasible_exits_3():
    code, out = run("solve", "--hour", "4140", "--method", "huang", "--config", "ns-c")
    assert code == EXIT_SOLVER and "infeasible" in out


def test_sweep_gan_with_shunts_is_usage_error(capsys):
    code, _ = run("sweep", "--feeder", "four_bus", "--method", "gan", "--config", "s-c")
    assert code == EXIT_USAGE
    assert "shunts" in capsys.readouterr().err


def test_bad_flags_are_usage_errors(capsys):
    assert run("solve", "--method", "nobody")[0] == EXIT_USAGE
    assert run("frobnicate")[0] == EXIT_USAGE
    assert run("sweep", "--feeder", "four_bus", "--hours", "x")[0] == EXIT_USAGE
    assert run("solve", "--objective", "q-target")[0] == EXIT_USAGE


def test_sweep_from_config_file(tmp_path):
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps({"feeder": "four_bus", "method": "NICK", "configuration": "NS-C",
                               "hour_start": 4140, "hour_count": 2, "output": "out"}))
    code, out = run("sweep", "--config-file", str(cfg), "--epsilons", "0,0.01")
    assert code == EXIT_OK
    with open(tmp_path / "out" / "hours_v1.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [(r["hour"], r["epsilon"]) for r in rows] == [("4140", "0"), ("4140", "0.01"), ("4141", "0"),
                                                          ("4141", "0.01")]


def test_sweep_missing_config_file(tmp_path):
    assert run("sweep", "--config-file", str(tmp_path / "none.json"))[0] == EXIT_DATA


def test_loadflow_subcommand(tmp_path):
    sp = tmp_path / "sp.csv"
    sp.write_text("bus,p,q\n1,0.1,0.04\n2,0.15,0.06\n3,0.06,0.02\n4,0.12,0.05\n")
    code, out = run("loadflow", "--feeder", "four_bus", "--setpoints", str(sp))
    assert code == EXIT_OK and "usable True" in out
    sp.write_text("bus,p,q\n1,0.1,0.04\n")
    assert run("loadflow", "--feeder", "four_bus", "--setpoints", str(sp))[0] == EXIT_DATA
    sp.write_text("bus,p,q\n1,9,9\n2,9,9\n3,9,9\n4,9,9\n")
    assert run("loadflow", "--feeder", "four_bus", "--setpoints", str(sp))[0] == EXIT_SOLVER


def test_export_subcommand(tmp_path):
    path = tmp_path / "p.sf"
    code, _ = run("export", "--method", "nick", "--config", "s-c", "--hour", "4140", "-o", str(path))
    assert code == EXIT_OK
    prog = import_standard_form(path)
    assert prog.rsoc and prog.A.shape[0] > 0


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "distrelax", "validate", "two_bus"], capture_output=True, text=True)
    assert res.returncode == 0 and "ok" in res.stdout


@pytest.mark.parametrize("conf", ["ns-nc", "NS-C", "s-c"])
def test_configuration_names_case_insensitive(conf):
    assert run("solve", "--method", "nick", "--config", conf)[0] == EXIT_OK
