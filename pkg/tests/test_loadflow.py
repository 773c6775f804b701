import numpy as np
import pytest

from distrelax import exactness as ex
from distrelax.formulation import FormulationConfig, build_program
from distrelax.loadflow import branch_flow_residuals, run_loadflow, violations
from distrelax.network import build_scenario, fixed_scenario, simple_feeder
from distrelax.program import solve_program
from oracles import phasor_loadflow, two_bus_operating_point


def test_two_bus_matches_closed_form():
    f = simple_feeder([-1, 0], [0, 0.03 + 0.05j])
    p, q = np.array([0, 0.6]), np.array([0, 0.25])
    lf = run_loadflow(f, p, q)
    v1, f1, pt = two_bus_operating_point(0.03, 0.05, 0.6, 0.25)
    assert lf.converged
    assert lf.v[1] == pytest.approx(v1, abs=1e-12)
    assert lf.f[1] == pytest.approx(f1, abs=1e-12)
    assert lf.Pt[1] == pytest.approx(pt, abs=1e-12)
    assert lf.import_p == pytest.approx(pt, abs=1e-12)


def test_zero_load_converges_at_once():
    f = simple_feeder([-1, 0, 1], [0, 0.01 + 0.02j, 0.02 + 0.02j])
    lf = run_loadflow(f, np.zeros(3), np.zeros(3))
    assert lf.converged and lf.iterations == 1
    np.testing.assert_allclose(lf.v, 1.0)
    np.testing.assert_allclose(lf.f, 0.0)


def test_matches_phasor_sweep(feeders, profiles):
    f = feeders["fifteen_bus"]
    p, q = build_scenario(f, profiles, 4140).fixed_withdrawals()
    lf = run_loadflow(f, p, q, b=np.zeros(f.n + 1))
    vm2, S0 = phasor_loadflow(f.up, f.r + 1j * f.x, (p + 1j * q)[:, None], f.v0)
    np.testing.assert_allclose(lf.v, vm2[:, 0], atol=1e-10)
    assert lf.import_p == pytest.approx(S0[0].real, abs=1e-10)
    assert lf.import_q == pytest.approx(S0[0].imag, abs=1e-10)


def test_residuals_vanish_with_shunts(feeders, profiles):
    f = feeders["fifteen_bus"]
    p, q = build_scenario(f, profiles, 4140).fixed_withdrawals()
    lf = run_loadflow(f, p, q)
    assert lf.converged
    res = branch_flow_residuals(f, lf.v, lf.f, lf.Pt, lf.Qt, lf.Pb, lf.Qb, p, q, f.b)
    assert res.shape == (6, f.n)
    assert res.max() < 1e-10


def test_collapse_is_reported():
    f = simple_feeder([-1, 0], [0, 0.5 + 0.5j])
    lf = run_loadflow(f, np.array([0, 5.0]), np.array([0, 5.0]))
    assert not lf.converged
    with pytest.raises(ValueError):
        violations(lf, f)


def test_violations_in_magnitude_units():
    f = simple_feeder([-1, 0], [0, 0.05 + 0.1j], vmin=0.95, vmax=1.05, imax=0.3, p_load=[0, 0.5])
    lf = run_loadflow(f, np.array([0, 0.5]), np.array([0, 0.2]))
    rep = violations(lf, f)
    v = np.sqrt(lf.v[1])
    assert rep.voltage == pytest.approx(max(0.0, 0.95 - v))
    assert rep.current == pytest.approx(max(0.0, np.sqrt(lf.f[1]) - 0.3))
    assert rep.worst_current_line == 1
    assert not rep.usable
    assert violations(lf, f, current_bounds=False).current == 0.0


def test_lower_voltage_bound_counts():
    f = simple_feeder([-1, 0], [0, 0.1 + 0.2j], vmin=0.99, vmax=1.1)
    lf = run_loadflow(f, np.array([0, 0.3]), np.array([0, 0.1]))
    rep = violations(lf, f)
    assert rep.voltage > 0 and rep.worst_voltage_bus == 1


def test_reproduces_exact_relaxation(feeders, profiles):
    f = feeders["four_bus"]
    sc = build_scenario(f, profiles, 4140)
    sol = solve_program(build_program(f, sc, FormulationConfig.for_configuration("S-C", "NICK")))
    assert ex.residuals(sol, f).max() < 1e-6
    p, q = ex.setpoints(sol, f)
    lf = run_loadflow(f, p, q)
    for l in range(1, f.n + 1):
        assert lf.v[l] == pytest.approx(sol[("v", l)], abs=1e-6)
    assert lf.import_p == pytest.approx(sol[("Pt", 1)], abs=1e-6)


def test_fixed_scenario_loadflow(feeders):
    f = feeders["four_bus"]
    p, q = fixed_scenario(f).fixed_withdrawals()
    lf = run_loadflow(f, p, q)
    assert lf.converged and lf.residual < 1e-10
