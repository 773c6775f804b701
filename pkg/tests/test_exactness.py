from dataclasses import replace

import numpy as np
import pytest

from distrelax import exactness as ex
from distrelax.formulation import FormulationConfig, build_program
from distrelax.loadflow import run_loadflow, violations
from distrelax.network import Scenario, fixed_scenario, simple_feeder
from distrelax.program import ModelSolution, solve_program
from oracles import central_difference


def _export_case(vmax=1.05, imax=None):
    """Two buses, PV at bus 1 able to push the voltage over its cap."""
    f = simple_feeder([-1, 0], [0, 0.05 + 0.1j], vmin=0.9, vmax=vmax, imax=imax, p_load=[0, 0.1],
                      q_load=[0, 0.02])
    sc = Scenario(hour=0, p_load=[0, 0.1], q_load=[0, 0.02], pv_avail=[0, 1.5], pv_cap=[0, 1.5], q_cap=[0, 0],
                  cap_variable=[False, False])
    return f, sc


def _solve(f, sc, conf="NS-NC", method="ROPF", tol=1e-8, **kw):
    prog = build_program(f, sc, FormulationConfig.for_configuration(conf, method, **kw))
    return solve_program(prog, feas_tol=tol, gap_tol=tol)


# multipliers converge more slowly than the objective; finite differences
# against them need a tighter solve
SENS_TOL = 1e-10


def test_residual_of_inflated_current():
    f = simple_feeder([-1, 0], [0, 0.01 + 0.02j], p_load=[0, 0.3], q_load=[0, 0.1])
    sol = _solve(f, fixed_scenario(f))
    assert ex.residuals(sol, f)[1] == pytest.approx(0.0, abs=1e-7)
    x = sol.raw.x.copy()
    k = sol.program.var_index(("f", 1))
    base = ex.residuals(sol, f)[1]
    x[k] += 0.0375
    bumped = ModelSolution(sol.program, sol.index, replace(sol.raw, x=x))
    # v_up = 1 at the root, so the residual grows by the inflation itself
    assert ex.residuals(bumped, f)[1] - base == pytest.approx(0.0375, abs=1e-12)


def test_residuals_need_optimal_solution():
    f, sc = _export_case()
    sc = replace(sc, p_load=np.array([0, 50.0]), pv_avail=np.zeros(2), pv_cap=np.zeros(2))
    sol = _solve(f, sc)
    assert not sol.optimal
    with pytest.raises(ex.ExactnessError):
        ex.residuals(sol, f)
    assert ex.classify(sol).classification in (ex.INFEASIBLE_CLASS, ex.UNSOLVED)


def test_voltage_dual_matches_finite_difference():
    vmax = 1.04
    f, sc = _export_case(vmax)
    sol = _solve(f, sc, tol=SENS_TOL)
    assert sol.dual(("vmax", 1)) > 1e-3

    def of(vmax_sq):
        g = f.replace(vmax=np.array([1.0, vmax_sq]))
        return _solve(g, sc, tol=SENS_TOL).objective

    fd = central_difference(of, vmax ** 2, 1e-4)
    assert sol.dual(("vmax", 1)) == pytest.approx(-fd, abs=1e-4)
    assert ex.dual_diagnostics(sol)["voltage"] == pytest.approx(sol.dual(("vmax", 1)))


def test_current_dual_matches_finite_difference():
    f, sc = _export_case(vmax=1.2, imax=0.6)
    sol = _solve(f, sc, conf="NS-C", tol=SENS_TOL)
    per_cone = ex.current_sensitivities(sol)
    assert set(per_cone) == {("imax_b", 1), ("imax_t", 1)}
    assert ex.dual_diagnostics(sol)["current"] == pytest.approx(max(per_cone.values()))

    def of(imax_sq):
        g = f.replace(imax=np.array([np.nan, imax_sq]))
        return _solve(g, sc, conf="NS-C", tol=SENS_TOL).objective

    # the rating enters both end cones, so their sensitivities add up
    fd = central_difference(of, 0.36, 1e-4)
    assert sum(per_cone.values()) == pytest.approx(-fd, abs=1e-4)


def test_slack_bounds_have_zero_duals():
    f = simple_feeder([-1, 0], [0, 0.01 + 0.02j], imax=5.0, p_load=[0, 0.1], q_load=[0, 0.05])
    sol = _solve(f, fixed_scenario(f), conf="NS-C")
    d = ex.dual_diagnostics(sol)
    assert d["voltage"] == pytest.approx(0.0, abs=1e-7)
    assert d["current"] == pytest.approx(0.0, abs=1e-7)


def test_exact_solution_report():
    f, sc = _export_case()
    sol = _solve(f, sc, method="GAN")
    ref = _solve(f, sc)
    p, q = ex.setpoints(sol, f)
    lf = run_loadflow(f, p, q, b=np.zeros(2))
    rep = ex.classify(sol, violations(lf, f), ref.objective)
    assert rep.classification == ex.EXACT and rep.exact and rep.usable
    assert rep.gap_bound >= -1e-7
    assert "exact" in rep.summary()


def test_inexact_needs_reference():
    f, sc = _export_case()
    sol = _solve(f, sc, objective="q-target", q_ref=0.0)
    assert not ex.classify(sol, gap_bound=0.0).exact
    with pytest.raises(ex.ExactnessError):
        ex.classify(sol)


def test_gap_classes():
    f, sc = _export_case()
    sol = _solve(f, sc, objective="q-target", q_ref=0.0)
    assert ex.classify(sol, ropf_value=ex.true_objective(sol)).classification == ex.INEXACT_ZERO_GAP
    assert ex.classify(sol, gap_bound=1e-3).classification == ex.INEXACT_POSITIVE_GAP


def test_threshold_is_configurable():
    f, sc = _export_case()
    sol = _solve(f, sc, objective="q-target", q_ref=0.0)
    rho = ex.residuals(sol, f).max()
    assert ex.classify(sol, gap_bound=0.0, threshold=rho * 2).exact


def test_loadflow_gap_bound_of_exact_relaxation():
    f, sc = _export_case()
    sol = _solve(f, sc)
    p, q = ex.setpoints(sol, f)
    lf = run_loadflow(f, p, q, b=np.zeros(2))
    gap = ex.loadflow_gap_bound(sol, lf, violations(lf, f))
    assert abs(gap) < 1e-6
