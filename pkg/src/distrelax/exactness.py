"""Exactness classification of relaxed OPF solutions.

A solve is *exact* when every cone residual
``rho_l = v_up f_l - |S^t_l + j v_up b_l|^2`` is below a threshold, and
*usable* when the load flow driven by its withdrawal set-points respects
voltage and current bounds. The two flags are computed independently.

The relaxation gap of an augmented relaxation needs the optimum of the
non-convex OPF, which is not computed here; instead the report carries the
bound ``OF*(augmented) - OF*(plain relaxation)``, which is an upper bound on
the true gap and is zero whenever the true gap is.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .loadflow import LoadFlowResult, ViolationReport
from .network import Feeder
from .program import ModelSolution
from .solver import INFEASIBLE

EXACT_TOL = 1e-2
GAP_EPS = 1e-6

EXACT = "exact"
INEXACT_ZERO_GAP = "inexact-zero-gap"
INEXACT_POSITIVE_GAP = "inexact-positive-gap"
INFEASIBLE_CLASS = "infeasible"
UNSOLVED = "unsolved"
CLASSES = (EXACT, INEXACT_ZERO_GAP, INEXACT_POSITIVE_GAP, INFEASIBLE_CLASS, UNSOLVED)


class ExactnessError(ValueError):
    pass


def residuals(solution: ModelSolution, feeder: Feeder) -> np.ndarray:
    """Cone residual per line (entry 0 is zero)."""
    if not solution.optimal:
        raise ExactnessError(f"residuals need an optimal solution, got status {solution.status!r}")
    b = solution.program.meta.get("b", np.zeros(feeder.n + 1))
    v = np.array([feeder.v0] + [solution[("v", l)] for l in range(1, feeder.n + 1)])
    rho = np.zeros(feeder.n + 1)
    for l in range(1, feeder.n + 1):
        vu = v[feeder.up[l]]
        Pt, Qt = solution[("Pt", l)], solution[("Qt", l)]
        rho[l] = vu * solution[("f", l)] - Pt ** 2 - (Qt + vu * b[l]) ** 2
    return rho


def setpoints(solution: ModelSolution, feeder: Feeder):
    """Withdrawal set-points ``(p, q)`` of a solution, indexed by bus."""
    p = np.zeros(feeder.n + 1)
    q = np.zeros(feeder.n + 1)
    for l in range(1, feeder.n + 1):
        p[l] = solution[("p", l)]
        q[l] = solution[("q", l)]
    return p, q


def _row_duals(solution: ModelSolution, names):
    return [solution.dual(nm) for nm in names]


def dual_diagnostics(solution: ModelSolution) -> dict:
    """Largest multipliers per bound family.

    ``voltage``/``aux_voltage`` are the upper voltage bounds on the physical
    and the over-estimating voltages; ``current``/``aux_current`` are the
    sensitivities of the objective to the squared current ratings.
    """
    prog = solution.program
    fams = {
        "voltage": [nm for nm in prog.names_with_tag("voltage-bounds") if nm[0] == "vmax"],
        "aux_voltage": prog.names_with_tag("lossless-voltage-cap") + prog.names_with_tag("aux-voltage-cap"),
    }
    out = {k: max([0.0, *_row_duals(solution, names)]) for k, names in fams.items()}
    sens = current_sensitivities(solution)
    for key, tags in (("current", ("end-current-bounds",)),
                      ("aux_current", ("aux-current-bus-end", "aux-current-line-start"))):
        out[key] = max([0.0, *(v for nm, v in sens.items() if prog.constraint(nm).tag in tags)])
    return out


def current_sensitivities(solution: ModelSolution) -> dict:
    """``-d OF / d I^2`` per current-rating cone, keyed by constraint name.

    A line's rating appears in several cones; the sensitivity to the rating
    itself is the sum over them.
    """
    prog = solution.program
    tags = ("end-current-bounds", "aux-current-bus-end", "aux-current-line-start")
    return {nm: _rating_sensitivity(solution, nm) for tag in tags for nm in prog.names_with_tag(tag)}


def _rating_sensitivity(solution: ModelSolution, name) -> float:
    """``-d OF / d I`` for a current cone ``2 (I v / 2) * 1 >= P^2 + Q^2``."""
    con = solution.program.constraint(name)
    z_u = float(solution.dual(name)[0])
    voltage = solution.value(con.exprs[0]) / _rating(solution, name)
    return max(0.0, z_u * voltage / 2.0)


def _rating(solution: ModelSolution, name) -> float:
    feeder: Feeder = solution.program.meta["feeder"]
    return float(feeder.imax[name[1]]) / 2.0


@dataclass(frozen=True)
class ExactnessReport:
    status: str
    classification: str
    residuals: np.ndarray
    max_residual: float
    worst_line: int | None
    exact: bool
    usable: bool | None
    voltage_violation: float
    current_violation: float
    objective: float
    penalized_objective: float
    epsilon: float
    gap_bound: float
    max_voltage_dual: float
    max_current_dual: float
    threshold: float = EXACT_TOL
    gap_eps: float = GAP_EPS

    def summary(self) -> str:
        def fmt(v):
            return "n/a" if v is None or (isinstance(v, float) and np.isnan(v)) else f"{v:.6g}"
        worst = "-" if self.worst_line is None else self.worst_line
        lines = [
            f"status              {self.status}",
            f"classification      {self.classification}",
            f"max cone residual   {fmt(self.max_residual)} (line {worst}, threshold {self.threshold:g})",
            f"exact               {self.exact}",
            f"load flow usable    {self.usable}",
            f"voltage violation   {fmt(self.voltage_violation)}",
            f"current violation   {fmt(self.current_violation)}",
            f"objective           {fmt(self.objective)}",
            f"penalised objective {fmt(self.penalized_objective)} (epsilon {self.epsilon:g})",
            f"gap bound           {fmt(self.gap_bound)} (upper bound on the relaxation gap)",
            f"max voltage dual    {fmt(self.max_voltage_dual)}",
            f"max current dual    {fmt(self.max_current_dual)}",
        ]
        return "\n".join(lines)


def true_objective(solution: ModelSolution) -> float:
    """Objective without the current penalty."""
    expr = solution.program.meta.get("true_objective", solution.program.objective)
    return solution.value(expr)


def classify(solution: ModelSolution, loadflow_report: ViolationReport | None = None,
             ropf_value: float | None = None, *, gap_bound: float | None = None,
             threshold: float = EXACT_TOL, gap_eps: float = GAP_EPS) -> ExactnessReport:
    """Build the exactness report of one solve.

    ``ropf_value`` is the plain relaxation's optimum (without penalty); the
    gap bound is the true objective minus it. A precomputed ``gap_bound`` may
    be passed instead. Inexact solutions need one of the two.
    """
    meta = solution.program.meta
    feeder: Feeder = meta["feeder"]
    eps = float(meta.get("epsilon", 0.0))
    nan = float("nan")
    if not solution.optimal:
        cls = INFEASIBLE_CLASS if solution.status == INFEASIBLE else UNSOLVED
        return ExactnessReport(solution.status, cls, np.zeros(feeder.n + 1), nan, None, False, None, nan, nan,
                               nan, nan, eps, nan, nan, nan, threshold, gap_eps)
    rho = residuals(solution, feeder)
    k = int(np.argmax(rho[1:])) + 1 if feeder.n else None
    max_rho = float(rho[k]) if k else 0.0
    exact = max_rho < threshold
    obj = true_objective(solution)
    if gap_bound is None and ropf_value is not None:
        gap_bound = obj - ropf_value
    if exact:
        cls = EXACT
    elif gap_bound is None:
        raise ExactnessError("classifying an inexact solution needs the plain relaxation's optimum")
    else:
        cls = INEXACT_ZERO_GAP if gap_bound < gap_eps else INEXACT_POSITIVE_GAP
    duals = dual_diagnostics(solution)
    lf = loadflow_report
    return ExactnessReport(
        status=solution.status, classification=cls, residuals=rho, max_residual=max_rho,
        worst_line=k, exact=exact, usable=None if lf is None else lf.usable,
        voltage_violation=nan if lf is None else lf.voltage, current_violation=nan if lf is None else lf.current,
        objective=obj, penalized_objective=solution.objective, epsilon=eps,
        gap_bound=nan if gap_bound is None else float(gap_bound),
        max_voltage_dual=max(duals["voltage"], duals["aux_voltage"]),
        max_current_dual=max(duals["current"], duals["aux_current"]),
        threshold=threshold, gap_eps=gap_eps)


def loadflow_objective(solution: ModelSolution, lf: LoadFlowResult) -> float:
    """True objective evaluated at the load flow of a solution's set-points.

    Returns ``inf`` when the load flow breaks a constraint the objective
    depends on (a fixed reactive import).
    """
    config = solution.program.meta["config"]
    feeder: Feeder = solution.program.meta["feeder"]
    p, q = setpoints(solution, feeder)
    val = 0.0
    if config.cost_p is not None:
        val += float(np.dot(config.cost_p[1:], p[1:]))
    if config.cost_q is not None:
        val += float(np.dot(config.cost_q[1:], q[1:]))
    if config.objective == "q-target":
        return val + (lf.import_q - config.q_ref) ** 2
    if config.objective == "fixed-q" and abs(lf.import_q - config.q_value) > 1e-6:
        return float("inf")
    return val + lf.import_p


def loadflow_gap_bound(solution: ModelSolution, lf: LoadFlowResult, report: ViolationReport) -> float:
    """Gap bound of a plain relaxation from its own load flow.

    When the load flow is usable it is a near-feasible OPF point, so its
    objective minus the relaxed optimum bounds the gap; otherwise ``inf``.
    """
    if not (lf.converged and report.usable):
        return float("inf")
    return loadflow_objective(solution, lf) - true_objective(solution)
