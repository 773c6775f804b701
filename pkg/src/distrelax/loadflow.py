"""Backward/forward sweep load flow on the branch-flow equations.

Given fixed withdrawals the sweep alternates

* backward: ``S^b = s + sum S^t(children)``, ``f = |S^b - j v b|^2 / v`` and
  ``S^t = S^b + z f - j (v_up + v) b`` from the leaves towards the root;
* forward: ``v = v_up - 2 Re(z* (S^t + j v_up b)) + |z|^2 f`` from the root.

At a fixed point all four branch-flow equation families hold, including
``v_up f = |S^t + j v_up b|^2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import Feeder

LF_TOL = 1e-8
LF_MAX_ITER = 100
USABLE_TOL = 1e-2


@dataclass(frozen=True)
class LoadFlowResult:
    """Sweep output; arrays indexed by bus/line, entry 0 is the root."""

    v: np.ndarray
    f: np.ndarray
    Pt: np.ndarray
    Qt: np.ndarray
    Pb: np.ndarray
    Qb: np.ndarray
    converged: bool
    iterations: int
    residual: float
    collapsed: bool = False
    import_p: float = 0.0
    import_q: float = 0.0


def branch_flow_residuals(feeder: Feeder, v, f, Pt, Qt, Pb, Qb, p, q, b=None) -> np.ndarray:
    """Absolute residual of every branch-flow equation, stacked per family.

    Returns an array of shape ``(6, n)``: bus-end P/Q balance, line-start P/Q
    balance, voltage drop and the squared-current equality.
    """
    n = feeder.n
    b = np.zeros(n + 1) if b is None else np.asarray(b)
    up = feeder.up
    vv = np.array(v, dtype=float)
    vv[0] = feeder.v0
    child_P = np.zeros(n + 1)
    child_Q = np.zeros(n + 1)
    np.add.at(child_P, up[1:], Pt[1:])
    np.add.at(child_Q, up[1:], Qt[1:])
    L = slice(1, None)
    r, x = feeder.r[L], feeder.x[L]
    vu = vv[up[L]]
    out = np.empty((6, n))
    out[0] = Pb[L] - p[L] - child_P[L]
    out[1] = Qb[L] - q[L] - child_Q[L]
    out[2] = Pt[L] - Pb[L] - r * f[L]
    out[3] = Qt[L] - Qb[L] - x * f[L] + b[L] * (vu + vv[L])
    out[4] = vv[L] - vu + 2 * (r * Pt[L] + x * (Qt[L] + b[L] * vu)) - (r * r + x * x) * f[L]
    out[5] = vu * f[L] - Pt[L] ** 2 - (Qt[L] + b[L] * vu) ** 2
    return np.abs(out)


def run_loadflow(feeder: Feeder, p, q, b=None, v_init=None, tol: float = LF_TOL,
                 max_iter: int = LF_MAX_ITER) -> LoadFlowResult:
    """Solve the branch-flow equations for fixed withdrawals ``p + jq``.

    ``b`` overrides the feeder's line shunts (pass zeros to model a
    configuration without shunts). ``v_init`` replaces the flat start.
    Non-convergence and voltage collapse are reported in the result.
    """
    n = feeder.n
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    b = np.array(feeder.b) if b is None else np.asarray(b, dtype=float)
    up, r, x = feeder.up, feeder.r, feeder.x
    z2 = r * r + x * x
    v = np.full(n + 1, feeder.v0) if v_init is None else np.array(v_init, dtype=float)
    v[0] = feeder.v0
    converged = collapsed = False
    it = 0
    for it in range(1, max_iter + 1):
        Pt, Qt, Pb, Qb, f = _backward(feeder, p, q, b, v)
        v_new = v.copy()
        for l in range(1, n + 1):
            vu = v_new[up[l]]
            v_new[l] = vu - 2 * (r[l] * Pt[l] + x[l] * (Qt[l] + b[l] * vu)) + z2[l] * f[l]
        if np.any(v_new[1:] <= 0) or not np.all(np.isfinite(v_new)):
            collapsed = True
            v = v_new
            break
        step = np.max(np.abs(v_new - v)) if n else 0.0
        v = v_new
        if step < tol:
            converged = True
            break
    if converged:
        # flows consistent with the final voltages
        Pt, Qt, Pb, Qb, f = _backward(feeder, p, q, b, v)
    res = branch_flow_residuals(feeder, v, f, Pt, Qt, Pb, Qb, p, q, b)
    roots = up == 0
    return LoadFlowResult(v=v, f=f, Pt=Pt, Qt=Qt, Pb=Pb, Qb=Qb, converged=converged, iterations=it,
                          residual=float(res.max()) if res.size else 0.0, collapsed=collapsed,
                          import_p=float(Pt[roots].sum()), import_q=float(Qt[roots].sum()))


def _backward(feeder: Feeder, p, q, b, v):
    n = feeder.n
    up, r, x = feeder.up, feeder.r, feeder.x
    Pt, Qt, Pb, Qb, f = (np.zeros(n + 1) for _ in range(5))
    child_P = np.zeros(n + 1)
    child_Q = np.zeros(n + 1)
    for l in range(n, 0, -1):
        Pb[l] = p[l] + child_P[l]
        Qb[l] = q[l] + child_Q[l]
        f[l] = (Pb[l] ** 2 + (Qb[l] - v[l] * b[l]) ** 2) / v[l]
        Pt[l] = Pb[l] + r[l] * f[l]
        Qt[l] = Qb[l] + x[l] * f[l] - b[l] * (v[up[l]] + v[l])
        child_P[up[l]] += Pt[l]
        child_Q[up[l]] += Qt[l]
    return Pt, Qt, Pb, Qb, f


@dataclass(frozen=True)
class ViolationReport:
    """Bound violations of a load flow in magnitude (square-rooted) units."""

    voltage: float
    current: float
    worst_voltage_bus: int | None
    worst_current_line: int | None
    threshold: float = USABLE_TOL

    @property
    def usable(self) -> bool:
        return self.voltage < self.threshold and self.current < self.threshold


def violations(result: LoadFlowResult, feeder: Feeder, current_bounds: bool = True,
               threshold: float = USABLE_TOL) -> ViolationReport:
    """Largest voltage and current bound violations of a load flow.

    Voltage violations count both bounds; current violations compare the
    series current magnitude with the line rating where one is set.
    """
    if not result.converged:
        raise ValueError("violations need a converged load flow")
    vm = np.sqrt(result.v[1:])
    over = np.maximum(vm - np.sqrt(feeder.vmax[1:]), np.sqrt(feeder.vmin[1:]) - vm)
    v_viol, v_bus = _worst(over)
    c_viol, c_line = 0.0, None
    if current_bounds:
        rated = ~np.isnan(feeder.imax[1:])
        excess = np.where(rated, np.sqrt(result.f[1:]) - np.sqrt(np.where(rated, feeder.imax[1:], 0.0)), 0.0)
        c_viol, c_line = _worst(excess)
    return ViolationReport(v_viol, c_viol, v_bus, c_line, threshold)


def _worst(excess):
    if excess.size == 0:
        return 0.0, None
    k = int(np.argmax(excess))
    return (float(excess[k]), k + 1) if excess[k] > 0 else (0.0, None)
