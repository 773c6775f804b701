"""Primal-dual interior-point method on the homogeneous self-dual embedding.

Nesterov-Todd scaling with a Mehrotra predictor-corrector, in the form used
by CVXOPT's ``conelp`` and ECOS. Each Newton system is reduced to the
normal-equations KKT matrix ``[[G'W^-2 G, A'], [A, 0]]``, factored densely
once per iteration and solved with iterative refinement against the
unreduced system.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .cones import ConeLayout, NTScaling, rotated_to_standard
from .standard_form import StandardFormProgram

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL_LIMIT = "numerical-limit"

STEP_FRACTION = 0.99
REFINEMENT_STEPS = 3
KKT_REG = 1e-11


@dataclass(frozen=True)
class ConicSolution:
    """Result of one solve.

    On ``optimal`` the vectors are the primal-dual optimum. On
    ``infeasible`` ``y``/``z`` hold a Farkas certificate normalised to
    ``b'y + h'z = -1``; on ``unbounded`` ``x``/``s`` hold an improving ray
    normalised to ``c'x = -1``.
    """

    status: str
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    s: np.ndarray
    primal_objective: float
    dual_objective: float
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int

    @property
    def relative_gap(self) -> float:
        return abs(self.primal_objective - self.dual_objective) / (1.0 + abs(self.primal_objective))


class _Data:
    """Solver-internal data: rotated cones mapped to standard SOCs, A presolved."""

    def __init__(self, prog: StandardFormProgram):
        self.prog = prog
        self.layout = ConeLayout(prog.nonneg, list(prog.soc) + list(prog.rsoc))
        G = prog.G.tolil(copy=True) if prog.rsoc else prog.G
        h = prog.h.copy()
        self.rot_blocks = []
        pos = prog.nonneg + sum(prog.soc)
        if prog.rsoc:
            G = sp.lil_matrix(G)
            for k in prog.rsoc:
                T = rotated_to_standard(k)[:2, :2]
                rows = G[pos:pos + 2].toarray()
                G[pos:pos + 2] = T @ rows
                h[pos:pos + 2] = T @ h[pos:pos + 2]
                self.rot_blocks.append(pos)
                pos += k
        self.G = sp.csr_matrix(G)
        self.h = h
        self.c = prog.c
        self.keep, self.A, self.b, self.inconsistent = _presolve_equalities(prog.A, prog.b)

        # sparse pattern of the block-diagonal W^{-1}
        lay = self.layout
        rows = [np.arange(lay.nonneg)]
        cols = [np.arange(lay.nonneg)]
        for idx in lay.groups.values():
            k = idx.shape[1]
            rows.append(np.repeat(idx, k, axis=1).ravel())
            cols.append(np.tile(idx, (1, k)).ravel())
        self.w_rows = np.concatenate(rows)
        self.w_cols = np.concatenate(cols)

    def unrotate(self, v):
        out = v.copy()
        r = 1.0 / np.sqrt(2.0)
        for pos in self.rot_blocks:
            a, b = v[pos], v[pos + 1]
            out[pos], out[pos + 1] = r * (a + b), r * (a - b)
        return out


def _presolve_equalities(A: sp.csr_matrix, b: np.ndarray):
    """Drop zero, duplicate and linearly dependent rows of ``A x = b``.

    Returns ``(kept_row_indices, A_kept, b_kept, certificate_or_None)``; the
    certificate ``y`` (``A'y = 0``, ``b'y = -1``) is set when the dropped rows
    are inconsistent with the kept ones.
    """
    p, n = A.shape
    if p == 0:
        return np.zeros(0, dtype=int), A, b, None
    Ad = A.toarray()
    # pivoted QR of A' exposes an independent row subset
    _, R, piv = la.qr(Ad.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R)) if R.size else np.zeros(0)
    tol = max(Ad.shape) * np.finfo(float).eps * (diag[0] if diag.size else 0.0) * 1e3
    rank = int(np.sum(diag > tol))
    keep = np.sort(piv[:rank])
    cert = None
    if rank < p:
        # the least-squares residual is orthogonal to range(A): A'r = 0, b'r = |r|^2
        xls, *_ = np.linalg.lstsq(Ad, b, rcond=None)
        r = b - Ad @ xls
        if np.linalg.norm(r) > 1e-9 * (1.0 + np.linalg.norm(b)):
            cert = -r / (r @ r)
    return keep, sp.csr_matrix(Ad[keep]), b[keep], cert


class _KKT:
    """Factorisation of the scaled KKT system for one iteration."""

    def __init__(self, data: _Data, W: NTScaling):
        self.data, self.W = data, W
        n, p = len(data.c), data.A.shape[0]
        dinv, mats = W.inverse_blocks()
        vals = np.concatenate([dinv] + [M.ravel() for M in mats.values()])
        m = data.layout.dim
        Winv = sp.csr_matrix((vals, (data.w_rows, data.w_cols)), shape=(m, m))
        Gs = Winv @ data.G
        H = (Gs.T @ Gs).toarray()
        K = np.zeros((n + p, n + p))
        K[:n, :n] = H + KKT_REG * np.eye(n)
        if p:
            Ad = data.A.toarray()
            K[:n, n:] = Ad.T
            K[n:, :n] = Ad
            K[n:, n:] = -KKT_REG * np.eye(p)
        self.n, self.p = n, p
        self.lu = la.lu_factor(K, check_finite=False)

    def _reduced(self, r1, r2, r3):
        d, W = self.data, self.W
        rhs = np.concatenate([r1 + d.G.T @ W.apply_inv_sq(r3), r2])
        sol = la.lu_solve(self.lu, rhs, check_finite=False)
        dx, dy = sol[: self.n], sol[self.n:]
        dz = W.apply_inv_sq(d.G @ dx - r3)
        return dx, dy, dz

    def solve(self, r1, r2, r3):
        """Solve ``[[0, A', G'], [A, 0, 0], [G, 0, -W^2]] (x, y, z) = (r1, r2, r3)``."""
        d, W = self.data, self.W
        x, y, z = self._reduced(r1, r2, r3)
        for _ in range(REFINEMENT_STEPS):
            e1 = r1 - d.A.T @ y - d.G.T @ z
            e2 = r2 - d.A @ x
            e3 = r3 - d.G @ x + W.apply_sq(z)
            scale = 1.0 + max(np.abs(r1).max(initial=0), np.abs(r2).max(initial=0), np.abs(r3).max(initial=0))
            err = max(np.abs(e1).max(initial=0), np.abs(e2).max(initial=0), np.abs(e3).max(initial=0))
            if err <= 1e-14 * scale:
                break
            cx, cy, cz = self._reduced(e1, e2, e3)
            x, y, z = x + cx, y + cy, z + cz
        return x, y, z


def _norm_inf(*vs) -> float:
    return max((float(np.max(np.abs(v))) if v.size else 0.0) for v in vs)


def solve(program: StandardFormProgram, feas_tol: float = 1e-8, gap_tol: float = 1e-8,
          max_iter: int = 200, debug: bool = False) -> ConicSolution:
    """Solve a standard-form conic program.

    ``optimal`` is returned only when the relative primal residual, the
    relative dual residual and the relative duality gap are all certified
    below tolerance; otherwise an infeasibility/unboundedness certificate or
    ``numerical-limit``.
    """
    if feas_tol <= 0 or gap_tol <= 0 or max_iter < 1:
        raise ValueError("tolerances must be positive and max_iter >= 1")
    data = _Data(program)
    n, m = program.n, data.layout.dim
    p = data.A.shape[0]
    P = len(program.b)
    c, A, b, G, h = data.c, data.A, data.b, data.G, data.h
    lay = data.layout

    def finish(status, x, y, z, s, it, pres=np.nan, dres=np.nan):
        y_full = np.zeros(P)
        y_full[data.keep] = y
        z_out, s_out = data.unrotate(z), data.unrotate(s)
        pobj = float(c @ x + program.c0)
        dobj = float(-b @ y - h @ z + program.c0)
        gap = float(s @ z)
        return ConicSolution(status, x, y_full, z_out, s_out, pobj, dobj, float(pres), float(dres), gap, it)

    if data.inconsistent is not None:
        y = data.inconsistent
        return ConicSolution(INFEASIBLE, np.zeros(n), y, np.zeros(len(program.h)), np.zeros(len(program.h)),
                             np.nan, np.nan, np.nan, np.nan, np.nan, 0)

    bh_scale = 1.0 + max(_norm_inf(b), _norm_inf(h))
    c_scale = 1.0 + _norm_inf(c)
    e = lay.identity()

    # initial point: least-squares primal/dual starts shifted into the cone
    W0 = NTScaling(lay, e, e)
    kkt = _KKT(data, W0)
    x, y, zz = kkt.solve(np.zeros(n), b, h)
    s = -zz
    _, y_d, z = kkt.solve(-c, np.zeros(p), np.zeros(m))
    y = y_d
    ap = lay.margin(s)
    if ap >= 0:
        s = s + (1.0 + ap) * e
    ad = lay.margin(z)
    if ad >= 0:
        z = z + (1.0 + ad) * e
    tau, kappa = 1.0, 1.0

    status = NUMERICAL_LIMIT
    pres = dres = np.nan
    it = 0
    for it in range(max_iter + 1):
        rx = A.T @ y + G.T @ z + c * tau
        ry = -(A @ x) + b * tau
        rz = h * tau - G @ x - s
        rt = -(c @ x) - b @ y - h @ z - kappa
        sz = float(s @ z)
        mu = (sz + kappa * tau) / (lay.degree + 1)

        if debug:
            # HSD weak duality: s'z + kappa tau equals minus the residual pairing
            lhs = x @ rx + y @ ry + z @ rz + tau * rt
            assert sz >= 0 and kappa * tau >= 0
            assert abs(lhs + sz + kappa * tau) <= 1e-6 * (1.0 + sz + kappa * tau + abs(lhs)), "HSD identity broken"

        pcost = float(c @ x) / tau
        dcost = float(-b @ y - h @ z) / tau
        pres = _norm_inf(ry, rz) / tau / bh_scale
        dres = _norm_inf(rx) / tau / c_scale
        relgap = abs(pcost - dcost) / (1.0 + abs(pcost))
        compl = sz / tau ** 2 / (1.0 + abs(pcost))
        log.debug("it %3d pcost %+.9e dcost %+.9e pres %.2e dres %.2e gap %.2e tau %.2e kap %.2e",
                  it, pcost, dcost, pres, dres, relgap, tau, kappa)
        if pres <= feas_tol and dres <= feas_tol and relgap <= gap_tol and compl <= gap_tol:
            return finish(OPTIMAL, x / tau, y / tau, z / tau, s / tau, it, pres, dres)
        bz = float(b @ y + h @ z)
        if bz < 0:
            pinf = _norm_inf(A.T @ y + G.T @ z) / -bz
            if pinf <= feas_tol:
                sol = finish(INFEASIBLE, x, y / -bz, z / -bz, s / -bz, it, pres, dres)
                return sol
        cx = float(c @ x)
        if cx < 0:
            dinf = _norm_inf(A @ x, G @ x + s) / -cx
            if dinf <= feas_tol:
                return finish(UNBOUNDED, x / -cx, y, z, s / -cx, it, pres, dres)
        if it == max_iter:
            break

        try:
            W = NTScaling(lay, s, z)
            kkt = _KKT(data, W)
        except (FloatingPointError, la.LinAlgError, ValueError):
            log.debug("scaling/factorisation failed at iteration %d", it)
            break
        lam = W.lam
        x1, y1, z1 = kkt.solve(-c, b, h)
        denom_base = kappa / tau - (c @ x1 + b @ y1 + h @ z1)

        def direction(dx_, dy_, dz_, dt_, ds_, dk_):
            x2, y2, z2 = kkt.solve(dx_, -dy_, -dz_ - W.apply(lay.divide(lam, ds_)))
            dtau = (dt_ + dk_ / tau + c @ x2 + b @ y2 + h @ z2) / denom_base
            ddx, ddy, ddz = x2 + dtau * x1, y2 + dtau * y1, z2 + dtau * z1
            # from the linearised primal equation, which stays accurate under extreme scaling
            dds = -dz_ + dtau * h - G @ ddx
            dkap = (dk_ - kappa * dtau) / tau
            return ddx, ddy, ddz, dds, dtau, dkap

        def step_length(ds, dz, dtau, dkap):
            a = min(lay.max_step(s, ds), lay.max_step(z, dz))
            if dtau < 0:
                a = min(a, -tau / dtau)
            if dkap < 0:
                a = min(a, -kappa / dkap)
            return a

        # predictor
        aff = direction(-rx, -ry, -rz, -rt, -lay.product(lam, lam), -kappa * tau)
        a_aff = min(1.0, step_length(aff[3], aff[2], aff[4], aff[5]))
        sigma = (1.0 - a_aff) ** 3
        # corrector
        ds_corr = -lay.product(lam, lam) - lay.product(W.apply_inv(aff[3]), W.apply(aff[2])) + sigma * mu * e
        dk_corr = -kappa * tau - aff[5] * aff[4] + sigma * mu
        g = 1.0 - sigma
        dx, dy, dz, ds, dtau, dkap = direction(-g * rx, -g * ry, -g * rz, -g * rt, ds_corr, dk_corr)
        if not all(np.all(np.isfinite(v)) for v in (dx, dy, dz, ds)) or not np.isfinite(dtau):
            log.debug("non-finite direction at iteration %d", it)
            break
        alpha = min(1.0, STEP_FRACTION * step_length(ds, dz, dtau, dkap))
        if alpha < 1e-12:
            log.debug("step length collapsed at iteration %d", it)
            break
        x, y, z, s = x + alpha * dx, y + alpha * dy, z + alpha * dz, s + alpha * ds
        tau, kappa = tau + alpha * dtau, kappa + alpha * dkap

        # guard against drift out of the cone from rounding
        if not (lay.contains(s) and lay.contains(z)) or tau <= 0 or kappa <= 0:
            break

    return finish(NUMERICAL_LIMIT, x / max(tau, 1e-300), y / max(tau, 1e-300), z / max(tau, 1e-300),
                  s / max(tau, 1e-300), it, pres, dres)
