"""Cone algebra for products of nonnegative orthants and second-order cones.

Vectors are laid out as ``[nonneg | soc_1 | soc_2 | ...]``. Second-order
blocks of equal size are processed together as 2-D arrays, which keeps the
per-iteration cost of the interior-point method independent of Python loops
over individual cones.
"""

from __future__ import annotations

import numpy as np


class ConeLayout:
    """Partition of a vector into a nonnegative part and SOC blocks."""

    def __init__(self, nonneg: int, soc_sizes):
        self.nonneg = int(nonneg)
        self.soc_sizes = [int(k) for k in soc_sizes]
        if any(k < 1 for k in self.soc_sizes):
            raise ValueError("second-order cone blocks need at least one entry")
        self.dim = self.nonneg + sum(self.soc_sizes)
        self.degree = self.nonneg + len(self.soc_sizes)

        offsets = self.nonneg + np.concatenate(([0], np.cumsum(self.soc_sizes)[:-1])).astype(int) \
            if self.soc_sizes else np.zeros(0, dtype=int)
        self.soc_offsets = offsets
        # size -> (nblocks, size) index array
        self.groups: dict[int, np.ndarray] = {}
        for k in sorted(set(self.soc_sizes)):
            starts = np.array([o for o, kk in zip(offsets, self.soc_sizes) if kk == k], dtype=int)
            self.groups[k] = starts[:, None] + np.arange(k)[None, :]
        self.heads = np.array(offsets, dtype=int)

    def identity(self) -> np.ndarray:
        e = np.zeros(self.dim)
        e[: self.nonneg] = 1.0
        e[self.heads] = 1.0
        return e

    def blocks(self, u):
        """Yield ``(index_array, u[index_array])`` for every SOC size group."""
        for idx in self.groups.values():
            yield idx, u[idx]

    def contains(self, u, tol: float = 0.0) -> bool:
        if self.nonneg and np.min(u[: self.nonneg]) < -tol:
            return False
        for _, U in self.blocks(u):
            if np.any(U[:, 0] - np.linalg.norm(U[:, 1:], axis=1) < -tol):
                return False
        return True

    def margin(self, u) -> float:
        """Smallest ``alpha`` such that ``u + alpha * e`` lies in the cone."""
        vals = [-np.inf]
        if self.nonneg:
            vals.append(-np.min(u[: self.nonneg]))
        for _, U in self.blocks(u):
            vals.append(np.max(np.linalg.norm(U[:, 1:], axis=1) - U[:, 0]))
        return float(max(vals))

    def product(self, u, v) -> np.ndarray:
        """Jordan product ``u o v``."""
        out = np.empty(self.dim)
        n = self.nonneg
        out[:n] = u[:n] * v[:n]
        for idx in self.groups.values():
            U, V = u[idx], v[idx]
            res = np.empty_like(U)
            res[:, 0] = np.sum(U * V, axis=1)
            res[:, 1:] = U[:, :1] * V[:, 1:] + V[:, :1] * U[:, 1:]
            out[idx] = res
        return out

    def divide(self, lam, d) -> np.ndarray:
        """Solve ``lam o x = d`` for ``x`` (``lam`` in the cone interior)."""
        out = np.empty(self.dim)
        n = self.nonneg
        out[:n] = d[:n] / lam[:n]
        for idx in self.groups.values():
            L, D = lam[idx], d[idx]
            l0 = L[:, 0]
            det = l0 ** 2 - np.sum(L[:, 1:] ** 2, axis=1)
            x0 = (l0 * D[:, 0] - np.sum(L[:, 1:] * D[:, 1:], axis=1)) / det
            res = np.empty_like(L)
            res[:, 0] = x0
            res[:, 1:] = (D[:, 1:] - x0[:, None] * L[:, 1:]) / l0[:, None]
            out[idx] = res
        return out

    def max_step(self, u, d) -> float:
        """Largest ``alpha >= 0`` with ``u + alpha * d`` in the cone (``u`` interior)."""
        alpha = np.inf
        n = self.nonneg
        if n:
            neg = d[:n] < 0
            if np.any(neg):
                alpha = min(alpha, float(np.min(-u[:n][neg] / d[:n][neg])))
        for idx in self.groups.values():
            U, D = u[idx], d[idx]
            ujv = U[:, 0] ** 2 - np.sum(U[:, 1:] ** 2, axis=1)
            nrm = np.sqrt(np.maximum(ujv, 1e-300))
            Ub = U / nrm[:, None]
            rho0 = Ub[:, 0] * D[:, 0] - np.sum(Ub[:, 1:] * D[:, 1:], axis=1)
            coef = np.sum(Ub[:, 1:] * D[:, 1:], axis=1) / (1.0 + Ub[:, 0])
            rho1 = D[:, 1:] - D[:, :1] * Ub[:, 1:] + coef[:, None] * Ub[:, 1:]
            denom = (np.linalg.norm(rho1, axis=1) - rho0) / nrm
            pos = denom > 0
            if np.any(pos):
                alpha = min(alpha, float(np.min(1.0 / denom[pos])))
        return alpha


class NTScaling:
    """Nesterov-Todd scaling ``W`` with ``W z = W^{-1} s = lambda``.

    ``W`` is symmetric for both cone types, so ``W^T`` is never formed.
    """

    def __init__(self, layout: ConeLayout, s, z):
        self.layout = layout
        n = layout.nonneg
        self.d = np.sqrt(s[:n] / z[:n])
        self.eta = {}
        self.w = {}
        for k, idx in layout.groups.items():
            S, Z = s[idx], z[idx]
            sjs = S[:, 0] ** 2 - np.sum(S[:, 1:] ** 2, axis=1)
            zjz = Z[:, 0] ** 2 - np.sum(Z[:, 1:] ** 2, axis=1)
            if np.any(sjs <= 0) or np.any(zjz <= 0):
                raise FloatingPointError("iterate left the cone interior")
            Sb = S / np.sqrt(sjs)[:, None]
            Zb = Z / np.sqrt(zjz)[:, None]
            gamma = np.sqrt((1.0 + np.sum(Sb * Zb, axis=1)) / 2.0)
            W = Sb.copy()
            W[:, 0] += Zb[:, 0]
            W[:, 1:] -= Zb[:, 1:]
            W /= (2.0 * gamma)[:, None]
            self.w[k] = W
            self.eta[k] = (sjs / zjz) ** 0.25
        self.lam = self.apply(z)

    def _apply(self, v, inverse: bool, power: int = 1):
        out = np.empty_like(v)
        n = self.layout.nonneg
        dd = 1.0 / self.d if inverse else self.d
        if v.ndim == 1:
            out[:n] = dd ** power * v[:n]
        else:
            out[:n] = (dd ** power)[:, None] * v[:n]
        for k, idx in self.layout.groups.items():
            W, eta = self.w[k], self.eta[k]
            V = v[idx]  # (nb, k) or (nb, k, ncols)
            for _ in range(power):
                V = _lorentz(W, V, inverse)
                scale = 1.0 / eta if inverse else eta
                V = V * (scale[:, None] if V.ndim == 2 else scale[:, None, None])
            out[idx] = V
        return out

    def apply(self, v):
        return self._apply(v, inverse=False)

    def apply_inv(self, v):
        return self._apply(v, inverse=True)

    def apply_sq(self, v):
        return self._apply(v, inverse=False, power=2)

    def apply_inv_sq(self, v):
        return self._apply(v, inverse=True, power=2)

    def inverse_blocks(self):
        """Dense ``W^{-1}`` blocks: ``(diag for nonneg, {size: (nb, k, k)})``."""
        mats = {}
        for k, W in self.w.items():
            w0, w1 = W[:, 0], W[:, 1:]
            nb = W.shape[0]
            M = np.zeros((nb, k, k))
            M[:, 0, 0] = w0
            M[:, 0, 1:] = -w1
            M[:, 1:, 0] = -w1
            M[:, 1:, 1:] = np.eye(k - 1)[None] + w1[:, :, None] * w1[:, None, :] / (1.0 + w0)[:, None, None]
            mats[k] = M / self.eta[k][:, None, None]
        return 1.0 / self.d, mats


def _lorentz(W, V, inverse):
    """Apply the unit-determinant hyperbolic factor of an NT block."""
    w0, w1 = W[:, 0], W[:, 1:]
    sign = -1.0 if inverse else 1.0
    if V.ndim == 2:
        v0, v1 = V[:, 0], V[:, 1:]
        dot = np.sum(w1 * v1, axis=1)
        out = np.empty_like(V)
        out[:, 0] = w0 * v0 + sign * dot
        out[:, 1:] = v1 + (dot / (1.0 + w0) + sign * v0)[:, None] * w1
        return out
    v0, v1 = V[:, 0, :], V[:, 1:, :]
    dot = np.einsum("bi,bij->bj", w1, v1)
    out = np.empty_like(V)
    out[:, 0, :] = w0[:, None] * v0 + sign * dot
    out[:, 1:, :] = v1 + w1[:, :, None] * (dot / (1.0 + w0)[:, None] + sign * v0)[:, None, :]
    return out


def rotated_to_standard(k: int) -> np.ndarray:
    """Orthogonal, involutory map sending ``2 u v >= |w|^2`` to ``t >= |r|``.

    For ``(u, v, w)`` the image is ``((u+v)/sqrt2, (u-v)/sqrt2, w)``.
    """
    if k < 2:
        raise ValueError("rotated cone blocks need at least two entries")
    T = np.eye(k)
    r = 1.0 / np.sqrt(2.0)
    T[:2, :2] = [[r, r], [r, -r]]
    return T
