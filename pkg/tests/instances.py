"""Random conic programs with known structure for solver tests.

Each instance is built from a primal point ``(x0, s0)`` and a dual point
``(y0, z0)`` chosen first, then data that makes them feasible:

``interior``       s0, z0 strictly inside the cone, so an optimum exists
``complementary``  s0, z0 on the boundary with ``s0'z0 = 0``, so ``x0`` is
                   optimal and the optimal value ``c'x0`` is known
``infeasible``     a Farkas certificate is planted: ``A'y + G'z = 0``,
                   ``z`` in the cone and ``b'y + h'z < 0``; the dual is
                   strictly feasible, so the primal is the infeasible side
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from distrelax.solver import StandardFormProgram


@dataclass
class Instance:
    kind: str
    program: StandardFormProgram
    optimum: float | None = None


def _blocks(rng):
    soc = [int(k) for k in rng.integers(2, 6, size=rng.integers(0, 4))]
    rsoc = [int(k) for k in rng.integers(3, 6, size=rng.integers(0, 3))]
    return soc, rsoc


def _interior_pair(rng, nonneg, soc, rsoc):
    s, z = [rng.uniform(0.1, 2.0, nonneg)], [rng.uniform(0.1, 2.0, nonneg)]
    for k in soc:
        for out in (s, z):
            r = rng.normal(size=k - 1)
            out.append(np.concatenate(([np.linalg.norm(r) + rng.uniform(0.1, 1.0)], r)))
    for k in rsoc:
        for out in (s, z):
            w = rng.normal(size=k - 2)
            u = rng.uniform(0.2, 2.0)
            out.append(np.concatenate(([u, w @ w / (2 * u) + rng.uniform(0.1, 1.0)], w)))
    return np.concatenate(s), np.concatenate(z)


def _complementary_pair(rng, nonneg, soc, rsoc):
    # orthant: one side zero per entry
    mask = rng.random(nonneg) < 0.5
    s = [np.where(mask, rng.uniform(0.1, 2.0, nonneg), 0.0)]
    z = [np.where(mask, 0.0, rng.uniform(0.1, 2.0, nonneg))]
    for k in soc:
        r = rng.normal(size=k - 1)
        t = np.linalg.norm(r)
        a = rng.uniform(0.2, 2.0)
        s.append(np.concatenate(([t], r)))
        z.append(a * np.concatenate(([t], -r)))
    for k in rsoc:
        w = rng.normal(size=k - 2)
        u = rng.uniform(0.2, 2.0)
        v = w @ w / (2 * u)
        a = rng.uniform(0.2, 2.0)
        s.append(np.concatenate(([u, v], w)))
        z.append(a * np.concatenate(([v, u], -w)))
    return np.concatenate(s), np.concatenate(z)


def random_instance(seed: int, kind: str, n: int = 20) -> Instance:
    rng = np.random.default_rng(seed)
    soc, rsoc = _blocks(rng)
    if kind == "infeasible":
        return _infeasible(rng, n, soc, rsoc)
    free = int(rng.integers(0, 8))
    # a box around x0 keeps the problem bounded
    nonneg = free + 2 * n
    m = nonneg + sum(soc) + sum(rsoc)
    p = int(rng.integers(0, n // 2))
    G = np.vstack([rng.normal(size=(free, n)), np.eye(n), -np.eye(n), rng.normal(size=(m - nonneg, n))])
    A = rng.normal(size=(p, n))
    if kind == "interior":
        s0, z0 = _interior_pair(rng, nonneg, soc, rsoc)
    elif kind == "complementary":
        s0, z0 = _complementary_pair(rng, nonneg, soc, rsoc)
    else:
        raise ValueError(kind)
    x0, y0 = rng.normal(size=n), rng.normal(size=p)
    prog = StandardFormProgram(c=-A.T @ y0 - G.T @ z0, A=A, b=A @ x0, G=G, h=G @ x0 + s0,
                               nonneg=nonneg, soc=soc, rsoc=rsoc)
    optimum = float(prog.c @ x0) if kind == "complementary" else None
    return Instance(kind, prog, optimum)


def _infeasible(rng, n, soc, rsoc):
    nonneg = int(rng.integers(1, 10))
    m = nonneg + sum(soc) + sum(rsoc)
    p = int(rng.integers(1, n // 2))
    _, z = _interior_pair(rng, nonneg, soc, rsoc)
    y = rng.normal(size=p)
    y[-1] = np.sign(y[-1]) * max(abs(y[-1]), 0.5)
    G = rng.normal(size=(m, n))
    A = rng.normal(size=(p, n))
    A[-1] = -(G.T @ z + A[:-1].T @ y[:-1]) / y[-1]
    h = rng.normal(size=m)
    b = rng.normal(size=p)
    b[-1] = (-1.0 - h @ z - b[:-1] @ y[:-1]) / y[-1]
    # a strictly feasible dual point rules out an unboundedness ray
    _, z_dual = _interior_pair(rng, nonneg, soc, rsoc)
    c = -A.T @ rng.normal(size=p) - G.T @ z_dual
    prog = StandardFormProgram(c=c, A=A, b=b, G=G, h=h, nonneg=nonneg, soc=soc, rsoc=rsoc)
    return Instance("infeasible", prog)


def in_cone(prog: StandardFormProgram, s, tol: float) -> bool:
    """Membership of ``s`` in the program's cone up to ``tol``."""
    k = prog.nonneg
    if np.any(s[:k] < -tol):
        return False
    for size in prog.soc:
        blk = s[k:k + size]
        if blk[0] - np.linalg.norm(blk[1:]) < -tol:
            return False
        k += size
    for size in prog.rsoc:
        u, v, w = s[k], s[k + 1], s[k + 2:k + size]
        if u < -tol or v < -tol or 2 * u * v - w @ w < -tol * (1 + u + v):
            return False
        k += size
    return True


def certificate_quality(prog: StandardFormProgram, sol):
    """Residuals of a returned optimum, computed from scratch."""
    x, y, z, s = sol.x, sol.y, sol.z, sol.s
    pres = max(np.linalg.norm(prog.A @ x - prog.b, np.inf) / (1 + np.linalg.norm(prog.b, np.inf)) if len(prog.b) else 0.0,
               np.linalg.norm(prog.G @ x + s - prog.h, np.inf) / (1 + np.linalg.norm(prog.h, np.inf)))
    pobj = prog.c @ x
    dobj = -prog.b @ y - prog.h @ z
    gap = abs(pobj - dobj) / (1 + abs(pobj))
    return pres, gap
