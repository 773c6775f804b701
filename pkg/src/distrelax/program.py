"""A small modelling layer: affine expressions, tagged conic constraints,
and the translation to the solver's standard form."""

from __future__ import annotations

from dataclasses import dataclass, field
from numbers import Real

import numpy as np
import scipy.sparse as sp

from .solver import OPTIMAL, ConicSolution, StandardFormProgram, solve


class Affine:
    """Sparse affine expression ``sum(coef * x[i]) + const``."""

    __slots__ = ("terms", "const")

    def __init__(self, terms=None, const=0.0):
        self.terms = dict(terms) if terms else {}
        self.const = float(const)

    @staticmethod
    def lift(v) -> "Affine":
        if isinstance(v, Affine):
            return v
        if isinstance(v, Real):
            return Affine(const=v)
        raise TypeError(f"cannot use {type(v).__name__} in an affine expression")

    def __add__(self, other):
        other = Affine.lift(other)
        out = Affine(self.terms, self.const + other.const)
        for k, v in other.terms.items():
            out.terms[k] = out.terms.get(k, 0.0) + v
        return out

    __radd__ = __add__

    def __neg__(self):
        return Affine({k: -v for k, v in self.terms.items()}, -self.const)

    def __sub__(self, other):
        return self + (-Affine.lift(other))

    def __rsub__(self, other):
        return Affine.lift(other) - self

    def __mul__(self, a):
        if not isinstance(a, Real):
            return NotImplemented
        a = float(a)
        return Affine({k: a * v for k, v in self.terms.items()}, a * self.const)

    __rmul__ = __mul__

    def __truediv__(self, a):
        return self * (1.0 / a)

    def value(self, x) -> float:
        return self.const + sum(v * x[k] for k, v in self.terms.items())

    def __repr__(self):
        return f"Affine({self.terms}, {self.const})"


def total(exprs) -> Affine:
    out = Affine()
    for e in exprs:
        out = out + e
    return out


@dataclass
class Constraint:
    """``eq``: e == 0; ``le``: e <= 0; ``soc``: e0 >= |e1..|; ``rsoc``: 2 e0 e1 >= |e2..|^2."""

    kind: str
    exprs: list
    tag: str
    name: tuple


@dataclass
class ConicProgram:
    """Linear objective with linear and second-order-cone constraints.

    Every constraint carries a ``tag`` naming the model equation it encodes
    and a unique ``name`` used to look up its dual.
    """

    var_names: list = field(default_factory=list)
    constraints: list = field(default_factory=list)
    objective: Affine = field(default_factory=Affine)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self._index = {nm: i for i, nm in enumerate(self.var_names)}
        self._cons = {c.name: i for i, c in enumerate(self.constraints)}

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    def add_var(self, name) -> Affine:
        if name in self._index:
            raise KeyError(f"duplicate variable {name!r}")
        self._index[name] = len(self.var_names)
        self.var_names.append(name)
        return Affine({self._index[name]: 1.0})

    def var(self, name) -> Affine:
        return Affine({self._index[name]: 1.0})

    def has_var(self, name) -> bool:
        return name in self._index

    def var_index(self, name) -> int:
        return self._index[name]

    def _add(self, kind, exprs, tag, name):
        if name in self._cons:
            raise KeyError(f"duplicate constraint {name!r}")
        exprs = [Affine.lift(e) for e in exprs]
        for e in exprs:
            for k in e.terms:
                if not 0 <= k < len(self.var_names):
                    raise IndexError(f"constraint {name!r} references unknown variable {k}")
        self._cons[name] = len(self.constraints)
        self.constraints.append(Constraint(kind, exprs, tag, name))

    def add_eq(self, lhs, rhs, tag: str, name):
        self._add("eq", [Affine.lift(lhs) - rhs], tag, name)

    def add_le(self, lhs, rhs, tag: str, name):
        self._add("le", [Affine.lift(lhs) - rhs], tag, name)

    def add_soc(self, t, parts, tag: str, name):
        self._add("soc", [t, *parts], tag, name)

    def add_rsoc(self, u, v, parts, tag: str, name):
        """``2 u v >= |parts|^2`` with ``u, v >= 0``."""
        self._add("rsoc", [u, v, *parts], tag, name)

    def constraint(self, name) -> Constraint:
        return self.constraints[self._cons[name]]

    def has_constraint(self, name) -> bool:
        return name in self._cons

    def tags(self) -> set:
        return {c.tag for c in self.constraints}

    def names_with_tag(self, tag: str) -> list:
        return [c.name for c in self.constraints if c.tag == tag]


@dataclass
class IndexMap:
    """Where each model constraint landed in the standard form."""

    rows: dict  # name -> ("A" | "G", start, count)


def to_standard_form(program: ConicProgram):
    """Translate to ``min c'x, Ax = b, Gx + s = h, s in K``.

    Model variables are the (free) standard-form variables. Inequalities get
    a nonnegative slack; each cone block becomes a slack block equal to the
    affine image, constrained to the cone.
    """
    n = program.n_vars
    eqs = [c for c in program.constraints if c.kind == "eq"]
    groups = {"le": [], "soc": [], "rsoc": []}
    for c in program.constraints:
        if c.kind != "eq":
            groups[c.kind].append(c)

    rows = {}
    Ar, Ac, Av, b = [], [], [], []
    for i, c in enumerate(eqs):
        e = c.exprs[0]
        for k, v in e.terms.items():
            Ar.append(i)
            Ac.append(k)
            Av.append(v)
        b.append(-e.const)
        rows[c.name] = ("A", i, 1)

    Gr, Gc, Gv, h = [], [], [], []
    row = 0
    soc, rsoc = [], []
    for kind in ("le", "soc", "rsoc"):
        for c in groups[kind]:
            start = row
            for e in c.exprs:
                sign = 1.0 if kind == "le" else -1.0
                for k, v in e.terms.items():
                    Gr.append(row)
                    Gc.append(k)
                    Gv.append(sign * v)
                h.append(-e.const if kind == "le" else e.const)
                row += 1
            rows[c.name] = ("G", start, row - start)
            if kind == "soc":
                soc.append(len(c.exprs))
            elif kind == "rsoc":
                rsoc.append(len(c.exprs))

    c_vec = np.zeros(n)
    for k, v in program.objective.terms.items():
        c_vec[k] += v
    A = sp.csr_matrix((Av, (Ar, Ac)), shape=(len(eqs), n))
    G = sp.csr_matrix((Gv, (Gr, Gc)), shape=(row, n))
    sf = StandardFormProgram(c=c_vec, A=A, b=np.array(b), G=G, h=np.array(h), nonneg=len(groups["le"]),
                             soc=soc, rsoc=rsoc, c0=program.objective.const,
                             var_names=[_name_str(nm) for nm in program.var_names])
    return sf, IndexMap(rows)


def _name_str(name) -> str:
    if isinstance(name, tuple):
        head, *rest = name
        return f"{head}[{','.join(str(r) for r in rest)}]"
    return str(name)


class ModelSolution:
    """Solver output mapped back onto model variables and constraints."""

    def __init__(self, program: ConicProgram, index: IndexMap, raw: ConicSolution):
        self.program = program
        self.index = index
        self.raw = raw
        self.status = raw.status
        self.x = raw.x

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    @property
    def objective(self) -> float:
        return self.raw.primal_objective if self.optimal else float("nan")

    def __getitem__(self, name) -> float:
        return float(self.x[self.program.var_index(name)])

    def get(self, name, default=0.0) -> float:
        return self[name] if self.program.has_var(name) else default

    def value(self, expr) -> float:
        return Affine.lift(expr).value(self.x)

    def dual(self, name):
        """Multiplier of a constraint (scalar for rows, vector for cones).

        For a row ``e <= 0`` the multiplier is ``-d OF / d(rhs)``, nonnegative.
        """
        part, start, count = self.index.rows[name]
        if part == "A":
            return float(self.raw.y[start])
        vals = self.raw.z[start:start + count]
        return float(vals[0]) if self.program.constraint(name).kind == "le" else np.array(vals)


def solve_program(program: ConicProgram, feas_tol: float = 1e-8, gap_tol: float = 1e-8,
                  max_iter: int = 200) -> ModelSolution:
    sf, index = to_standard_form(program)
    raw = solve(sf, feas_tol=feas_tol, gap_tol=gap_tol, max_iter=max_iter)
    return ModelSolution(program, index, raw)
