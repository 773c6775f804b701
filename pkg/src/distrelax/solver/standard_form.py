"""Standard conic form and its versioned text serialization.

The standard form is

    minimize    c'x + c0
    subject to  A x = b
                G x + s = h,   s in K

where ``K`` is a product of a nonnegative orthant, second-order cones
``t >= |r|`` and rotated second-order cones ``2 u v >= |w|^2, u, v >= 0``,
laid out in that order along ``s``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

FORMAT_NAME = "distrelax-standard-form"
FORMAT_VERSION = 1


class StandardFormError(ValueError):
    """Malformed or version-mismatched standard-form file."""


@dataclass
class StandardFormProgram:
    c: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    G: sp.csr_matrix
    h: np.ndarray
    nonneg: int
    soc: list[int] = field(default_factory=list)
    rsoc: list[int] = field(default_factory=list)
    c0: float = 0.0
    var_names: list[str] | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.h = np.asarray(self.h, dtype=float)
        self.A = sp.csr_matrix(self.A, shape=(len(self.b), len(self.c)), dtype=float)
        self.G = sp.csr_matrix(self.G, shape=(len(self.h), len(self.c)), dtype=float)
        if self.nonneg + sum(self.soc) + sum(self.rsoc) != len(self.h):
            raise ValueError("cone block sizes do not partition the slack vector")
        if any(k < 2 for k in self.rsoc):
            raise ValueError("rotated cone blocks need at least two entries")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.b)) and np.all(np.isfinite(self.h))):
            raise ValueError("program data must be finite")

    @property
    def n(self) -> int:
        return len(self.c)

    def objective(self, x) -> float:
        return float(self.c @ x + self.c0)

    def in_cone(self, s, tol: float = 0.0) -> bool:
        """Cone membership of a slack vector in this program's native layout."""
        l = self.nonneg
        if l and np.min(s[:l]) < -tol:
            return False
        pos = l
        for k in self.soc:
            blk = s[pos:pos + k]
            if blk[0] - np.linalg.norm(blk[1:]) < -tol:
                return False
            pos += k
        for k in self.rsoc:
            blk = s[pos:pos + k]
            if blk[0] < -tol or blk[1] < -tol or 2 * blk[0] * blk[1] - blk[2:] @ blk[2:] < -tol:
                return False
            pos += k
        return True


def _fmt(v: float) -> str:
    return repr(float(v))


def _write_sparse(lines, label, M: sp.csr_matrix):
    M = sp.coo_matrix(M)
    order = np.lexsort((M.col, M.row))
    lines.append(f"{label} {M.shape[0]} {M.shape[1]} {len(order)}")
    for k in order:
        lines.append(f"{int(M.row[k])} {int(M.col[k])} {_fmt(M.data[k])}")


def export_standard_form(program: StandardFormProgram, path) -> None:
    """Write ``program`` as versioned text with round-trip float precision."""
    lines = [f"{FORMAT_NAME} {FORMAT_VERSION}", f"n {program.n}"]
    lines.append("c " + " ".join(_fmt(v) for v in program.c))
    lines.append(f"c0 {_fmt(program.c0)}")
    _write_sparse(lines, "A", program.A)
    lines.append("b " + " ".join(_fmt(v) for v in program.b))
    _write_sparse(lines, "G", program.G)
    lines.append("h " + " ".join(_fmt(v) for v in program.h))
    lines.append(f"nonneg {program.nonneg}")
    lines.append("soc " + " ".join(str(k) for k in [len(program.soc), *program.soc]))
    lines.append("rsoc " + " ".join(str(k) for k in [len(program.rsoc), *program.rsoc]))
    if program.var_names is not None:
        lines.append(f"names {len(program.var_names)}")
        lines.extend(program.var_names)
    lines.append("end")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


class _Reader:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0

    def next(self, key: str | None = None) -> list[str]:
        if self.pos >= len(self.lines):
            raise StandardFormError(f"unexpected end of file (expected {key!r})")
        parts = self.lines[self.pos].split()
        self.pos += 1
        if key is not None and (not parts or parts[0] != key):
            raise StandardFormError(f"line {self.pos}: expected section {key!r}")
        return parts

    def raw(self) -> str:
        if self.pos >= len(self.lines):
            raise StandardFormError("unexpected end of file in names block")
        self.pos += 1
        return self.lines[self.pos - 1]

    def vector(self, key: str, size: int) -> np.ndarray:
        parts = self.next(key)
        if len(parts) - 1 != size:
            raise StandardFormError(f"line {self.pos}: {key} has {len(parts) - 1} entries, expected {size}")
        return np.array([float(v) for v in parts[1:]])

    def sparse(self, key: str, ncols: int) -> sp.csr_matrix:
        parts = self.next(key)
        nrows, nc, nnz = (int(v) for v in parts[1:4])
        if nc != ncols:
            raise StandardFormError(f"line {self.pos}: {key} has {nc} columns, expected {ncols}")
        rows, cols, vals = np.zeros(nnz, int), np.zeros(nnz, int), np.zeros(nnz)
        for k in range(nnz):
            i, j, v = self.next()
            rows[k], cols[k], vals[k] = int(i), int(j), float(v)
        return sp.csr_matrix((vals, (rows, cols)), shape=(nrows, ncols))


def import_standard_form(path) -> StandardFormProgram:
    text = Path(path).read_text(encoding="utf-8")
    rd = _Reader(text)
    try:
        header = rd.next()
        if len(header) != 2 or header[0] != FORMAT_NAME:
            raise StandardFormError("line 1: not a standard-form file")
        if int(header[1]) != FORMAT_VERSION:
            raise StandardFormError(f"line 1: unsupported format version {header[1]} (expected {FORMAT_VERSION})")
        n = int(rd.next("n")[1])
        c = rd.vector("c", n)
        c0 = float(rd.next("c0")[1])
        A = rd.sparse("A", n)
        b = rd.vector("b", A.shape[0])
        G = rd.sparse("G", n)
        h = rd.vector("h", G.shape[0])
        nonneg = int(rd.next("nonneg")[1])
        soc = [int(v) for v in rd.next("soc")[2:]]
        rsoc = [int(v) for v in rd.next("rsoc")[2:]]
        names = None
        parts = rd.next()
        if parts and parts[0] == "names":
            names = [rd.raw() for _ in range(int(parts[1]))]
            parts = rd.next()
        if parts != ["end"]:
            raise StandardFormError(f"line {rd.pos}: expected 'end'")
    except (IndexError, ValueError) as exc:
        if isinstance(exc, StandardFormError):
            raise
        raise StandardFormError(f"line {rd.pos}: {exc}") from exc
    return StandardFormProgram(c=c, A=A, b=b, G=G, h=h, nonneg=nonneg, soc=soc, rsoc=rsoc, c0=c0, var_names=names)
