"""Finite matrix representations ("fuzzy spaces") built from shift subalgebras.

Builders return a :class:`FuzzyRep`: an ordered basis of lattice points, named
sparse complex matrices, and the relations the matrices are expected to
satisfy.  Boundary zeros that cut out a window are detected exactly; matrix
entries are double precision.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from . import funcspace as fs
from .algebra import AlgebraElement, AlgebraParams, involution, monomial
from .funcspace import FunctionExpr
from .lattice import fmt_rational, identity as int_identity
from .modules import basis_vector, discrete_act

DEFAULT_TOL = 1e-10
IRREDUCIBILITY_LIMIT = 500
DENSE_COMMUTANT_LIMIT = 40


class WindowError(ValueError):
    """No admissible window, or a window whose boundary zeros fail."""


class RelationError(ValueError):
    """Malformed relation text or unknown operator name."""


# -- sparse matrices ------------------------------------------------------------


class SparseComplexMatrix:
    """Square complex matrix stored as CSR; exported as row-major triplets."""

    __slots__ = ("csr",)

    def __init__(self, dim: int, triplets: Iterable = ()):
        rows, cols, vals = [], [], []
        for r, c, v in triplets:
            if not (0 <= r < dim and 0 <= c < dim):
                raise IndexError(f"entry ({r},{c}) outside dimension {dim}")
            rows.append(r)
            cols.append(c)
            vals.append(complex(v))
        m = sp.coo_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=(dim, dim))
        self.csr = m.tocsr()
        self.csr.sum_duplicates()
        self.csr.eliminate_zeros()

    @classmethod
    def from_matrix(cls, m) -> "SparseComplexMatrix":
        m = sp.csr_matrix(m, dtype=complex)
        out = cls.__new__(cls)
        m.sum_duplicates()
        m.eliminate_zeros()
        out.csr = m
        return out

    @property
    def dim(self) -> int:
        return self.csr.shape[0]

    @property
    def triplets(self) -> list:
        coo = self.csr.tocoo()
        items = sorted(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))
        return [(r, c, v.real, v.imag) for r, c, v in items]

    def toarray(self) -> np.ndarray:
        return self.csr.toarray()

    def to_json(self) -> dict:
        return {"dim": self.dim, "triplets": [[r, c, _num(re_), _num(im)] for r, c, re_, im in self.triplets]}

    @classmethod
    def from_json(cls, data: dict) -> "SparseComplexMatrix":
        return cls(data["dim"], ((r, c, complex(a, b)) for r, c, a, b in data["triplets"]))

    def __repr__(self):
        return f"SparseComplexMatrix(dim={self.dim}, nnz={self.csr.nnz})"


def _num(x: float) -> float | int:
    """Exact integers print without a trailing .0; everything else at 12 digits."""
    if float(x).is_integer() and abs(x) < 2**53:
        return int(x)
    return float(f"{x:.12g}")


# -- representations -----------------------------------------------------------------


@dataclass(frozen=True)
class Relation:
    name: str
    text: str
    informational: bool = False


@dataclass
class FuzzyRep:
    D: int
    basis: tuple
    hbar: Fraction | float
    delta: tuple
    operators: dict
    flagged: frozenset = frozenset()
    functions: dict = field(default_factory=dict)
    scalars: dict = field(default_factory=dict)
    relations: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.basis)) != len(self.basis):
            raise ValueError("basis entries must be distinct")
        for name, m in self.operators.items():
            if m.dim != len(self.basis):
                raise ValueError(f"operator {name} has dimension {m.dim}, basis has {len(self.basis)}")

    @property
    def dim(self) -> int:
        return len(self.basis)

    def index_of(self, k) -> int:
        return self.basis.index(tuple(k))

    def dense(self, name: str) -> np.ndarray:
        if name not in self.operators:
            raise RelationError(f"unknown operator {name!r}")
        return self.operators[name].toarray()

    def to_json(self) -> dict:
        def num(x):
            return fmt_rational(x) if isinstance(x, (int, Fraction)) else repr(float(x))

        return {
            "D": self.D,
            "hbar": num(self.hbar),
            "delta": [num(d) for d in self.delta],
            "basis": [list(k) for k in self.basis],
            "operators": {name: m.to_json() for name, m in self.operators.items()},
            "flagged": sorted(self.flagged),
            "functions": {k: fs.to_str(f) for k, f in self.functions.items()},
            "scalars": {k: num(v) for k, v in self.scalars.items()},
            "relations": [
                {"name": r.name, "text": r.text, "informational": r.informational} for r in self.relations
            ],
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, data: dict | str) -> "FuzzyRep":
        if isinstance(data, str):
            data = json.loads(data)

        def num(s):
            s = str(s)
            return Fraction(s) if re.fullmatch(r"-?\d+(/\d+)?", s) else float(s)

        D = int(data["D"])
        return cls(
            D=D,
            basis=tuple(tuple(k) for k in data["basis"]),
            hbar=num(data["hbar"]),
            delta=tuple(num(d) for d in data["delta"]),
            operators={k: SparseComplexMatrix.from_json(v) for k, v in data["operators"].items()},
            flagged=frozenset(data.get("flagged", ())),
            functions={k: fs.parse(v, D) for k, v in data.get("functions", {}).items()},
            scalars={k: num(v) for k, v in data.get("scalars", {}).items()},
            relations=[Relation(r["name"], r["text"], r.get("informational", False))
                       for r in data.get("relations", ())],
            meta=data.get("meta", {}),
        )


def matrix_of(a: AlgebraElement, basis: Sequence, delta, R=None) -> tuple:
    """Matrix of a on span(basis) via the discrete action; returns (matrix, leaked)."""
    basis = [tuple(k) for k in basis]
    pos = {k: i for i, k in enumerate(basis)}
    R = int_identity(a.params.D) if R is None else R
    trip = []
    leaked = 0
    for j, k in enumerate(basis):
        for t, v in discrete_act(a, basis_vector(k), R, delta):
            if v == 0:
                continue
            i = pos.get(t)
            if i is None:
                leaked += 1
            else:
                trip.append((i, j, v))
    return SparseComplexMatrix(len(basis), trip), leaked


def build_diag(g: FunctionExpr, rep: FuzzyRep) -> SparseComplexMatrix:
    """diag(g((k + delta) hbar)) over the basis."""
    if isinstance(g, str):
        g = fs.parse(g, rep.D)
    d = fs.dimension_of(g)
    if d is not None and d != rep.D:
        raise ValueError(f"function dimension {d} != representation dimension {rep.D}")
    h = rep.hbar
    vals = []
    for k in rep.basis:
        pt = tuple(h * (x + dl) for x, dl in zip(k, rep.delta))
        vals.append(fs.evaluate(g, pt))
    n = len(rep.basis)
    return SparseComplexMatrix(n, ((i, i, v) for i, v in enumerate(vals)))


# -- one dimensional windows ----------------------------------------------------------------


@dataclass(frozen=True)
class Window:
    M: int
    N: int
    delta: Fraction
    hbar: Fraction

    def __post_init__(self):
        if self.M > self.N:
            raise WindowError("window needs M <= N")

    @property
    def dim(self) -> int:
        return self.N - self.M + 1


@dataclass(frozen=True)
class WindowVerdict:
    """kind is 'finite', 'upper' (only N found), 'lower' (only M found) or 'none'."""

    kind: str
    M: int | None
    N: int | None
    delta: Fraction
    hbar: Fraction
    n_max: int

    @property
    def window(self) -> Window | None:
        if self.kind != "finite":
            return None
        return Window(self.M, self.N, self.delta, self.hbar)

    def require_finite(self) -> Window:
        if self.kind != "finite":
            raise WindowError(
                f"no finite window within |n| <= {self.n_max} (verdict: {self.kind})"
            )
        return self.window


def _zero_at(f: FunctionExpr, x: Fraction, tol: float = 1e-12) -> bool:
    v = fs.is_zero_at(f, (x,))
    if v is None:
        return abs(fs.evaluate(f, (x,))) <= tol
    return v


def find_window(f, hbar, delta, n_max: int = 50, anchor: int = 0) -> WindowVerdict:
    """Nearest zeros of f((n + 1/2 + delta) hbar) on either side of ``anchor``."""
    if isinstance(f, str):
        f = fs.parse(f, 1)
    hbar, delta = Fraction(hbar), Fraction(delta)
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    half = Fraction(1, 2)
    zeros = [n for n in range(-n_max, n_max + 1) if _zero_at(f, (n + half + delta) * hbar)]
    upper = [z for z in zeros if z >= anchor]
    lower = [z for z in zeros if z < anchor]
    N = min(upper) if upper else None
    M = max(lower) + 1 if lower else None
    if N is not None and M is not None:
        kind = "finite"
    elif N is not None:
        kind = "upper"
    elif M is not None:
        kind = "lower"
    else:
        kind = "none"
    return WindowVerdict(kind, M, N, delta, hbar, n_max)


def sequence_params(u1, u2, Nk: int) -> tuple:
    """(hbar, M, delta) placing the boundary zeros u1, u2 of a size-Nk window."""
    u1, u2 = Fraction(u1), Fraction(u2)
    if not u1 < u2:
        raise ValueError("need u1 < u2")
    if Nk < 1:
        raise ValueError("need Nk >= 1")
    hbar = (u2 - u1) / Nk
    t = u1 / hbar + Fraction(1, 2)
    M = math.floor(t)
    return hbar, M, t - M


def _ladder_elements(f: FunctionExpr, hbar: Fraction) -> tuple:
    p = AlgebraParams(1, hbar)
    h2 = hbar / 2
    ap = monomial(p, (-1,), fs.shift(f, (-h2,)))
    am = monomial(p, (1,), fs.shift(f, (h2,)))
    return p, ap, am


def build_1d(f, w: Window) -> FuzzyRep:
    """A+|n> = f((n+1/2+delta)hbar)|n+1>, A-|n> = f((n-1/2+delta)hbar)|n-1> on |M>..|N>."""
    if isinstance(f, str):
        f = fs.parse(f, 1)
    h, d = w.hbar, w.delta
    half = Fraction(1, 2)
    for label, x in (("upper", (w.N + half + d) * h), ("lower", (w.M - half + d) * h)):
        if fs.is_zero_at(f, (x,)) is not True:
            raise WindowError(f"f does not vanish exactly at the {label} boundary u={fmt_rational(x)}")
    basis = tuple((n,) for n in range(w.M, w.N + 1))
    p, ap, am = _ladder_elements(f, h)
    Ap, _ = matrix_of(ap, basis, (d,))
    Am, _ = matrix_of(am, basis, (d,))
    rep = FuzzyRep(
        D=1,
        basis=basis,
        hbar=h,
        delta=(d,),
        operators={"A+": Ap, "A-": Am},
        functions={"f": f, "f_minus": fs.shift(f, (-h / 2,)), "f_plus": fs.shift(f, (h / 2,))},
        scalars={"hbar": h},
        relations=[
            Relation("commutator", "[A+,A-] = fn(f_minus)^2 - fn(f_plus)^2"),
            Relation("anticommutator", "{A+,A-} = fn(f_minus)^2 + fn(f_plus)^2"),
        ],
        meta={"builder": "fuzzy1d", "f": fs.to_str(f), "M": w.M, "N": w.N},
    )
    rep.operators["u"] = build_diag(fs.var(0, 1), rep)
    return rep


def build_sequence(f, u1, u2, sizes: Iterable[int]) -> list:
    """One representation per requested dimension, all sharing the zeros u1 < u2."""
    if isinstance(f, str):
        f = fs.parse(f, 1)
    reps = []
    for Nk in sizes:
        h, M, d = sequence_params(u1, u2, Nk)
        reps.append(build_1d(f, Window(M, M + Nk - 1, d, h)))
    return reps


# -- sphere, catenoid, plane ---------------------------------------------------------------


def build_sphere(radius, k: int, delta=0) -> FuzzyRep:
    """Two-sided window N = k, M = -k - 2 delta, with hbar fixed by the radius."""
    delta = Fraction(delta)
    if delta not in (0, Fraction(1, 2)):
        raise ValueError("delta must be 0 or 1/2")
    if k < 0 or (k == 0 and delta == 0):
        raise ValueError("need k >= 1 for delta = 0, or k >= 0 for delta = 1/2")
    K = (k + delta) * (k + delta + 1)
    R = float(radius)
    if R <= 0:
        raise ValueError("radius must be positive")
    hbar = R / math.sqrt(K)
    M, N = -k - int(2 * delta), k
    ns = list(range(M, N + 1))
    basis = tuple((n,) for n in ns)
    dim = len(ns)
    up, down = [], []
    for i, n in enumerate(ns):
        rad = K - (n + delta + 1) * (n + delta)
        v = hbar * fs.branch_sqrt(complex(float(rad)))
        if i + 1 < dim and v != 0:
            up.append((i + 1, i, v))
        # A- is the adjoint of A+
        if i + 1 < dim and v != 0:
            down.append((i, i + 1, v.conjugate()))
    u = [hbar * float(n + delta) for n in ns]
    ops = {
        "A+": SparseComplexMatrix(dim, up),
        "A-": SparseComplexMatrix(dim, down),
        "u": SparseComplexMatrix(dim, ((i, i, x) for i, x in enumerate(u))),
        "Z": SparseComplexMatrix(dim, ((i, i, 2 * x) for i, x in enumerate(u))),
    }
    return FuzzyRep(
        D=1,
        basis=basis,
        hbar=hbar,
        delta=(delta,),
        operators=ops,
        scalars={"hbar": hbar, "R": R},
        relations=[
            Relation("commutator", "[A+,A-] = 2*hbar*u"),
            Relation("casimir", "{A+,A-}/2 + u^2 = R^2"),
            Relation("casimir_printed", "{A+,A-}/2 + 2*u^2 = 2*R^2", informational=True),
        ],
        meta={"builder": "sphere", "radius": R, "k": k, "M": M, "N": N},
    )


def _hermitian_pair(params: AlgebraParams, coeff: FunctionExpr, index: tuple) -> tuple:
    plus = monomial(params, index, coeff)
    return plus, involution(plus)


def build_catenoid(radius, hbar, delta, cutoff: int) -> FuzzyRep:
    """A+ = sqrt(R^2 + u(u - hbar)) U^-1 and its adjoint, truncated to |n| <= cutoff."""
    if cutoff < 2:
        raise ValueError("cutoff must be >= 2")
    R, h, d = Fraction(radius), Fraction(hbar), Fraction(delta)
    p = AlgebraParams(1, h)
    u = fs.var(0, 1)
    coeff = fs.sqrt(fs.add(fs.const(R * R), fs.mul(u, fs.add(u, fs.const(-h)))))
    ap, am = _hermitian_pair(p, coeff, (-1,))
    basis = tuple((n,) for n in range(-cutoff, cutoff + 1))
    ops = {"A+": matrix_of(ap, basis, (d,))[0], "A-": matrix_of(am, basis, (d,))[0]}
    rep = FuzzyRep(
        D=1,
        basis=basis,
        hbar=h,
        delta=(d,),
        operators=ops,
        flagged=frozenset({0, len(basis) - 1}),
        scalars={"hbar": h, "R": R},
        relations=[
            Relation("commutator", "[A+,A-] = -2*hbar*u"),
            Relation("casimir", "{A+,A-}/2 - u^2 = R^2"),
        ],
        meta={"builder": "catenoid", "radius": fmt_rational(R), "cutoff": cutoff},
    )
    rep.operators["u"] = build_diag(u, rep)
    return rep


def build_plane(c, hbar, cutoff: int) -> FuzzyRep:
    """A+ = sqrt(u + hbar c) U^-1 and its adjoint; the lower end is a true boundary."""
    if cutoff < 2:
        raise ValueError("cutoff must be >= 2")
    c, h = Fraction(c), Fraction(hbar)
    d = (-c) % 1
    M = int(-(d + c))
    p = AlgebraParams(1, h)
    u = fs.var(0, 1)
    coeff = fs.sqrt(fs.add(u, fs.const(h * c)))
    ap, am = _hermitian_pair(p, coeff, (-1,))
    basis = tuple((n,) for n in range(M, M + cutoff + 1))
    Am, leaked = matrix_of(am, basis, (d,))
    if leaked:
        raise WindowError("lower boundary is not annihilated")
    ops = {"A+": matrix_of(ap, basis, (d,))[0], "A-": Am}
    rep = FuzzyRep(
        D=1,
        basis=basis,
        hbar=h,
        delta=(d,),
        operators=ops,
        flagged=frozenset({len(basis) - 1}),
        scalars={"hbar": h, "c": c},
        relations=[
            Relation("commutator", "[A+,A-] = -hbar*I"),
            Relation("rho", "{A+,A-}/2 = u + hbar*(c + 1/2)"),
        ],
        meta={"builder": "plane", "c": fmt_rational(c), "cutoff": cutoff, "M": M},
    )
    rep.operators["u"] = build_diag(u, rep)
    return rep


# -- two dimensional examples -------------------------------------------------------------------


def _positive_on(f: FunctionExpr, pts: Iterable, label: str) -> None:
    for pt in pts:
        v = fs.evaluate(f, pt)
        if abs(v.imag) > 1e-12 or v.real <= 0:
            shown = ", ".join(fmt_rational(x) for x in pt)
            raise ValueError(f"{label} must be positive; value {v} at ({shown})")


def _build_2d(name: str, basis: tuple, hbar, d1, d2, coeff_u, coeff_v, ftilde, gtilde,
              q_turns, flagged: frozenset, meta: dict) -> FuzzyRep:
    h, d1, d2 = Fraction(hbar), Fraction(d1), Fraction(d2)
    ftilde = fs.parse(ftilde, 2) if isinstance(ftilde, str) else ftilde
    gtilde = fs.parse(gtilde, 2) if isinstance(gtilde, str) else gtilde
    pts = [(h * (n + d1), h * (m + d2)) for n, m in basis]
    _positive_on(ftilde, pts, "ftilde")
    _positive_on(gtilde, pts, "gtilde")
    p = AlgebraParams(2, h, q_turns)
    FU = fs.mul(coeff_u, ftilde)
    FV = fs.mul(coeff_v, gtilde)
    up, um = _hermitian_pair(p, FU, (-1, 0))
    vp, vm = _hermitian_pair(p, FV, (0, -1))
    ops = {}
    leaks = {}
    for label, a in (("U+", up), ("U-", um), ("V+", vp), ("V-", vm)):
        ops[label], leaks[label] = matrix_of(a, basis, (d1, d2))
    rep = FuzzyRep(
        D=2,
        basis=basis,
        hbar=h,
        delta=(d1, d2),
        operators=ops,
        flagged=flagged,
        functions={"FU": FU, "FUs": fs.shift(FU, (h, 0)), "FV": FV, "FVs": fs.shift(FV, (0, h))},
        scalars={"hbar": h},
        relations=[
            Relation("U_anticommutator", "{U+,U-} = fn(FU)^2 + fn(FUs)^2"),
            Relation("V_anticommutator", "{V+,V-} = fn(FV)^2 + fn(FVs)^2"),
        ],
        meta=dict(meta, builder=name, leaks=leaks, q_turns=fmt_rational(Fraction(q_turns))),
    )
    rep.operators["u"] = build_diag(fs.var(0, 2), rep)
    rep.operators["v"] = build_diag(fs.var(1, 2), rep)
    return rep


def simplex_basis_2d(N: int) -> tuple:
    return tuple((n, m) for n in range(N + 1) for m in range(N + 1 - n))


def build_2d_simplex(N: int, hbar, delta1=0, delta2=0, ftilde="1", gtilde="1",
                     q_turns=0) -> FuzzyRep:
    """Finite representation on {n, m >= 0, n + m <= N}; dimension (N+1)(N+2)/2."""
    if N < 0:
        raise ValueError("N must be >= 0")
    h, d1, d2 = Fraction(hbar), Fraction(delta1), Fraction(delta2)
    u, v = fs.var(0, 2), fs.var(1, 2)
    top = fs.add(fs.const(h * (d1 + d2 + N + 1)), fs.neg(u), fs.neg(v))
    cu = fs.sqrt(fs.mul(fs.add(u, fs.const(-h * d1)), top))
    cv = fs.sqrt(fs.mul(fs.add(v, fs.const(-h * d2)), top))
    rep = _build_2d("simplex", simplex_basis_2d(N), h, d1, d2, cu, cv, ftilde, gtilde, q_turns,
                    frozenset(), {"N": N})
    if any(rep.meta["leaks"].values()):
        raise WindowError("simplex is not invariant; check the parameters")
    return rep


def build_2d_quadrant(hbar, delta1=0, delta2=0, ftilde="1", gtilde="1", cutoff: int = 6,
                      q_turns=0) -> FuzzyRep:
    """Truncation of the quadrant {n, m >= 0} to n, m <= cutoff."""
    if cutoff < 2:
        raise ValueError("cutoff must be >= 2")
    h, d1, d2 = Fraction(hbar), Fraction(delta1), Fraction(delta2)
    u, v = fs.var(0, 2), fs.var(1, 2)
    cu = fs.sqrt(fs.mul(fs.add(u, fs.const(-h * d1)), fs.add(v, fs.const(-h * d2))))
    cv = fs.sqrt(fs.add(v, fs.const(-h * d2)))
    basis = tuple((n, m) for n in range(cutoff + 1) for m in range(cutoff + 1))
    flagged = frozenset(i for i, (n, m) in enumerate(basis) if n == cutoff or m == cutoff)
    return _build_2d("quadrant", basis, h, d1, d2, cu, cv, ftilde, gtilde, q_turns, flagged,
                     {"cutoff": cutoff})


def reachable(rep: FuzzyRep, start, names: Sequence[str] | None = None) -> set:
    """Basis points reachable from ``start`` through nonzero entries of the named operators."""
    names = list(names or rep.operators)
    mats = [rep.operators[n].csr.tocsc() for n in names]
    seen = {rep.index_of(start)}
    todo = list(seen)
    while todo:
        j = todo.pop()
        for m in mats:
            col = m.getcol(j)
            for i in col.nonzero()[0]:
                if i not in seen:
                    seen.add(int(i))
                    todo.append(int(i))
    return {rep.basis[i] for i in seen}


# -- relation language --------------------------------------------------------------------


_REL_TOKEN = re.compile(r"\s*(?:(?P<num>\d+)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()\[\]{},=]))")


class _RelParser:
    def __init__(self, text: str, rep: FuzzyRep):
        self.text = text
        self.rep = rep
        self.pos = 0
        self.opnames = sorted(rep.operators, key=len, reverse=True)

    def error(self, msg: str):
        raise RelationError(f"{msg} at position {self.pos} in {self.text!r}")

    def skip(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str):
        if self.peek() != ch:
            self.error(f"expected {ch!r}")
        self.pos += 1

    def parse_relation(self):
        lhs = self.expr()
        if self.peek() == "=":
            self.pos += 1
            rhs = self.expr()
        else:
            rhs = 0j
        if self.peek():
            self.error("unexpected trailing text")
        return _sub(lhs, rhs)

    def expr(self):
        v = self.term()
        while self.peek() in ("+", "-"):
            op = self.text[self.pos]
            self.pos += 1
            w = self.term()
            v = _add(v, w) if op == "+" else _sub(v, w)
        return v

    def term(self):
        v = self.unary()
        while self.peek() in ("*", "/"):
            op = self.text[self.pos]
            self.pos += 1
            w = self.unary()
            if op == "*":
                v = _mul(v, w)
            else:
                if not np.isscalar(w):
                    self.error("division by a matrix")
                v = v / w
        return v

    def unary(self):
        if self.peek() == "-":
            self.pos += 1
            return _mul(-1.0, self.unary())
        if self.peek() == "+":
            self.pos += 1
            return self.unary()
        v = self.atom()
        if self.peek() == "^":
            self.pos += 1
            self.skip()
            m = re.match(r"\d+", self.text[self.pos:])
            if not m:
                self.error("exponent must be a non-negative integer")
            self.pos += m.end()
            e = int(m.group())
            out = 1.0 + 0j
            for _ in range(e):
                out = _mul(out, v)
            v = out
        return v

    def atom(self):
        self.skip()
        ch = self.peek()
        if ch == "(":
            self.pos += 1
            v = self.expr()
            self.expect(")")
            return v
        if ch in ("[", "{"):
            close = "]" if ch == "[" else "}"
            self.pos += 1
            x = self.expr()
            self.expect(",")
            y = self.expr()
            self.expect(close)
            xy, yx = _mul(x, y), _mul(y, x)
            return _sub(xy, yx) if ch == "[" else _add(xy, yx)
        for name in self.opnames:
            if self.text.startswith(name, self.pos):
                end = self.pos + len(name)
                nxt = self.text[end:end + 1]
                if name[-1].isalnum() and (nxt.isalnum() or nxt == "_"):
                    continue
                self.pos = end
                return self.rep.dense(name)
        m = re.match(r"\d+(?:\.\d+)?", self.text[self.pos:])
        if m:
            self.pos += m.end()
            return complex(float(m.group()))
        m = re.match(r"[A-Za-z_][A-Za-z_0-9]*", self.text[self.pos:])
        if not m:
            self.error("unexpected character")
        word = m.group()
        self.pos += m.end()
        if word == "I":
            return np.eye(self.rep.dim, dtype=complex)
        if word in ("diag", "fn"):
            self.expect("(")
            depth, start = 1, self.pos
            while self.pos < len(self.text) and depth:
                if self.text[self.pos] == "(":
                    depth += 1
                elif self.text[self.pos] == ")":
                    depth -= 1
                self.pos += 1
            if depth:
                self.error("unbalanced parentheses")
            arg = self.text[start:self.pos - 1].strip()
            if word == "fn":
                if arg not in self.rep.functions:
                    self.error(f"unknown function {arg!r}")
                g = self.rep.functions[arg]
            else:
                g = fs.parse(arg, self.rep.D)
            return build_diag(g, self.rep).toarray()
        if word in self.rep.scalars:
            return complex(float(self.rep.scalars[word]))
        if word == "hbar":
            return complex(float(self.rep.hbar))
        if word == "i":
            return 1j
        self.error(f"unknown name {word!r}")


def _add(x, y):
    if np.isscalar(x) and np.isscalar(y):
        return x + y
    if np.isscalar(x):
        return x * np.eye(y.shape[0]) + y
    if np.isscalar(y):
        return x + y * np.eye(x.shape[0])
    return x + y


def _sub(x, y):
    return _add(x, _mul(-1.0, y))


def _mul(x, y):
    if np.isscalar(x) or np.isscalar(y):
        return x * y
    return x @ y


def evaluate_relation(rep: FuzzyRep, text: str) -> np.ndarray:
    """Dense residual matrix lhs - rhs of a relation ``lhs = rhs``."""
    v = _RelParser(text, rep).parse_relation()
    if np.isscalar(v):
        v = v * np.eye(rep.dim, dtype=complex)
    return v


@dataclass(frozen=True)
class RelationReport:
    name: str
    text: str
    residual_max: float
    residual_fro: float
    passed: bool
    excluded: tuple = ()
    informational: bool = False

    def line(self) -> str:
        status = "info" if self.informational else ("pass" if self.passed else "FAIL")
        return f"{status} {self.name}: max={self.residual_max:.3e} fro={self.residual_fro:.3e}"


def _interior(rep: FuzzyRep) -> np.ndarray:
    return np.array([i for i in range(rep.dim) if i not in rep.flagged], dtype=int)


def residual_on_interior(rep: FuzzyRep, M: np.ndarray) -> tuple:
    idx = _interior(rep)
    sub = M[np.ix_(idx, idx)] if len(idx) else np.zeros((0, 0))
    if sub.size == 0:
        return 0.0, 0.0
    return float(np.max(np.abs(sub))), float(np.linalg.norm(sub))


def verify_relations(rep: FuzzyRep, relations: Iterable | None = None,
                     tol: float = DEFAULT_TOL) -> list:
    rels = rep.relations if relations is None else list(relations)
    out = []
    for i, r in enumerate(rels):
        if isinstance(r, str):
            r = Relation(f"relation{i + 1}", r)
        mx, fro = residual_on_interior(rep, evaluate_relation(rep, r.text))
        out.append(RelationReport(r.name, r.text, mx, fro, mx < tol, tuple(sorted(rep.flagged)),
                                  r.informational))
    return out


# -- irreducibility ---------------------------------------------------------------------------


def _commutant_dense(mats: list, n: int) -> int:
    I = np.eye(n)
    blocks = [np.kron(I, G) - np.kron(G.T, I) for G in mats]
    L = sum(B.conj().T @ B for B in blocks)
    w = np.linalg.eigvalsh(L)
    s = np.sqrt(np.clip(w, 0, None))
    smax = max(float(s.max()), 1e-300)
    return int(np.sum(s <= 1e-8 * smax))


def _commutant_generic(mats: list, n: int, rng: np.random.Generator) -> int | None:
    """Commutant dimension via a random Hermitian element with simple spectrum."""
    H = np.zeros((n, n), dtype=complex)
    for G in mats:
        a, b = rng.normal(size=2)
        H += a * (G + G.conj().T) + 1j * b * (G - G.conj().T)
    w, V = np.linalg.eigh(H)
    scale = max(float(np.max(np.abs(w))), 1.0)
    if n > 1 and float(np.min(np.diff(w))) < 1e-8 * scale:
        return None
    # X commutes with H, so it is diagonal in V; remaining conditions link eigenvectors
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for G in mats:
        Gt = V.conj().T @ G @ V
        thr = 1e-8 * max(float(np.max(np.abs(Gt))), 1e-300)
        rows, cols = np.nonzero(np.abs(Gt) > thr)
        for i, j in zip(rows.tolist(), cols.tolist()):
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[ri] = rj
    return len({find(i) for i in range(n)})


def irreducibility_check(rep: FuzzyRep, generators: Sequence[str] | None = None,
                         seed: int = 0) -> tuple:
    """(commutant dimension, irreducible) for the algebra generated by the named operators."""
    n = rep.dim
    if n > IRREDUCIBILITY_LIMIT:
        raise ValueError(f"dimension {n} exceeds the limit {IRREDUCIBILITY_LIMIT}")
    names = list(generators or rep.operators)
    mats = [rep.dense(x) for x in names]
    if n <= DENSE_COMMUTANT_LIMIT:
        dim = _commutant_dense(mats, n)
    else:
        dim = _commutant_generic(mats, n, np.random.default_rng(seed))
        if dim is None:
            raise ValueError("degenerate spectrum; commutant not determined for this size")
    return dim, dim == 1


def direct_sum(a: FuzzyRep, b: FuzzyRep) -> FuzzyRep:
    """Block diagonal sum of two representations with the same operator names."""
    if set(a.operators) != set(b.operators):
        raise ValueError("operator names differ")
    basis = tuple((0,) + k for k in a.basis) + tuple((1,) + k for k in b.basis)
    ops = {name: SparseComplexMatrix.from_matrix(sp.block_diag((a.operators[name].csr, b.operators[name].csr)))
           for name in a.operators}
    return FuzzyRep(a.D + 1, basis, a.hbar, (0,) + tuple(a.delta), ops, meta={"builder": "direct_sum"})


# -- level sets --------------------------------------------------------------------------------


def levelset_sample(f, u1, u2, nu: int, nphi: int) -> list:
    """Points (f(u) cos phi, f(u) sin phi, u) on a regular grid."""
    if isinstance(f, str):
        f = fs.parse(f, 1)
    if nu < 2 or nphi < 2:
        raise ValueError("nu and nphi must be >= 2")
    a, b = float(Fraction(u1)), float(Fraction(u2))
    out = []
    for i in range(nu):
        z = a + (b - a) * i / (nu - 1)
        r = fs.evaluate(f, (z,))
        if abs(r.imag) > 1e-12:
            raise ValueError(f"f is not real at u={z}")
        r = r.real
        for j in range(nphi):
            t = 2 * math.pi * j / nphi
            out.append((r * math.cos(t), r * math.sin(t), z))
    return out


def levelset_csv(points: Iterable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "z"])
    for p in points:
        w.writerow([f"{c:.12g}" for c in p])
    return buf.getvalue()
