"""Lie algebra representations from the generators E_ij = sqrt(u_i + c_i) U_i^-1 U_j sqrt(u_j + c_j).

Given structure constants f^{ab}_c and N x N matrices X^a with
[X^a, X^b] = f^{ab}_c X^c, the operators X-hat^a = sum_ij X^a_ij E_ij satisfy
[X-hat^a, X-hat^b] = hbar f^{ab}_c X-hat^c.  Throughout, q = 1.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction
from math import comb

import numpy as np

from . import funcspace as fs
from .algebra import AlgebraElement, AlgebraParams, function, monomial, multiply
from .fuzzy import FuzzyRep, Relation, RelationReport, SparseComplexMatrix, matrix_of

LIE_TOL = 1e-9
_CHECK_TOL = 1e-10


class LieDataError(ValueError):
    pass


# -- input data ----------------------------------------------------------------


@dataclass(frozen=True)
class StructureConstants:
    """f[a, b, c] = f^{ab}_c.  Complex values are allowed (physics conventions)."""

    f: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.f, dtype=complex)
        if f.ndim != 3 or len(set(f.shape)) != 1:
            raise LieDataError("structure constants must be an n x n x n array")
        object.__setattr__(self, "f", f)
        if self.antisymmetry_residual() > _CHECK_TOL:
            raise LieDataError("structure constants are not antisymmetric")
        if self.jacobi_residual() > _CHECK_TOL:
            raise LieDataError("structure constants violate the Jacobi identity")

    @property
    def n(self) -> int:
        return self.f.shape[0]

    def antisymmetry_residual(self) -> float:
        return float(np.max(np.abs(self.f + self.f.transpose(1, 0, 2)), initial=0.0))

    def jacobi_residual(self) -> float:
        # sum_d f^{ab}_d f^{dc}_e + cyclic(a, b, c)
        f = self.f
        t = np.einsum("abd,dce->abce", f, f)
        j = t + t.transpose(1, 2, 0, 3) + t.transpose(2, 0, 1, 3)
        return float(np.max(np.abs(j), initial=0.0))

    def to_json(self) -> dict:
        f = self.f
        if np.all(f.imag == 0):
            data = f.real.tolist()
        else:
            data = [[[[v.real, v.imag] for v in row] for row in plane] for plane in f]
        return {"n": self.n, "f": data}

    @classmethod
    def from_json(cls, data: dict | str) -> "StructureConstants":
        if isinstance(data, str):
            data = json.loads(data)
        arr = np.asarray(data["f"], dtype=float)
        if arr.ndim == 4:
            arr = arr[..., 0] + 1j * arr[..., 1]
        if arr.shape != (data["n"],) * 3:
            raise LieDataError("shape of f does not match n")
        return cls(arr)


@dataclass(frozen=True)
class RepMatrices:
    """Matrices X^a of an N-dimensional representation, checked against ``sc``."""

    sc: StructureConstants
    X: tuple

    def __post_init__(self):
        X = tuple(np.asarray(x, dtype=complex) for x in self.X)
        if len(X) != self.sc.n:
            raise LieDataError(f"expected {self.sc.n} matrices, got {len(X)}")
        N = X[0].shape[0] if X else 0
        if any(x.shape != (N, N) for x in X):
            raise LieDataError("representation matrices must be square of equal size")
        object.__setattr__(self, "X", X)
        if self.residual() > _CHECK_TOL:
            raise LieDataError("matrices do not satisfy the structure constants")

    @property
    def N(self) -> int:
        return self.X[0].shape[0]

    def residual(self) -> float:
        return lie_residual(self.X, self.sc, 1)

    def to_json(self) -> list:
        return [SparseComplexMatrix.from_matrix(x).to_json() for x in self.X]

    @classmethod
    def from_json(cls, sc: StructureConstants, data: list | str) -> "RepMatrices":
        if isinstance(data, str):
            data = json.loads(data)
        return cls(sc, tuple(SparseComplexMatrix.from_json(d).toarray() for d in data))


def lie_residual(X, sc: StructureConstants, hbar) -> float:
    h = float(hbar)
    worst = 0.0
    for a, b in itertools.combinations(range(sc.n), 2):
        lhs = X[a] @ X[b] - X[b] @ X[a]
        rhs = h * np.einsum("c,cij->ij", sc.f[a, b], np.asarray(X))
        worst = max(worst, float(np.max(np.abs(lhs - rhs), initial=0.0)))
    return worst


# -- presets ---------------------------------------------------------------------------


def _levi_civita() -> np.ndarray:
    e = np.zeros((3, 3, 3))
    for a, b, c in itertools.permutations(range(3)):
        e[a, b, c] = np.linalg.det(np.eye(3)[[a, b, c]])
    return e


def su2_pauli() -> RepMatrices:
    """Pauli matrices with [sigma_a, sigma_b] = 2i eps_abc sigma_c."""
    s = (np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.array([[1, 0], [0, -1]]))
    return RepMatrices(StructureConstants(2j * _levi_civita()), s)


def gell_mann() -> tuple:
    l = np.zeros((8, 3, 3), dtype=complex)
    l[0][0, 1] = l[0][1, 0] = 1
    l[1][0, 1], l[1][1, 0] = -1j, 1j
    l[2][0, 0], l[2][1, 1] = 1, -1
    l[3][0, 2] = l[3][2, 0] = 1
    l[4][0, 2], l[4][2, 0] = -1j, 1j
    l[5][1, 2] = l[5][2, 1] = 1
    l[6][1, 2], l[6][2, 1] = -1j, 1j
    l[7] = np.diag([1, 1, -2]) / np.sqrt(3)
    return tuple(l)


# totally antisymmetric su(3) constants f_abc (1-based indices), [T_a, T_b] = i f_abc T_c
_SU3_F = {
    (1, 2, 3): 1.0,
    (1, 4, 7): 0.5,
    (1, 5, 6): -0.5,
    (2, 4, 6): 0.5,
    (2, 5, 7): 0.5,
    (3, 4, 5): 0.5,
    (3, 6, 7): -0.5,
    (4, 5, 8): np.sqrt(3) / 2,
    (6, 7, 8): np.sqrt(3) / 2,
}


def su3_fundamental() -> RepMatrices:
    f = np.zeros((8, 8, 8), dtype=complex)
    for (a, b, c), v in _SU3_F.items():
        for p, sign in (((a, b, c), 1), ((b, c, a), 1), ((c, a, b), 1),
                        ((b, a, c), -1), ((a, c, b), -1), ((c, b, a), -1)):
            f[p[0] - 1, p[1] - 1, p[2] - 1] = 1j * sign * v
    T = tuple(x / 2 for x in gell_mann())
    return RepMatrices(StructureConstants(f), T)


def generalized_gell_mann(D: int) -> tuple:
    """Hermitian traceless basis of su(D), normalised so tr(T_a T_b) = delta_ab / 2."""
    if D < 2:
        raise LieDataError("need D >= 2")
    out = []
    for j in range(D):
        for k in range(j + 1, D):
            s = np.zeros((D, D), dtype=complex)
            s[j, k] = s[k, j] = 0.5
            a = np.zeros((D, D), dtype=complex)
            a[j, k], a[k, j] = -0.5j, 0.5j
            out += [s, a]
    for l in range(1, D):
        d = np.zeros(D)
        d[:l] = 1
        d[l] = -l
        out.append(np.diag(d).astype(complex) / np.sqrt(2 * l * (l + 1)))
    return tuple(out)


def suD_fundamental(D: int) -> RepMatrices:
    T = generalized_gell_mann(D)
    n = len(T)
    f = np.zeros((n, n, n), dtype=complex)
    for a, b, c in itertools.product(range(n), repeat=3):
        f[a, b, c] = 2 * np.trace((T[a] @ T[b] - T[b] @ T[a]) @ T[c])
    f[np.abs(f) < 1e-15] = 0
    return RepMatrices(StructureConstants(f), T)


def abelian(diagonals) -> RepMatrices:
    X = tuple(np.diag(np.asarray(d, dtype=complex)) for d in diagonals)
    n = len(X)
    return RepMatrices(StructureConstants(np.zeros((n, n, n))), X)


PRESETS = {"su2": su2_pauli, "su3": su3_fundamental}


def preset(name: str) -> RepMatrices:
    if name in PRESETS:
        return PRESETS[name]()
    if name.startswith("su") and name[2:].isdigit():
        return suD_fundamental(int(name[2:]))
    raise LieDataError(f"unknown preset {name!r}")


# -- E_ij ----------------------------------------------------------------------------------


def simplex_basis(D: int, N: int) -> tuple:
    """Multi-indices k >= 0 with |k| = N, in lexicographic order."""
    if D < 1 or N < 0:
        raise ValueError("need D >= 1 and N >= 0")
    out = [k for k in itertools.product(range(N + 1), repeat=D) if sum(k) == N]
    assert len(out) == comb(N + D - 1, D - 1)
    return tuple(out)


def box_basis(D: int, lo: int, hi: int) -> tuple:
    return tuple(itertools.product(range(lo, hi + 1), repeat=D))


@dataclass
class EijSet:
    D: int
    hbar: Fraction
    c: tuple
    delta: tuple
    basis: tuple
    flagged: frozenset
    E: dict

    def dense(self, i: int, j: int) -> np.ndarray:
        return self.E[(i, j)].toarray()


def Eij_element(params: AlgebraParams, i: int, j: int, c) -> AlgebraElement:
    """sqrt(u_i + c_i) U_i^-1 U_j sqrt(u_j + c_j) as an algebra element (0-based i, j)."""
    D = params.D

    def root(m):
        return fs.sqrt(fs.add(fs.var(m, D), fs.const(c[m])))

    if i == j:
        return function(params, fs.add(fs.var(i, D), fs.const(c[i])))
    left = monomial(params, tuple(-1 if m == i else 0 for m in range(D)), root(i))
    mid = monomial(params, tuple(1 if m == j else 0 for m in range(D)))
    return multiply(multiply(left, mid), function(params, root(j)))


def build_Eij_matrices(D: int, N: int, hbar, c=None, delta=None, basis=None) -> EijSet:
    """All E_ij on the simplex |k| = N (requires hbar delta + c = 0) or on a given box basis."""
    h = Fraction(hbar)
    delta = tuple(Fraction(x) for x in (delta if delta is not None else (0,) * D))
    c = tuple(Fraction(x) for x in (c if c is not None else [-h * d for d in delta]))
    if len(c) != D or len(delta) != D:
        raise ValueError("c and delta need D components")
    if basis is None:
        if any(h * d + ci != 0 for d, ci in zip(delta, c)):
            raise ValueError("the simplex basis needs hbar*delta + c = 0; pass a box basis")
        basis = simplex_basis(D, N)
        flagged = frozenset()
    else:
        basis = tuple(tuple(k) for k in basis)
        lo = [min(k[m] for k in basis) for m in range(D)]
        hi = [max(k[m] for k in basis) for m in range(D)]
        flagged = frozenset(
            p for p, k in enumerate(basis) if any(k[m] in (lo[m], hi[m]) for m in range(D))
        )
    params = AlgebraParams(D, h)
    E = {}
    for i, j in itertools.product(range(D), repeat=2):
        E[(i, j)] = matrix_of(Eij_element(params, i, j, c), basis, delta)[0]
    return EijSet(D, h, c, delta, basis, flagged, E)


def _interior_max(M: np.ndarray, keep: np.ndarray) -> float:
    if len(keep) == 0:
        return 0.0
    return float(np.max(np.abs(M[np.ix_(keep, keep)]), initial=0.0))


def verify_Eij_commutators(es: EijSet, tol: float = LIE_TOL) -> RelationReport:
    """[E_ij, E_kl] = hbar (delta_jk E_il - delta_il E_kj) over all quadruples."""
    D = es.D
    if set(es.E) != set(itertools.product(range(D), repeat=2)):
        raise ValueError("incomplete E_ij map")
    h = float(es.hbar)
    n = len(es.basis)
    keep = np.array([p for p in range(n) if p not in es.flagged], dtype=int)
    dense = {key: m.toarray() for key, m in es.E.items()}
    zero = np.zeros((n, n))
    worst, fro = 0.0, 0.0
    for i, j, k, l in itertools.product(range(D), repeat=4):
        A, B = dense[(i, j)], dense[(k, l)]
        rhs = h * ((dense[(i, l)] if j == k else zero) - (dense[(k, j)] if i == l else zero))
        R = A @ B - B @ A - rhs
        worst = max(worst, _interior_max(R, keep))
        if len(keep):
            fro = max(fro, float(np.linalg.norm(R[np.ix_(keep, keep)])))
    return RelationReport("Eij_commutators", "[E_ij,E_kl] = hbar(d_jk E_il - d_il E_kj)", worst, fro,
                          worst < tol, tuple(sorted(es.flagged)))


# -- X-hat ---------------------------------------------------------------------------------


def build_hatX(rm: RepMatrices, es: EijSet) -> list:
    if rm.N != es.D:
        raise LieDataError(f"representation has size {rm.N}, E_ij set has D={es.D}")
    dense = {key: m.toarray() for key, m in es.E.items()}
    out = []
    for X in rm.X:
        M = sum(X[i, j] * dense[(i, j)] for i, j in itertools.product(range(es.D), repeat=2)
                if X[i, j] != 0)
        if isinstance(M, int):
            M = np.zeros((len(es.basis),) * 2, dtype=complex)
        out.append(SparseComplexMatrix.from_matrix(M))
    return out


def verify_lie_relations(Xhat, sc: StructureConstants, hbar, flagged=(),
                         tol: float = LIE_TOL) -> RelationReport:
    X = [x.toarray() if isinstance(x, SparseComplexMatrix) else np.asarray(x) for x in Xhat]
    n = X[0].shape[0]
    keep = np.array([p for p in range(n) if p not in set(flagged)], dtype=int)
    h = float(hbar)
    worst, fro = 0.0, 0.0
    stack = np.asarray(X)
    for a, b in itertools.combinations(range(sc.n), 2):
        R = X[a] @ X[b] - X[b] @ X[a] - h * np.einsum("c,cij->ij", sc.f[a, b], stack)
        worst = max(worst, _interior_max(R, keep))
        if len(keep):
            fro = max(fro, float(np.linalg.norm(R[np.ix_(keep, keep)])))
    return RelationReport("lie", "[X^a,X^b] = hbar f^{ab}_c X^c", worst, fro, worst < tol,
                          tuple(sorted(set(flagged))))


def _coef_text(z: complex) -> str:
    def num(x):
        s = repr(abs(float(x)))
        return s if "e" not in s else f"{abs(x):.20f}"

    parts = []
    if abs(z.real) > 1e-14:
        parts.append(("-" if z.real < 0 else "") + num(z.real))
    if abs(z.imag) > 1e-14:
        parts.append(("-" if z.imag < 0 else "+" if parts else "") + num(z.imag) + "*i")
    return "(" + "".join(parts) + ")"


def lie_relation_texts(sc: StructureConstants, names) -> list:
    rels = []
    for a, b in itertools.combinations(range(sc.n), 2):
        terms = [f"{_coef_text(v)}*{names[c]}" for c, v in enumerate(sc.f[a, b]) if abs(v) > 1e-14]
        rhs = "hbar*(" + " + ".join(terms) + ")" if terms else "0"
        rels.append(Relation(f"lie_{names[a]}_{names[b]}", f"[{names[a]},{names[b]}] = {rhs}"))
    return rels


def build_simplex_rep(rm: RepMatrices, N: int, hbar, delta=None, name: str = "") -> FuzzyRep:
    """Representation of the X-hat^a on the simplex |k| = N with c = -hbar delta."""
    D = rm.N
    h = Fraction(hbar)
    es = build_Eij_matrices(D, N, h, delta=delta)
    Xh = build_hatX(rm, es)
    names = [f"X{a + 1}" for a in range(rm.sc.n)]
    ops = dict(zip(names, Xh))
    rels = lie_relation_texts(rm.sc, names)
    if name == "su2":
        ops["A+"] = es.E[(0, 1)]
        ops["A-"] = es.E[(1, 0)]
        ops["Z"] = Xh[2]
        rels.append(Relation("ladder", "[A+,A-] = hbar*Z"))
        rels.append(Relation("ladder_plus", "A+ = (X1 + i*X2)/2"))
        rels.append(Relation("ladder_minus", "A- = (X1 - i*X2)/2"))
    return FuzzyRep(
        D=D,
        basis=es.basis,
        hbar=h,
        delta=es.delta,
        operators=ops,
        scalars={"hbar": h},
        relations=rels,
        meta={"builder": "lie", "preset": name, "level": N, "generators": names},
    )


def su2_casimir(rep: FuzzyRep) -> tuple:
    """(value, spread) of 1/2{A+,A-} + Z^2/4; spread is the distance from a scalar matrix."""
    Ap, Am, Z = rep.dense("A+"), rep.dense("A-"), rep.dense("Z")
    C = (Ap @ Am + Am @ Ap) / 2 + Z @ Z / 4
    val = complex(np.trace(C) / C.shape[0])
    return val, float(np.max(np.abs(C - val * np.eye(C.shape[0]))))
