"""Left, right and bimodule actions of the shift algebra.

Vectors are finitely supported: a :class:`StateVector` lives on Q^D x Z^D and a
:class:`DiscreteVector` on Z^D.  Actions are computed by pushing every support
point through every term of the algebra element.
"""

from __future__ import annotations

import cmath
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping

from . import funcspace as fs
from .algebra import AlgebraElement, AlgebraParams, random_element
from .lattice import (
    LatticeError,
    as_int_matrix,
    as_rat_matrix,
    as_rat_vector,
    coset_representatives,
    det,
    frac,
    identity,
    int_mat_inv,
    is_integral,
    is_unimodular,
    mat_add,
    mat_inv,
    mat_mul,
    mat_neg,
    mat_sub,
    mat_vec,
    rational_cocycle_exponent,
    vec_add,
    vec_sub,
    zeros,
)


class ConstraintError(ValueError):
    """Parameters violate an exact compatibility equation."""


def q_phase(params: AlgebraParams, N) -> complex:
    """q^N for rational N, reduced exactly modulo one turn."""
    t = frac(params.q_turns * Fraction(N))
    if t == 0:
        return 1 + 0j
    return cmath.exp(2j * math.pi * float(t))


# -- parameter sets -----------------------------------------------------------


@dataclass(frozen=True)
class ModuleParams:
    """(L0, E, L1, R, delta) with L0 E + L1 R = I."""

    L0: tuple
    E: tuple
    L1: tuple
    R: tuple
    delta: tuple

    def __post_init__(self):
        object.__setattr__(self, "L0", as_rat_matrix(self.L0))
        object.__setattr__(self, "E", as_rat_matrix(self.E))
        object.__setattr__(self, "L1", as_rat_matrix(self.L1))
        object.__setattr__(self, "R", as_int_matrix(self.R))
        object.__setattr__(self, "delta", as_rat_vector(self.delta))
        D = len(self.delta)
        if any(len(m) != D for m in (self.L0, self.E, self.L1, self.R)):
            raise ConstraintError("dimension mismatch among module parameters")
        lhs = mat_add(mat_mul(self.L0, self.E), mat_mul(self.L1, self.R))
        if lhs != identity(D):
            raise ConstraintError("L0 E + L1 R must equal the identity")

    @property
    def D(self) -> int:
        return len(self.delta)

    def phi(self, x, k) -> tuple:
        return vec_add(vec_add(mat_vec(self.L0, x), mat_vec(self.L1, k)), self.delta)


@dataclass(frozen=True)
class RightModuleParams:
    """(G0, F, G1, P, eps) with G0 F + G1 P = I."""

    G0: tuple
    F: tuple
    G1: tuple
    P: tuple
    eps: tuple

    def __post_init__(self):
        object.__setattr__(self, "G0", as_rat_matrix(self.G0))
        object.__setattr__(self, "F", as_rat_matrix(self.F))
        object.__setattr__(self, "G1", as_rat_matrix(self.G1))
        object.__setattr__(self, "P", as_int_matrix(self.P))
        object.__setattr__(self, "eps", as_rat_vector(self.eps))
        D = len(self.eps)
        if any(len(m) != D for m in (self.G0, self.F, self.G1, self.P)):
            raise ConstraintError("dimension mismatch among right module parameters")
        lhs = mat_add(mat_mul(self.G0, self.F), mat_mul(self.G1, self.P))
        if lhs != identity(D):
            raise ConstraintError("G0 F + G1 P must equal the identity")

    @property
    def D(self) -> int:
        return len(self.eps)

    def psi(self, x, k, shift=None) -> tuple:
        base = vec_add(mat_vec(self.G0, x), mat_vec(self.G1, k))
        e = self.eps if shift is None else vec_add(self.eps, shift)
        return vec_add(base, e)


def bimodule_residuals(mp: ModuleParams, rp: RightModuleParams) -> tuple:
    """(L0 F + L1 P, G0 E + G1 R); both must vanish for a bimodule."""
    a = mat_add(mat_mul(mp.L0, rp.F), mat_mul(mp.L1, rp.P))
    b = mat_add(mat_mul(rp.G0, mp.E), mat_mul(rp.G1, mp.R))
    return a, b


def is_bimodule_compatible(mp: ModuleParams, rp: RightModuleParams) -> bool:
    a, b = bimodule_residuals(mp, rp)
    return a == zeros(mp.D) and b == zeros(mp.D)


def solve_bimodule_params(L0, L1, R, P, delta=None, eps=None) -> tuple:
    """Complete (L0, L1, R, P) to compatible left and right parameter sets."""
    L0, L1 = as_rat_matrix(L0), as_rat_matrix(L1)
    R, P = as_int_matrix(R), as_int_matrix(P)
    D = len(L0)
    if det(L0) == 0:
        raise LatticeError("L0 must be invertible")
    if not is_unimodular(R) or not is_unimodular(P):
        raise LatticeError("R and P must be unimodular")
    I = identity(D)
    L0i, Pi = mat_inv(L0), mat_inv(P)
    E = mat_mul(L0i, mat_sub(I, mat_mul(L1, R)))
    F = mat_neg(mat_mul(mat_mul(L0i, L1), P))
    G0 = mat_neg(mat_mul(mat_mul(Pi, R), L0))
    G1 = mat_mul(Pi, mat_sub(I, mat_mul(R, L1)))
    delta = (0,) * D if delta is None else delta
    eps = (0,) * D if eps is None else eps
    mp = ModuleParams(L0, E, L1, R, delta)
    rp = RightModuleParams(G0, F, G1, P, eps)
    if not is_bimodule_compatible(mp, rp):
        raise ConstraintError("internal error: solved parameters are incompatible")
    return mp, rp


# -- vectors -------------------------------------------------------------------


class _SparseVector:
    __slots__ = ("entries",)

    def __init__(self, entries: Mapping | Iterable = ()):
        items = entries.items() if isinstance(entries, Mapping) else entries
        out: dict = {}
        for key, v in items:
            key = self._key(key)
            out[key] = out.get(key, 0j) + complex(v)
        self.entries = out

    @staticmethod
    def _key(key):
        return key

    def __iter__(self):
        return iter(self.entries.items())

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, key):
        return self.entries.get(self._key(key), 0j)

    def __add__(self, other):
        return type(self)(list(self.entries.items()) + list(other.entries.items()))

    def __sub__(self, other):
        return self + other.scaled(-1)

    def scaled(self, c):
        return type(self)({k: c * v for k, v in self.entries.items()})

    def norm_max(self) -> float:
        return max((abs(v) for v in self.entries.values()), default=0.0)

    def __repr__(self):
        return f"{type(self).__name__}({dict(sorted(self.entries.items()))})"


class StateVector(_SparseVector):
    """Finite map (x in Q^D, k in Z^D) -> complex."""

    @staticmethod
    def _key(key):
        x, k = key
        return tuple(Fraction(v) for v in x), tuple(int(v) for v in k)


class DiscreteVector(_SparseVector):
    """Finite map k in Z^D -> complex."""

    @staticmethod
    def _key(key):
        return tuple(int(v) for v in key)

    def to_json(self) -> dict:
        return {
            "entries": [
                {"k": list(k), "re": v.real, "im": v.imag} for k, v in sorted(self.entries.items())
            ]
        }

    @staticmethod
    def from_json(data: dict) -> "DiscreteVector":
        return DiscreteVector((tuple(e["k"]), complex(e["re"], e["im"])) for e in data["entries"])


def basis_vector(k) -> DiscreteVector:
    return DiscreteVector({tuple(k): 1})


# -- left action ----------------------------------------------------------------


def _hpoint(h: Fraction, v) -> tuple:
    return tuple(h * x for x in v)


def left_act(a: AlgebraElement, xi: StateVector, mp: ModuleParams) -> StateVector:
    """(a xi)(x,k) = sum_n q^{N(Phi,n)} f_n(Phi hbar) xi(x + E n, k + R n)."""
    p = a.params
    if p.D != mp.D:
        raise ValueError("dimension mismatch between algebra and module")
    out = []
    for n, f in a:
        En, Rn = mat_vec(mp.E, n), mat_vec(mp.R, n)
        for (y, j), v in xi:
            x, k = vec_sub(y, En), vec_sub(j, Rn)
            ph = mp.phi(x, k)
            c = q_phase(p, rational_cocycle_exponent(ph, n)) * fs.evaluate(f, _hpoint(p.hbar, ph))
            if c:
                out.append(((x, k), c * v))
    return StateVector(out)


def left_act_at(a: AlgebraElement, xi: Callable, mp: ModuleParams, x, k) -> complex:
    """Pointwise left action on an arbitrary function ``xi(x, k)``."""
    p = a.params
    x, k = as_rat_vector(x), tuple(int(v) for v in k)
    ph = mp.phi(x, k)
    total = 0j
    for n, f in a:
        c = q_phase(p, rational_cocycle_exponent(ph, n)) * fs.evaluate(f, _hpoint(p.hbar, ph))
        if c:
            total += c * xi(vec_add(x, mat_vec(mp.E, n)), vec_add(k, mat_vec(mp.R, n)))
    return total


def discrete_act(a: AlgebraElement, v: DiscreteVector, R, delta) -> DiscreteVector:
    """f_n U^n |k> = q^{N(R^-1 k - n + delta, n)} f_n((R^-1 k - n + delta) hbar) |k - R n>."""
    p = a.params
    R = as_int_matrix(R)
    delta = as_rat_vector(delta)
    if det(R) == 0:
        raise LatticeError("discrete action requires det R != 0")
    Ri = mat_inv(R)
    out = []
    for n, f in a:
        Rn = mat_vec(R, n)
        for k, c0 in v:
            pt = vec_add(vec_sub(mat_vec(Ri, k), n), delta)
            c = q_phase(p, rational_cocycle_exponent(pt, n)) * fs.evaluate(f, _hpoint(p.hbar, pt))
            if c:
                out.append((vec_sub(k, Rn), c * c0))
    return DiscreteVector(out)


# -- right action ---------------------------------------------------------------


def right_act(xi: StateVector, a: AlgebraElement, rp: RightModuleParams) -> StateVector:
    """(xi g)(x,k) = sum_n q^{N(Psi(x,k,eps-n),n)} g_n(Psi(x,k,eps-n) hbar) xi(x - F n, k - P n)."""
    p = a.params
    if p.D != rp.D:
        raise ValueError("dimension mismatch between algebra and module")
    out = []
    for n, g in a:
        Fn, Pn = mat_vec(rp.F, n), mat_vec(rp.P, n)
        neg_n = tuple(-x for x in n)
        for (y, j), v in xi:
            x, k = vec_add(y, Fn), vec_add(j, Pn)
            ps = rp.psi(x, k, neg_n)
            c = q_phase(p, rational_cocycle_exponent(ps, n)) * fs.evaluate(g, _hpoint(p.hbar, ps))
            if c:
                out.append(((x, k), c * v))
    return StateVector(out)


def right_act_at(xi: Callable, a: AlgebraElement, rp: RightModuleParams, x, k) -> complex:
    p = a.params
    x, k = as_rat_vector(x), tuple(int(v) for v in k)
    total = 0j
    for n, g in a:
        ps = rp.psi(x, k, tuple(-v for v in n))
        c = q_phase(p, rational_cocycle_exponent(ps, n)) * fs.evaluate(g, _hpoint(p.hbar, ps))
        if c:
            total += c * xi(vec_sub(x, mat_vec(rp.F, n)), vec_sub(k, mat_vec(rp.P, n)))
    return total


# -- axiom checks --------------------------------------------------------------------


def _dev(u: _SparseVector, v: _SparseVector) -> float:
    """Max entry difference, relative to the larger of the two vectors when above one."""
    return (u - v).norm_max() / max(1.0, u.norm_max(), v.norm_max())


def left_axiom_residual(a, b, xi, mp) -> float:
    return _dev(left_act(a * b, xi, mp), left_act(a, left_act(b, xi, mp), mp))


def right_axiom_residual(xi, a, b, rp) -> float:
    return _dev(right_act(xi, a * b, rp), right_act(right_act(xi, a, rp), b, rp))


@dataclass
class BimoduleReport:
    trials: int
    max_deviation: float
    passed: bool


def bimodule_deviation(a, xi, b, mp, rp) -> float:
    """max |a(xi b) - (a xi) b|."""
    return _dev(left_act(a, right_act(xi, b, rp), mp), right_act(left_act(a, xi, mp), b, rp))


def bimodule_check(a, xi, b, mp, rp, trials: int = 1, rng: random.Random | None = None,
                   tol: float = 1e-10) -> BimoduleReport:
    """Check f(xi g) = (f xi) g on the given triple plus ``trials - 1`` random ones."""
    if not is_bimodule_compatible(mp, rp):
        raise ConstraintError("parameter sets are not bimodule compatible")
    rng = rng or random.Random(0xB1)
    worst = bimodule_deviation(a, xi, b, mp, rp)
    for _ in range(trials - 1):
        a2 = random_element(a.params, rng, n_terms=2, max_index=1, span=1)
        b2 = random_element(b.params, rng, n_terms=2, max_index=1, span=1)
        xi2 = random_state(mp.D, rng)
        worst = max(worst, bimodule_deviation(a2, xi2, b2, mp, rp))
    return BimoduleReport(trials, worst, worst < tol)


def random_state(D: int, rng: random.Random, n_points: int = 3, span: int = 2) -> StateVector:
    out = []
    for _ in range(n_points):
        x = tuple(Fraction(rng.randint(-2 * span, 2 * span), rng.randint(1, 2)) for _ in range(D))
        k = tuple(rng.randint(-span, span) for _ in range(D))
        out.append(((x, k), complex(rng.uniform(-1, 1), rng.uniform(-1, 1))))
    return StateVector(out)


def random_unimodular(D: int, rng: random.Random, steps: int = 4) -> tuple:
    M = [list(r) for r in identity(D)]
    for _ in range(steps):
        if D == 1:
            break
        i, j = rng.sample(range(D), 2)
        c = rng.choice((-1, 1))
        M[i] = [a + c * b for a, b in zip(M[i], M[j])]
    if rng.random() < 0.5:
        M[0] = [-a for a in M[0]]
    if D > 1 and rng.random() < 0.5:
        M[0], M[1] = M[1], M[0]
    return tuple(tuple(r) for r in M)


def _small_rat_matrix(D: int, rng: random.Random) -> tuple:
    return tuple(tuple(Fraction(rng.randint(-2, 2), 2) for _ in range(D)) for _ in range(D))


def random_module_params(D: int, rng: random.Random) -> ModuleParams:
    """Random (L0, E, L1, R, delta) of moderate size satisfying the left constraint."""
    U = random_unimodular(D, rng, 2)
    s = rng.choice((1, 2))
    L0 = tuple(tuple(Fraction(x, s) if i == 0 else Fraction(x) for x in row)
               for i, row in enumerate(U))
    L1 = _small_rat_matrix(D, rng)
    R = tuple(tuple(rng.randint(-1, 1) for _ in range(D)) for _ in range(D))
    E = mat_mul(mat_inv(L0), mat_sub(identity(D), mat_mul(L1, R)))
    delta = tuple(Fraction(rng.randint(-3, 3), rng.randint(1, 4)) for _ in range(D))
    return ModuleParams(L0, E, L1, R, delta)


def random_bimodule_params(D: int, rng: random.Random, P_equals_minus_R: bool = False) -> tuple:
    """Random compatible (left, right) parameters via :func:`solve_bimodule_params`."""
    base = random_module_params(D, rng)
    R = random_unimodular(D, rng, 2)
    P = mat_neg(R) if P_equals_minus_R else random_unimodular(D, rng, 2)
    delta = base.delta
    eps = delta if P_equals_minus_R else tuple(Fraction(rng.randint(-3, 3), 4) for _ in range(D))
    return solve_bimodule_params(base.L0, _small_rat_matrix(D, rng), R, P, delta, eps)


# -- isomorphisms ------------------------------------------------------------------


def delta_iso_map(xi: StateVector, mp: ModuleParams, delta2) -> StateVector:
    """phi(xi)(x,k) = xi(x + E d, k + R d) with d = delta2 - delta."""
    d = vec_sub(as_rat_vector(delta2), mp.delta)
    Rd = mat_vec(mp.R, d)
    if not is_integral(Rd):
        raise ConstraintError("R (delta2 - delta) must be integral")
    Ed = mat_vec(mp.E, d)
    Rd = tuple(int(v) for v in Rd)
    return StateVector(((vec_sub(x, Ed), vec_sub(k, Rd)), v) for (x, k), v in xi)


def with_delta(mp: ModuleParams, delta2) -> ModuleParams:
    return ModuleParams(mp.L0, mp.E, mp.L1, mp.R, delta2)


def transformed_params(mp: ModuleParams, A, B) -> ModuleParams:
    """Parameters (L0 A, A^-1 E, L1 B, B^-1 R) intertwined by phi(xi)(x,k) = xi(Ax, Bk)."""
    A, B = as_rat_matrix(A), as_int_matrix(B)
    if det(A) == 0:
        raise ConstraintError("A must be invertible")
    if not is_unimodular(B):
        raise ConstraintError("B must be unimodular")
    Bi = int_mat_inv(B)
    return ModuleParams(mat_mul(mp.L0, A), mat_mul(mat_inv(A), mp.E), mat_mul(mp.L1, B),
                        mat_mul(Bi, mp.R), mp.delta)


def check_param_iso_conditions(mp: ModuleParams, mp2: ModuleParams, A, B) -> bool:
    A, B = as_rat_matrix(A), as_int_matrix(B)
    return (
        mat_mul(mp.L0, A) == mp2.L0
        and mat_mul(A, mp2.E) == mp.E
        and mat_mul(mp.L1, B) == mp2.L1
        and mat_mul(B, mp2.R) == mp.R
    )


def param_iso_map(xi: StateVector, A, B) -> StateVector:
    """phi(xi)(x,k) = xi(Ax, Bk); support (y, j) moves to (A^-1 y, B^-1 j)."""
    A, B = as_rat_matrix(A), as_int_matrix(B)
    if det(A) == 0:
        raise ConstraintError("A must be invertible")
    if not is_unimodular(B):
        raise ConstraintError("B must be unimodular")
    Ai, Bi = mat_inv(A), int_mat_inv(B)
    return StateVector(((mat_vec(Ai, y), mat_vec(Bi, j)), v) for (y, j), v in xi)


def discrete_iso_map(v: DiscreteVector, R1, d1, R2, d2) -> DiscreteVector:
    """|j> -> |U(j - n)> with U = R2 R1^-1, n = R1 (d2 - d1), from S(R1,d1) to S(R2,d2)."""
    R1, R2 = as_int_matrix(R1), as_int_matrix(R2)
    U = mat_mul(R2, mat_inv(R1))
    n = mat_vec(R1, vec_sub(as_rat_vector(d2), as_rat_vector(d1)))
    if not is_integral(n) or not all(x.denominator == 1 for r in U for x in map(Fraction, r)):
        raise ConstraintError("modules are not isomorphic")
    if abs(det(U)) != 1:
        raise ConstraintError("modules are not isomorphic")
    n = tuple(int(x) for x in n)
    U = tuple(tuple(int(x) for x in r) for r in U)
    return DiscreteVector((mat_vec(U, vec_sub(j, n)), c) for j, c in v)


# -- direct sums and torsion ----------------------------------------------------------


@dataclass(frozen=True)
class Summand:
    rep: tuple
    delta: tuple

    def embed(self, R, m) -> tuple:
        return vec_add(self.rep, mat_vec(as_int_matrix(R), m))


@dataclass(frozen=True)
class DirectSum:
    R: tuple
    delta: tuple
    summands: tuple

    def embed(self, i: int, m) -> tuple:
        return self.summands[i].embed(self.R, m)

    def assemble(self, parts: list) -> DiscreteVector:
        """Map a list of vectors in S(I, delta_i) into S(R, delta)."""
        out = []
        for i, v in enumerate(parts):
            out.extend((self.embed(i, m), c) for m, c in v)
        return DiscreteVector(out)

    def locate(self, k) -> tuple:
        """Inverse of the embedding: (summand index, m)."""
        Ri = mat_inv(self.R)
        for i, s in enumerate(self.summands):
            m = mat_vec(Ri, vec_sub(tuple(k), s.rep))
            if is_integral(m):
                return i, tuple(int(x) for x in m)
        raise LatticeError(f"{k} not covered")

    def split(self, v: DiscreteVector) -> list:
        parts: list = [[] for _ in self.summands]
        for k, c in v:
            i, m = self.locate(k)
            parts[i].append((m, c))
        return [DiscreteVector(p) for p in parts]


def decompose_direct_sum(R, delta) -> DirectSum:
    """S(R, delta) as the sum over coset reps n_i of S(I, R^-1 n_i + delta)."""
    R = as_int_matrix(R)
    delta = as_rat_vector(delta)
    cs = coset_representatives(R)
    Ri = mat_inv(R)
    summands = tuple(Summand(rep, vec_add(mat_vec(Ri, rep), delta)) for rep in cs.reps)
    return DirectSum(R, delta, summands)


def torsion_annihilator(v: DiscreteVector, f, k0, R, delta, params: AlgebraParams) -> AlgebraElement:
    """f_I = prod_{k in supp v} S_{(k0 - R^-1 k) hbar} f, which kills v exactly."""
    R = as_int_matrix(R)
    delta = as_rat_vector(delta)
    if isinstance(f, str):
        f = fs.parse(f, params.D)
    h = params.hbar
    k0 = tuple(int(x) for x in k0)
    if fs.is_zero_at(f, _hpoint(h, vec_add(k0, delta))) is not True:
        raise ValueError("f must vanish exactly at (k0 + delta) hbar")
    if len(v) == 0:
        raise ValueError("v must be nonzero")
    Ri = mat_inv(R)
    factors = [fs.shift(f, _hpoint(h, vec_sub(k0, mat_vec(Ri, k)))) for k, _ in sorted(v)]
    return AlgebraElement(params, {(0,) * params.D: fs.mul(*factors)})


def annihilates_exactly(a: AlgebraElement, v: DiscreteVector, R, delta) -> bool:
    """Exact check that a function element kills every support point of v."""
    R = as_int_matrix(R)
    delta = as_rat_vector(delta)
    Ri = mat_inv(R)
    f = a.coefficient((0,) * a.params.D)
    if set(a.terms) - {(0,) * a.params.D}:
        raise ValueError("only function elements are supported")
    for k, c in v:
        if c == 0:
            continue
        pt = _hpoint(a.params.hbar, vec_add(mat_vec(Ri, k), delta))
        if fs.is_zero_at(f, pt) is not True:
            return False
    return True


# -- homomorphism from the algebra into the bimodule ----------------------------------------


def free_iso_phi(a: AlgebraElement, points, mp: ModuleParams) -> StateVector:
    """phi(a)(x,k) = q^{-N(Phi, R^-1 k)} f_{-R^-1 k}(Phi hbar) at the requested points."""
    fn = phi_function(a, mp)
    return StateVector(((x, k), fn(x, k)) for x, k in points)


def phi_function(a: AlgebraElement, mp: ModuleParams) -> Callable:
    if not is_unimodular(mp.R):
        raise LatticeError("R must be unimodular")
    Ri = int_mat_inv(mp.R)
    p = a.params

    def fn(x, k) -> complex:
        x, k = as_rat_vector(x), tuple(int(v) for v in k)
        m = mat_vec(Ri, k)
        f = a.coefficient(tuple(-v for v in m))
        ph = mp.phi(x, k)
        return q_phase(p, -rational_cocycle_exponent(ph, m)) * fs.evaluate(f, _hpoint(p.hbar, ph))

    return fn


def phi_left_deviation(a, b, mp: ModuleParams, points) -> float:
    """max |phi(a b) - a phi(b)| over the given points."""
    lhs = phi_function(a * b, mp)
    rhs_inner = phi_function(b, mp)
    return max(abs(lhs(x, k) - left_act_at(a, rhs_inner, mp, x, k)) for x, k in points)


def phi_right_deviation(a, b, mp: ModuleParams, rp: RightModuleParams, points) -> float:
    """max |phi(a b) - phi(a) b| over the given points."""
    lhs = phi_function(a * b, mp)
    inner = phi_function(a, mp)
    return max(abs(lhs(x, k) - right_act_at(inner, b, rp, x, k)) for x, k in points)
