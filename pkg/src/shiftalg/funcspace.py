"""Expression trees for functions on R^D.

The supported family is closed under translation, dilation and complex
conjugation: polynomials with Gaussian-rational coefficients, square roots of
such polynomials, exponentials of linear forms, and sums/products of these.
Zero tests at rational points are exact whenever the tree allows it.
"""

from __future__ import annotations

import cmath
import math
import random
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

__all__ = [
    "GaussQ",
    "FunctionExpr",
    "Const",
    "PolyQ",
    "SqrtPoly",
    "ExpLin",
    "Shift",
    "Scale",
    "Sum",
    "Prod",
    "ParseError",
    "const",
    "var",
    "add",
    "mul",
    "neg",
    "sqrt",
    "shift",
    "scale",
    "conjugate",
    "evaluate",
    "exact_value",
    "is_zero_at",
    "is_identically_zero",
    "probably_equal",
    "random_point",
    "random_poly",
    "random_function",
    "lift",
    "parse",
    "to_str",
]


# -- Gaussian rationals ---------------------------------------------------


@dataclass(frozen=True)
class GaussQ:
    re: Fraction = Fraction(0)
    im: Fraction = Fraction(0)

    @staticmethod
    def of(x) -> "GaussQ":
        if isinstance(x, GaussQ):
            return x
        if isinstance(x, complex):
            raise TypeError("complex floats are not exact; build a GaussQ explicitly")
        return GaussQ(Fraction(x), Fraction(0))

    def __add__(self, o):
        o = GaussQ.of(o)
        return GaussQ(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __neg__(self):
        return GaussQ(-self.re, -self.im)

    def __sub__(self, o):
        return self + (-GaussQ.of(o))

    def __rsub__(self, o):
        return GaussQ.of(o) - self

    def __mul__(self, o):
        o = GaussQ.of(o)
        return GaussQ(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, o):
        o = GaussQ.of(o)
        n = o.re * o.re + o.im * o.im
        if n == 0:
            raise ZeroDivisionError("division by zero")
        return self * GaussQ(o.re / n, -o.im / n)

    def __pow__(self, e: int):
        out = GaussQ(Fraction(1))
        for _ in range(e):
            out = out * self
        return out

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def conj(self) -> "GaussQ":
        return GaussQ(self.re, -self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    @property
    def is_real(self) -> bool:
        return self.im == 0

    def __str__(self):
        return _fmt_gauss(self)


ZERO = GaussQ()
ONE = GaussQ(Fraction(1))
I_UNIT = GaussQ(Fraction(0), Fraction(1))


def _fmt_q(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _fmt_gauss(c: GaussQ) -> str:
    if c.im == 0:
        return _fmt_q(c.re)
    im = "i" if c.im == 1 else "-i" if c.im == -1 else f"{_fmt_q(c.im)}*i"
    if c.re == 0:
        return im
    sign = "-" if c.im < 0 else "+"
    mag = "i" if abs(c.im) == 1 else f"{_fmt_q(abs(c.im))}*i"
    return f"({_fmt_q(c.re)} {sign} {mag})"


def _exact_sqrt(x: Fraction) -> Fraction | None:
    if x < 0:
        return None
    n, d = x.numerator, x.denominator
    rn, rd = math.isqrt(n), math.isqrt(d)
    if rn * rn == n and rd * rd == d:
        return Fraction(rn, rd)
    return None


def branch_sqrt(z: complex) -> complex:
    """Square root with the convention sqrt(x) = i*sqrt(|x|) for real x < 0."""
    if z.imag == 0:
        x = z.real
        return complex(math.sqrt(x), 0.0) if x >= 0 else complex(0.0, math.sqrt(-x))
    return cmath.sqrt(z)


# -- nodes ----------------------------------------------------------------


class FunctionExpr:
    """Base class; concrete nodes are frozen dataclasses."""

    def __add__(self, other):
        return add(self, lift(other))

    def __radd__(self, other):
        return add(lift(other), self)

    def __sub__(self, other):
        return add(self, neg(lift(other)))

    def __rsub__(self, other):
        return add(lift(other), neg(self))

    def __mul__(self, other):
        return mul(self, lift(other))

    def __rmul__(self, other):
        return mul(lift(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, e: int):
        return mul(*([self] * e)) if e else const(1)

    def __call__(self, *point):
        if len(point) == 1 and isinstance(point[0], (tuple, list)):
            point = tuple(point[0])
        return evaluate(self, point)

    def __str__(self):
        return to_str(self)


def lift(x) -> FunctionExpr:
    if isinstance(x, FunctionExpr):
        return x
    return Const(GaussQ.of(x))


@dataclass(frozen=True, eq=True)
class Const(FunctionExpr):
    value: GaussQ


@dataclass(frozen=True, eq=True)
class PolyQ(FunctionExpr):
    """Polynomial: sorted tuple of (exponent tuple, coefficient)."""

    D: int
    terms: tuple

    @staticmethod
    def from_dict(D: int, d: dict) -> "PolyQ":
        return PolyQ(D, tuple(sorted((e, c) for e, c in d.items() if c)))

    def as_dict(self) -> dict:
        return dict(self.terms)

    @property
    def degree(self) -> int:
        return max((sum(e) for e, _ in self.terms), default=0)

    def value(self, p: Sequence[Fraction]) -> GaussQ:
        out = ZERO
        for e, c in self.terms:
            m = Fraction(1)
            for x, k in zip(p, e):
                if k:
                    m *= x**k
            out = out + c * m
        return out


@dataclass(frozen=True, eq=True)
class SqrtPoly(FunctionExpr):
    """Branch square root of a polynomial; ``conj`` marks the conjugated branch."""

    poly: PolyQ
    conj: bool = False


@dataclass(frozen=True, eq=True)
class ExpLin(FunctionExpr):
    """exp(i*c*(lam . u + phase)) with c = 2*pi when ``turns`` else 1."""

    lam: tuple
    phase: Fraction = Fraction(0)
    turns: bool = False


@dataclass(frozen=True, eq=True)
class Shift(FunctionExpr):
    child: FunctionExpr
    offset: tuple


@dataclass(frozen=True, eq=True)
class Scale(FunctionExpr):
    child: FunctionExpr
    factor: Fraction


@dataclass(frozen=True, eq=True)
class Sum(FunctionExpr):
    children: tuple


@dataclass(frozen=True, eq=True)
class Prod(FunctionExpr):
    children: tuple


# -- constructors ----------------------------------------------------------


def const(x) -> Const:
    return Const(GaussQ.of(x))


def var(i: int, D: int) -> PolyQ:
    """The coordinate function u_{i+1} (``i`` is 0-based)."""
    if not 0 <= i < D:
        raise ValueError(f"variable index {i} out of range for D={D}")
    e = tuple(1 if j == i else 0 for j in range(D))
    return PolyQ(D, ((e, ONE),))


def _const_poly(D: int, c: GaussQ) -> PolyQ:
    return PolyQ.from_dict(D, {(0,) * D: c})


def _poly_add(a: PolyQ, b: PolyQ) -> PolyQ:
    if a.D != b.D:
        raise ValueError(f"dimension mismatch {a.D} vs {b.D}")
    d = a.as_dict()
    for e, c in b.terms:
        d[e] = d.get(e, ZERO) + c
    return PolyQ.from_dict(a.D, d)


def _poly_mul(a: PolyQ, b: PolyQ) -> PolyQ:
    if a.D != b.D:
        raise ValueError(f"dimension mismatch {a.D} vs {b.D}")
    d: dict = {}
    for e1, c1 in a.terms:
        for e2, c2 in b.terms:
            e = tuple(x + y for x, y in zip(e1, e2))
            d[e] = d.get(e, ZERO) + c1 * c2
    return PolyQ.from_dict(a.D, d)


def _poly_scale_coeff(a: PolyQ, c: GaussQ) -> PolyQ:
    return PolyQ.from_dict(a.D, {e: v * c for e, v in a.terms})


def _quarter_const(e: ExpLin) -> Const | None:
    """An ExpLin with lam == 0 and a quarter-turn phase is an exact constant."""
    if any(e.lam) or not e.turns:
        if not any(e.lam) and e.phase == 0:
            return Const(ONE)
        return None
    t = e.phase % 1
    table = {
        Fraction(0): ONE,
        Fraction(1, 4): I_UNIT,
        Fraction(1, 2): -ONE,
        Fraction(3, 4): -I_UNIT,
    }
    return Const(table[t]) if t in table else None


def _norm_exp(e: ExpLin) -> FunctionExpr:
    if e.turns:
        e = ExpLin(e.lam, e.phase % 1, True)
    c = _quarter_const(e)
    return c if c is not None else e


def add(*fs: FunctionExpr) -> FunctionExpr:
    """Sum with constant folding and polynomial collection."""
    flat: list = []
    for f in fs:
        f = lift(f)
        flat.extend(f.children if isinstance(f, Sum) else [f])
    cval = ZERO
    poly: PolyQ | None = None
    rest: list = []
    for f in flat:
        if isinstance(f, Const):
            cval = cval + f.value
        elif isinstance(f, PolyQ):
            poly = f if poly is None else _poly_add(poly, f)
        else:
            rest.append(f)
    if poly is not None:
        poly = _poly_add(poly, _const_poly(poly.D, cval))
        head = [] if not poly.terms else [poly]
    else:
        head = [Const(cval)] if cval else []
    items = head + rest
    if not items:
        return Const(ZERO)
    if len(items) == 1:
        return items[0]
    if len(head) == 1 and isinstance(head[0], PolyQ) and len(head[0].terms) == 1 and head[0].degree == 0:
        items[0] = Const(head[0].terms[0][1])
    return Sum(tuple(items))


def mul(*fs: FunctionExpr) -> FunctionExpr:
    """Product with constant folding, polynomial collection and exp merging."""
    flat: list = []
    for f in fs:
        f = lift(f)
        flat.extend(f.children if isinstance(f, Prod) else [f])
    cval = ONE
    poly: PolyQ | None = None
    exps: dict = {}
    rest: list = []
    for f in flat:
        if isinstance(f, Const):
            cval = cval * f.value
        elif isinstance(f, PolyQ):
            poly = f if poly is None else _poly_mul(poly, f)
        elif isinstance(f, ExpLin):
            prev = exps.get(f.turns)
            if prev is None:
                exps[f.turns] = f
            else:
                exps[f.turns] = ExpLin(
                    tuple(a + b for a, b in zip(prev.lam, f.lam)), prev.phase + f.phase, f.turns
                )
        else:
            rest.append(f)
    if not cval:
        return Const(ZERO)
    for key in sorted(exps):
        e = _norm_exp(exps[key])
        if isinstance(e, Const):
            cval = cval * e.value
        else:
            rest.insert(0, e)
    if poly is not None:
        poly = _poly_scale_coeff(poly, cval)
        if not poly.terms:
            return Const(ZERO)
        head = [poly]
    else:
        head = [] if cval == ONE and rest else [Const(cval)]
    items = head + rest
    if len(items) == 1:
        return items[0]
    return Prod(tuple(items))


def neg(f: FunctionExpr) -> FunctionExpr:
    return mul(Const(-ONE), f)


def sqrt(f: FunctionExpr) -> SqrtPoly:
    f = lift(f)
    if isinstance(f, Const):
        # radicand dimension is unknown; use D=1 constant polynomial
        f = _const_poly(1, f.value)
    if not isinstance(f, PolyQ):
        raise ValueError("sqrt() only accepts polynomial radicands")
    return SqrtPoly(f)


# -- shift / scale / conjugate ------------------------------------------------


def _poly_shift(p: PolyQ, a: Sequence[Fraction]) -> PolyQ:
    d: dict = {}
    for e, c in p.terms:
        # expand prod_i (u_i + a_i)^{e_i}
        parts = [{(0,) * p.D: c}]
        for i, k in enumerate(e):
            if k == 0:
                continue
            nxt: dict = {}
            for mono, coeff in parts[-1].items():
                for j in range(k + 1):
                    w = coeff * (math.comb(k, j) * a[i] ** (k - j))
                    if not w:
                        continue
                    m = list(mono)
                    m[i] += j
                    m = tuple(m)
                    nxt[m] = nxt.get(m, ZERO) + w
            parts.append(nxt)
        for mono, coeff in parts[-1].items():
            d[mono] = d.get(mono, ZERO) + coeff
    return PolyQ.from_dict(p.D, d)


def shift(f: FunctionExpr, offset: Sequence) -> FunctionExpr:
    """u -> f(u + offset), pushed down to the leaves."""
    a = tuple(Fraction(x) for x in offset)
    if not any(a):
        return f
    if isinstance(f, Const):
        return f
    if isinstance(f, PolyQ):
        _check_dim(f.D, a)
        return _poly_shift(f, a)
    if isinstance(f, SqrtPoly):
        return SqrtPoly(_poly_shift(f.poly, a), f.conj)
    if isinstance(f, ExpLin):
        _check_dim(len(f.lam), a)
        return _norm_exp(ExpLin(f.lam, f.phase + sum(l * x for l, x in zip(f.lam, a)), f.turns))
    if isinstance(f, Sum):
        return add(*(shift(c, a) for c in f.children))
    if isinstance(f, Prod):
        return mul(*(shift(c, a) for c in f.children))
    if isinstance(f, Shift):
        return shift(f.child, tuple(x + y for x, y in zip(f.offset, a)))
    if isinstance(f, Scale):
        return scale(shift(f.child, tuple(f.factor * x for x in a)), f.factor)
    raise TypeError(f"unknown node {type(f).__name__}")


def scale(f: FunctionExpr, lam) -> FunctionExpr:
    """u -> f(lam * u)."""
    lam = Fraction(lam)
    if lam == 1 or isinstance(f, Const):
        return f
    if isinstance(f, PolyQ):
        return PolyQ.from_dict(f.D, {e: c * lam ** sum(e) for e, c in f.terms})
    if isinstance(f, SqrtPoly):
        return SqrtPoly(scale(f.poly, lam), f.conj)
    if isinstance(f, ExpLin):
        return _norm_exp(ExpLin(tuple(lam * l for l in f.lam), f.phase, f.turns))
    if isinstance(f, Sum):
        return add(*(scale(c, lam) for c in f.children))
    if isinstance(f, Prod):
        return mul(*(scale(c, lam) for c in f.children))
    if isinstance(f, Shift):
        return scale(shift(f.child, f.offset), lam)
    if isinstance(f, Scale):
        return scale(f.child, f.factor * lam)
    raise TypeError(f"unknown node {type(f).__name__}")


def conjugate(f: FunctionExpr) -> FunctionExpr:
    """Pointwise complex conjugate (at real points)."""
    if isinstance(f, Const):
        return Const(f.value.conj())
    if isinstance(f, PolyQ):
        return PolyQ(f.D, tuple((e, c.conj()) for e, c in f.terms))
    if isinstance(f, SqrtPoly):
        return SqrtPoly(f.poly, not f.conj)
    if isinstance(f, ExpLin):
        return _norm_exp(ExpLin(tuple(-l for l in f.lam), -f.phase, f.turns))
    if isinstance(f, Sum):
        return add(*(conjugate(c) for c in f.children))
    if isinstance(f, Prod):
        return mul(*(conjugate(c) for c in f.children))
    if isinstance(f, Shift):
        return Shift(conjugate(f.child), f.offset)
    if isinstance(f, Scale):
        return Scale(conjugate(f.child), f.factor)
    raise TypeError(f"unknown node {type(f).__name__}")


def _check_dim(D: int, p: Sequence) -> None:
    if len(p) != D:
        raise ValueError(f"dimension mismatch: expected {D}, got {len(p)}")


# -- evaluation ------------------------------------------------------------


def _is_exact_point(p) -> bool:
    return all(isinstance(x, (int, Fraction)) for x in p)


def evaluate(f: FunctionExpr, point: Sequence) -> complex:
    """Numerical value at ``point`` (rationals are used exactly where possible)."""
    p = tuple(point)
    exact = _is_exact_point(p)
    if exact:
        p = tuple(Fraction(x) for x in p)
    return _eval(f, p, exact)


def _eval(f, p, exact) -> complex:
    if isinstance(f, Const):
        return complex(f.value)
    if isinstance(f, PolyQ):
        _check_dim(f.D, p)
        if exact:
            return complex(f.value(p))
        out = 0j
        for e, c in f.terms:
            m = complex(c)
            for x, k in zip(p, e):
                if k:
                    m *= x**k
            out += m
        return out
    if isinstance(f, SqrtPoly):
        r = _eval(f.poly, p, exact)
        v = branch_sqrt(r)
        return v.conjugate() if f.conj else v
    if isinstance(f, ExpLin):
        _check_dim(len(f.lam), p)
        if f.turns:
            if exact:
                t = (sum(l * x for l, x in zip(f.lam, p)) + f.phase) % 1
                return cmath.exp(2j * math.pi * float(t))
            t = sum(float(l) * x for l, x in zip(f.lam, p)) + float(f.phase)
            return cmath.exp(2j * math.pi * t)
        t = sum(float(l) * float(x) for l, x in zip(f.lam, p)) + float(f.phase)
        return cmath.exp(1j * t)
    if isinstance(f, Sum):
        return sum((_eval(c, p, exact) for c in f.children), 0j)
    if isinstance(f, Prod):
        out = 1 + 0j
        for c in f.children:
            out *= _eval(c, p, exact)
        return out
    if isinstance(f, Shift):
        return _eval(f.child, tuple(x + a for x, a in zip(p, f.offset)), exact)
    if isinstance(f, Scale):
        return _eval(f.child, tuple(f.factor * x for x in p), exact)
    raise TypeError(f"unknown node {type(f).__name__}")


def exact_value(f: FunctionExpr, point: Sequence) -> GaussQ | None:
    """Exact value at a rational point, or None when not representable."""
    p = tuple(Fraction(x) for x in point)
    if isinstance(f, Const):
        return f.value
    if isinstance(f, PolyQ):
        _check_dim(f.D, p)
        return f.value(p)
    if isinstance(f, SqrtPoly):
        r = f.poly.value(p)
        if r.im != 0:
            return None if r else ZERO
        s = _exact_sqrt(abs(r.re))
        if s is None:
            return None
        v = GaussQ(s) if r.re >= 0 else GaussQ(Fraction(0), s)
        return v.conj() if f.conj else v
    if isinstance(f, ExpLin):
        if not f.turns:
            return ONE if not any(l * x for l, x in zip(f.lam, p)) and f.phase == 0 else None
        t = sum(l * x for l, x in zip(f.lam, p)) + f.phase
        c = _quarter_const(ExpLin(tuple(0 for _ in f.lam), t, True))
        return None if c is None else c.value
    if isinstance(f, Sum):
        out = ZERO
        for c in f.children:
            v = exact_value(c, p)
            if v is None:
                return None
            out = out + v
        return out
    if isinstance(f, Prod):
        vals = [exact_value(c, p) for c in f.children]
        if any(v is not None and not v for v in vals):
            return ZERO
        if any(v is None for v in vals):
            return None
        out = ONE
        for v in vals:
            out = out * v
        return out
    if isinstance(f, Shift):
        return exact_value(f.child, tuple(x + a for x, a in zip(p, f.offset)))
    if isinstance(f, Scale):
        return exact_value(f.child, tuple(f.factor * x for x in p))
    raise TypeError(f"unknown node {type(f).__name__}")


def is_zero_at(f: FunctionExpr, point: Sequence) -> bool | None:
    """True/False when decidable exactly, None otherwise."""
    p = tuple(Fraction(x) for x in point)
    if isinstance(f, SqrtPoly):
        r = f.poly.value(p)
        return not r
    if isinstance(f, ExpLin):
        return False
    if isinstance(f, Prod):
        verdicts = [is_zero_at(c, p) for c in f.children]
        if any(v is True for v in verdicts):
            return True
        if all(v is False for v in verdicts):
            return False
        return None
    if isinstance(f, Shift):
        return is_zero_at(f.child, tuple(x + a for x, a in zip(p, f.offset)))
    if isinstance(f, Scale):
        return is_zero_at(f.child, tuple(f.factor * x for x in p))
    v = exact_value(f, p)
    if v is None:
        return None
    return not v


def random_point(D: int, rng: random.Random, span: int = 5, den: int = 7) -> tuple:
    return tuple(Fraction(rng.randint(-span * den, span * den), rng.randint(1, den)) for _ in range(D))


def _rand_q(rng: random.Random, span: int = 3, den: int = 4) -> Fraction:
    return Fraction(rng.randint(-span * den, span * den), rng.randint(1, den))


def random_poly(D: int, rng: random.Random, max_deg: int = 2, n_terms: int = 3,
                complex_coeffs: bool = True, span: int = 3) -> PolyQ:
    d = {}
    for _ in range(n_terms):
        deg = rng.randint(0, max_deg)
        e = [0] * D
        for _ in range(deg):
            e[rng.randrange(D)] += 1
        im = _rand_q(rng, span) if complex_coeffs and rng.random() < 0.3 else Fraction(0)
        d[tuple(e)] = d.get(tuple(e), ZERO) + GaussQ(_rand_q(rng, span), im)
    p = PolyQ.from_dict(D, d)
    return p if p.terms else _const_poly(D, ONE)


def random_function(D: int, rng: random.Random, rich: bool = True, span: int = 3) -> FunctionExpr:
    """A small random tree: polynomial, optionally times sqrt and exp factors."""
    f: FunctionExpr = random_poly(D, rng, span=span)
    if rich and rng.random() < 0.4:
        f = add(f, mul(Const(GaussQ(_rand_q(rng, span))), SqrtPoly(random_poly(D, rng, 1, 2, False, span))))
    if rich and rng.random() < 0.4:
        lam = tuple(_rand_q(rng, 1, 5) for _ in range(D))
        f = mul(f, ExpLin(lam, _rand_q(rng, 1, 8), rng.random() < 0.5))
    return f


def is_identically_zero(f: FunctionExpr, D: int, rng: random.Random | None = None, trials: int = 8,
                        tol: float = 1e-10) -> bool:
    """Exact for polynomials and constants; randomized otherwise."""
    if isinstance(f, Const):
        return not f.value
    if isinstance(f, PolyQ):
        return not f.terms
    rng = rng or random.Random(0x5EED)
    for _ in range(trials):
        p = random_point(D, rng)
        v = is_zero_at(f, p)
        if v is False:
            return False
        if v is None and abs(evaluate(f, p)) > tol:
            return False
    return True


def probably_equal(f: FunctionExpr, g: FunctionExpr, D: int, trials: int = 8,
                   rng: random.Random | None = None, tol: float = 1e-10) -> bool:
    rng = rng or random.Random(0x5EED)
    for _ in range(trials):
        p = random_point(D, rng)
        a, b = evaluate(f, p), evaluate(g, p)
        if abs(a - b) > tol * max(1.0, abs(a), abs(b)):
            return False
    return True


# -- printing --------------------------------------------------------------


def _fmt_mono(e: tuple) -> str:
    parts = []
    for i, k in enumerate(e):
        if k == 1:
            parts.append(f"u{i + 1}")
        elif k > 1:
            parts.append(f"u{i + 1}^{k}")
    return "*".join(parts)


def _fmt_poly(p: PolyQ) -> str:
    if not p.terms:
        return "0"
    out = []
    # highest total degree first, which reads naturally
    for e, c in sorted(p.terms, key=lambda t: (-sum(t[0]), t[0])):
        mono = _fmt_mono(e)
        if c.is_real:
            sign = "-" if c.re < 0 else "+"
            mag = abs(c.re)
            if mono:
                body = mono if mag == 1 else f"{_fmt_q(mag)}*{mono}"
            else:
                body = _fmt_q(mag)
        else:
            sign = "+"
            cs = _fmt_gauss(c)
            if not cs.startswith("("):
                cs = f"({cs})"
            body = f"{cs}*{mono}" if mono else cs
        out.append((sign, body))
    s = ("-" if out[0][0] == "-" else "") + out[0][1]
    for sign, body in out[1:]:
        s += f" {sign} {body}"
    return s


def _fmt_vec(v) -> str:
    return ", ".join(_fmt_q(Fraction(x)) for x in v)


def to_str(f: FunctionExpr) -> str:
    """Text form accepted by :func:`parse`."""
    if isinstance(f, Const):
        return _fmt_gauss(f.value)
    if isinstance(f, PolyQ):
        return _fmt_poly(f)
    if isinstance(f, SqrtPoly):
        s = f"sqrt({_fmt_poly(f.poly)})"
        return f"conj({s})" if f.conj else s
    if isinstance(f, ExpLin):
        name = "exp_2pi_i" if f.turns else "exp_i"
        tail = f"; {_fmt_q(f.phase)}" if f.phase else ""
        return f"{name}({_fmt_vec(f.lam)}{tail})"
    if isinstance(f, Sum):
        return " + ".join(_wrap(c, Sum) for c in f.children)
    if isinstance(f, Prod):
        return "*".join(_wrap(c, Prod) for c in f.children)
    if isinstance(f, Shift):
        return f"shift({to_str(f.child)}; {_fmt_vec(f.offset)})"
    if isinstance(f, Scale):
        return f"scale({to_str(f.child)}; {_fmt_q(f.factor)})"
    raise TypeError(f"unknown node {type(f).__name__}")


def _wrap(c: FunctionExpr, parent) -> str:
    s = to_str(c)
    if parent is Prod and (isinstance(c, Sum) or (isinstance(c, PolyQ) and len(c.terms) > 1)):
        return f"({s})"
    if parent is Prod and isinstance(c, (PolyQ, Const)) and s.startswith("-"):
        return f"({s})"
    return s


# -- parsing ---------------------------------------------------------------


class ParseError(ValueError):
    def __init__(self, msg: str, pos: int):
        super().__init__(f"{msg} at position {pos}")
        self.pos = pos


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),;]))"
)
_FUNCS = {"sqrt", "conj", "exp_i", "exp_2pi_i", "shift", "scale"}


def _tokenize(text: str) -> list:
    toks = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append((kind, m.group(kind), start))
        pos = m.end()
    toks.append(("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str, D: int):
        self.toks = _tokenize(text)
        self.i = 0
        self.D = D

    def peek(self):
        return self.toks[self.i]

    def take(self, value=None, kind=None):
        tok = self.toks[self.i]
        if value is not None and tok[1] != value:
            raise ParseError(f"expected {value!r}, found {tok[1]!r}", tok[2])
        if kind is not None and tok[0] != kind:
            raise ParseError(f"expected {kind}, found {tok[1]!r}", tok[2])
        self.i += 1
        return tok

    def parse(self) -> FunctionExpr:
        f = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ParseError(f"unexpected token {tok[1]!r}", tok[2])
        return f

    def expr(self) -> FunctionExpr:
        f = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            g = self.term()
            f = add(f, g) if op == "+" else add(f, neg(g))
        return f

    def term(self) -> FunctionExpr:
        f = self.factor()
        while self.peek()[1] in ("*", "/"):
            _, op, pos = self.take()
            g = self.factor()
            if op == "*":
                f = mul(f, g)
            else:
                if not isinstance(g, Const) or not g.value:
                    raise ParseError("division only by nonzero constants", pos)
                f = mul(f, Const(ONE / g.value))
        return f

    def factor(self) -> FunctionExpr:
        if self.peek()[1] == "-":
            self.take()
            return neg(self.factor())
        if self.peek()[1] == "+":
            self.take()
            return self.factor()
        f = self.atom()
        if self.peek()[1] == "^":
            self.take()
            e = int(self.take(kind="num")[1])
            f = f**e
        return f

    def rational(self) -> Fraction:
        sign = 1
        while self.peek()[1] in ("-", "+"):
            if self.take()[1] == "-":
                sign = -sign
        n = int(self.take(kind="num")[1])
        if self.peek()[1] == "/":
            self.take()
            d = int(self.take(kind="num")[1])
            if d == 0:
                raise ParseError("zero denominator", self.toks[self.i - 1][2])
            return sign * Fraction(n, d)
        return Fraction(sign * n)

    def vector(self) -> tuple:
        out = [self.rational()]
        while self.peek()[1] == ",":
            self.take()
            out.append(self.rational())
        return tuple(out)

    def atom(self) -> FunctionExpr:
        kind, val, pos = self.take()
        if kind == "num":
            return const(int(val))
        if val == "(":
            f = self.expr()
            self.take(")")
            return f
        if kind == "name":
            if val == "i":
                return Const(I_UNIT)
            m = re.fullmatch(r"u(\d*)", val)
            if m:
                idx = int(m.group(1)) if m.group(1) else 1
                if idx < 1:
                    raise ParseError("variables are 1-based", pos)
                if idx > self.D:
                    raise ParseError(f"variable u{idx} exceeds dimension {self.D}", pos)
                return var(idx - 1, self.D)
            if val in _FUNCS:
                return self.call(val, pos)
            raise ParseError(f"unknown name {val!r}", pos)
        raise ParseError(f"unexpected token {val!r}", pos)

    def call(self, name: str, pos: int) -> FunctionExpr:
        self.take("(")
        if name in ("exp_i", "exp_2pi_i"):
            lam = self.vector()
            if len(lam) != self.D:
                raise ParseError(f"{name} needs {self.D} coefficients", pos)
            phase = Fraction(0)
            if self.peek()[1] == ";":
                self.take()
                phase = self.rational()
            self.take(")")
            return _norm_exp(ExpLin(lam, phase, name == "exp_2pi_i"))
        inner = self.expr()
        if name == "sqrt":
            self.take(")")
            if isinstance(inner, Const):
                inner = _const_poly(self.D, inner.value)
            if not isinstance(inner, PolyQ):
                raise ParseError("sqrt() needs a polynomial radicand", pos)
            return SqrtPoly(inner)
        if name == "conj":
            self.take(")")
            return conjugate(inner)
        self.take(";")
        if name == "shift":
            off = self.vector()
            if len(off) != self.D:
                raise ParseError(f"shift needs {self.D} offsets", pos)
            self.take(")")
            return Shift(inner, off)
        lam = self.rational()
        self.take(")")
        return Scale(inner, lam)


def _infer_dim(text: str) -> int:
    D = 1
    for m in re.finditer(r"\bu(\d+)\b", text):
        D = max(D, int(m.group(1)))
    for m in re.finditer(r"\bexp_(?:2pi_)?i\s*\(([^;)]*)", text):
        D = max(D, m.group(1).count(",") + 1)
    return D


def parse(text: str, D: int | None = None) -> FunctionExpr:
    """Parse an expression; ``D`` defaults to the largest variable index used."""
    if D is None:
        D = _infer_dim(text)
    if D < 1:
        raise ValueError("dimension must be >= 1")
    return _Parser(text, D).parse()


def dimension_of(f: FunctionExpr) -> int | None:
    """Ambient dimension recorded in the tree, or None for pure constants."""
    if isinstance(f, PolyQ):
        return f.D
    if isinstance(f, SqrtPoly):
        return f.poly.D
    if isinstance(f, ExpLin):
        return len(f.lam)
    if isinstance(f, (Sum, Prod)):
        for c in f.children:
            d = dimension_of(c)
            if d is not None:
                return d
        return None
    if isinstance(f, Shift):
        return len(f.offset)
    if isinstance(f, Scale):
        return dimension_of(f.child)
    return None


def leaves(f: FunctionExpr) -> Iterable[FunctionExpr]:
    if isinstance(f, (Sum, Prod)):
        for c in f.children:
            yield from leaves(c)
    elif isinstance(f, (Shift, Scale)):
        yield from leaves(f.child)
    else:
        yield f
