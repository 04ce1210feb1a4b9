"""Elements sum_k f_k U^k of the shift algebra with parameters (D, hbar, q).

q is stored as a rational number of turns, q = exp(2*pi*i*q_turns), so every
power q^N is an exact phase.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from . import funcspace as fs
from .funcspace import ExpLin, FunctionExpr
from .lattice import cocycle_exponent, fmt_rational

MultiIndex = tuple


class ParameterMismatch(ValueError):
    pass


@dataclass(frozen=True)
class AlgebraParams:
    D: int
    hbar: Fraction
    q_turns: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "hbar", Fraction(self.hbar))
        object.__setattr__(self, "q_turns", Fraction(self.q_turns) % 1)
        if self.D < 1:
            raise ValueError("D must be positive")
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")


def q_power(params: AlgebraParams, N) -> FunctionExpr:
    """q^N as a constant-phase expression (exact turns)."""
    return fs.mul(ExpLin((Fraction(0),) * params.D, params.q_turns * Fraction(N), True))


class AlgebraElement:
    """Immutable finite sum of f_k U^k, stored in left-collected form."""

    __slots__ = ("params", "_terms")

    def __init__(self, params: AlgebraParams, terms: Mapping | Iterable = ()):
        self.params = params
        items = terms.items() if isinstance(terms, Mapping) else terms
        clean = {}
        for k, f in items:
            k = tuple(int(x) for x in k)
            if len(k) != params.D:
                raise ValueError(f"index {k} has wrong dimension")
            f = fs.lift(f)
            d = fs.dimension_of(f)
            if d is not None and d != params.D:
                raise ValueError(f"coefficient dimension {d} != {params.D}")
            clean[k] = fs.add(clean[k], f) if k in clean else f
        self._terms = {k: f for k, f in sorted(clean.items()) if not _is_zero(f, params.D)}

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def coefficient(self, k) -> FunctionExpr:
        return self._terms.get(tuple(k), fs.const(0))

    def __iter__(self):
        return iter(self._terms.items())

    def __len__(self):
        return len(self._terms)

    def __repr__(self):
        body = " + ".join(f"({fs.to_str(f)})U^{list(k)}" for k, f in self._terms.items()) or "0"
        return f"AlgebraElement[{body}]"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, scalar_multiply(other, -1))

    def __neg__(self):
        return scalar_multiply(self, -1)

    def __mul__(self, other):
        if isinstance(other, AlgebraElement):
            return multiply(self, other)
        return scalar_multiply(self, other)

    def __rmul__(self, other):
        return scalar_multiply(self, other)

    def star(self):
        return involution(self)


def _is_zero(f: FunctionExpr, D: int) -> bool:
    return fs.is_identically_zero(f, D, random.Random(0xA1), trials=8)


def _check(a: AlgebraElement, b: AlgebraElement) -> None:
    if a.params != b.params:
        raise ParameterMismatch(f"{a.params} vs {b.params}")


# -- constructors ------------------------------------------------------------


def zero(params: AlgebraParams) -> AlgebraElement:
    return AlgebraElement(params)


def identity(params: AlgebraParams) -> AlgebraElement:
    return AlgebraElement(params, {(0,) * params.D: fs.const(1)})


def function(params: AlgebraParams, f) -> AlgebraElement:
    if isinstance(f, str):
        f = fs.parse(f, params.D)
    return AlgebraElement(params, {(0,) * params.D: f})


def monomial(params: AlgebraParams, k, f=1) -> AlgebraElement:
    if isinstance(f, str):
        f = fs.parse(f, params.D)
    return AlgebraElement(params, {tuple(k): f})


def generator(params: AlgebraParams, i: int, power: int = 1) -> AlgebraElement:
    """U_{i+1}^power (0-based ``i``)."""
    k = tuple(power if j == i else 0 for j in range(params.D))
    return monomial(params, k)


# -- arithmetic -------------------------------------------------------------


def add(a: AlgebraElement, b: AlgebraElement) -> AlgebraElement:
    _check(a, b)
    terms = a.terms
    for k, g in b:
        terms[k] = fs.add(terms[k], g) if k in terms else g
    return AlgebraElement(a.params, terms)


def scalar_multiply(a: AlgebraElement, c) -> AlgebraElement:
    c = fs.lift(c)
    return AlgebraElement(a.params, {k: fs.mul(c, f) for k, f in a})


def multiply(a: AlgebraElement, b: AlgebraElement) -> AlgebraElement:
    """(f_k U^k)(g_l U^l) = q^{N(k,l)} f_k (S^k g_l) U^{k+l}."""
    _check(a, b)
    p = a.params
    out: dict = {}
    for k, f in a:
        off = tuple(x * p.hbar for x in k)
        for l, g in b:
            c = fs.mul(q_power(p, cocycle_exponent(k, l)), f, fs.shift(g, off))
            kl = tuple(x + y for x, y in zip(k, l))
            out[kl] = fs.add(out[kl], c) if kl in out else c
    return AlgebraElement(p, out)


def involution(a: AlgebraElement) -> AlgebraElement:
    """Term k of a* is q^{N(k,k)} S^k conj(f_{-k})."""
    p = a.params
    out = {}
    for m, f in a:
        k = tuple(-x for x in m)
        off = tuple(x * p.hbar for x in k)
        out[k] = fs.mul(q_power(p, cocycle_exponent(k, k)), fs.shift(fs.conjugate(f), off))
    return AlgebraElement(p, out)


def power(a: AlgebraElement, n: int) -> AlgebraElement:
    out = identity(a.params)
    for _ in range(n):
        out = multiply(out, a)
    return out


def commutator(a: AlgebraElement, b: AlgebraElement) -> AlgebraElement:
    return multiply(a, b) - multiply(b, a)


def max_deviation(a: AlgebraElement, b: AlgebraElement, trials: int = 8,
                  rng: random.Random | None = None) -> float:
    """Largest coefficient difference seen at random rational points."""
    _check(a, b)
    rng = rng or random.Random(0xE0)
    worst = 0.0
    for k in sorted(set(a.terms) | set(b.terms)):
        d = fs.add(a.coefficient(k), fs.neg(b.coefficient(k)))
        for _ in range(trials):
            pt = fs.random_point(a.params.D, rng)
            worst = max(worst, abs(fs.evaluate(d, pt)))
    return worst


def equals_probabilistic(a: AlgebraElement, b: AlgebraElement, trials: int = 8,
                         rng: random.Random | None = None, tol: float = 1e-10) -> bool:
    _check(a, b)
    rng = rng or random.Random(0xE0)
    for k in sorted(set(a.terms) | set(b.terms)):
        f, g = a.coefficient(k), b.coefficient(k)
        for _ in range(trials):
            pt = fs.random_point(a.params.D, rng)
            x, y = fs.evaluate(f, pt), fs.evaluate(g, pt)
            if abs(x - y) > tol * max(1.0, abs(x), abs(y)):
                return False
    return True


# -- isomorphisms -------------------------------------------------------------


def hbar_scaling_iso(a: AlgebraElement, hbar2) -> AlgebraElement:
    """f_k U^k -> (T_{hbar1/hbar2} f_k) U^k into the algebra with hbar2."""
    hbar2 = Fraction(hbar2)
    p = a.params
    lam = p.hbar / hbar2
    target = AlgebraParams(p.D, hbar2, p.q_turns)
    return AlgebraElement(target, {k: fs.scale(f, lam) for k, f in a})


def _twist_phase(p: AlgebraParams, k, sign: int) -> FunctionExpr:
    # exp(i tau N(u,k)), tau = 2 pi q_turns / hbar, N(u,k) = sum_{m>n} u_m k_n
    lam = []
    run = 0
    for km in k:
        lam.append(sign * p.q_turns / p.hbar * run)
        run += km
    return fs.mul(ExpLin(tuple(lam), Fraction(0), True))


def q_twist_iso(a: AlgebraElement) -> AlgebraElement:
    """Map into the q = 1 algebra: f_k U^k -> f_k e^{i tau N(u,k)} U^k."""
    p = a.params
    target = AlgebraParams(p.D, p.hbar, 0)
    return AlgebraElement(target, {k: fs.mul(f, _twist_phase(p, k, 1)) for k, f in a})


def q_twist_inverse(a: AlgebraElement, q_turns) -> AlgebraElement:
    """Inverse of :func:`q_twist_iso`, from q = 1 back to q = e^{2 pi i q_turns}."""
    p = a.params
    if p.q_turns != 0:
        raise ParameterMismatch("source algebra must have q = 1")
    target = AlgebraParams(p.D, p.hbar, q_turns)
    return AlgebraElement(target, {k: fs.mul(f, _twist_phase(target, k, -1)) for k, f in a})


# -- random elements and serialization ----------------------------------------


def random_element(params: AlgebraParams, rng: random.Random, n_terms: int = 3,
                   max_index: int = 2, rich: bool = True, span: int = 3) -> AlgebraElement:
    terms = {}
    for _ in range(n_terms):
        k = tuple(rng.randint(-max_index, max_index) for _ in range(params.D))
        terms[k] = fs.random_function(params.D, rng, rich=rich, span=span)
    return AlgebraElement(params, terms)


def to_json(a: AlgebraElement) -> dict:
    p = a.params
    return {
        "D": p.D,
        "hbar": fmt_rational(p.hbar),
        "q_turns": fmt_rational(p.q_turns),
        "terms": [{"k": list(k), "f": fs.to_str(f)} for k, f in a],
    }


def from_json(data: dict | str) -> AlgebraElement:
    if isinstance(data, str):
        data = json.loads(data)
    p = AlgebraParams(int(data["D"]), Fraction(data["hbar"]), Fraction(data.get("q_turns", "0")))
    terms = [(tuple(t["k"]), fs.parse(t["f"], p.D)) for t in data["terms"]]
    return AlgebraElement(p, terms)
