"""Exact integer and rational lattice arithmetic.

Matrices are tuples of row tuples (``int`` or :class:`~fractions.Fraction`
entries); vectors and multi-indices are plain tuples.  Everything here is
exact, which is what makes the module classification decidable.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

MultiIndex = tuple  # tuple[int, ...]
IntMatrix = tuple  # tuple[tuple[int, ...], ...]
RatMatrix = tuple  # tuple[tuple[Fraction, ...], ...]
RatVector = tuple  # tuple[Fraction, ...]


class LatticeError(ValueError):
    """Raised for singular input or dimension mismatches."""


# -- small matrix helpers -------------------------------------------------


def as_int_matrix(rows) -> IntMatrix:
    out = tuple(tuple(int(x) for x in row) for row in rows)
    n = len(out)
    if any(len(r) != n for r in out):
        raise LatticeError("matrix must be square")
    for r, row in zip(out, rows):
        for a, b in zip(r, row):
            if a != b:
                raise LatticeError(f"non-integer entry {b!r}")
    return out


def as_rat_matrix(rows) -> RatMatrix:
    out = tuple(tuple(Fraction(x) for x in row) for row in rows)
    if any(len(r) != len(out) for r in out):
        raise LatticeError("matrix must be square")
    return out


def as_rat_vector(v) -> RatVector:
    return tuple(Fraction(x) for x in v)


def identity(d: int, one=1) -> tuple:
    return tuple(tuple(one if i == j else 0 * one for j in range(d)) for i in range(d))


def zeros(d: int) -> tuple:
    return tuple(tuple(0 for _ in range(d)) for _ in range(d))


def mat_mul(a, b) -> tuple:
    cols = list(zip(*b))
    return tuple(tuple(sum(x * y for x, y in zip(row, col)) for col in cols) for row in a)


def mat_add(a, b) -> tuple:
    return tuple(tuple(x + y for x, y in zip(ra, rb)) for ra, rb in zip(a, b))


def mat_sub(a, b) -> tuple:
    return tuple(tuple(x - y for x, y in zip(ra, rb)) for ra, rb in zip(a, b))


def mat_scale(c, a) -> tuple:
    return tuple(tuple(c * x for x in row) for row in a)


def mat_neg(a) -> tuple:
    return mat_scale(-1, a)


def mat_vec(a, v) -> tuple:
    if len(a) and len(a[0]) != len(v):
        raise LatticeError("dimension mismatch")
    return tuple(sum(x * y for x, y in zip(row, v)) for row in a)


def vec_add(a, b) -> tuple:
    _same_dim(a, b)
    return tuple(x + y for x, y in zip(a, b))


def vec_sub(a, b) -> tuple:
    _same_dim(a, b)
    return tuple(x - y for x, y in zip(a, b))


def vec_scale(c, v) -> tuple:
    return tuple(c * x for x in v)


def transpose(a) -> tuple:
    return tuple(zip(*a))


def det(a) -> Fraction | int:
    """Exact determinant by fraction-free Gaussian elimination (Bareiss)."""
    n = len(a)
    if n == 0:
        return 1
    m = [list(row) for row in a]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for i in range(k + 1, n):
                if m[i][k] != 0:
                    m[k], m[i] = m[i], m[k]
                    sign = -sign
                    break
            else:
                return 0 * m[0][0]
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                num = m[i][j] * m[k][k] - m[i][k] * m[k][j]
                m[i][j] = num // prev if _all_int(num, prev) else Fraction(num) / prev
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


def _all_int(*xs) -> bool:
    return all(isinstance(x, int) for x in xs)


def mat_inv(a) -> RatMatrix:
    """Exact inverse over the rationals (Gauss-Jordan)."""
    n = len(a)
    m = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(a)]
    for c in range(n):
        piv = next((r for r in range(c, n) if m[r][c] != 0), None)
        if piv is None:
            raise LatticeError("singular matrix")
        m[c], m[piv] = m[piv], m[c]
        p = m[c][c]
        m[c] = [x / p for x in m[c]]
        for r in range(n):
            if r != c and m[r][c] != 0:
                f = m[r][c]
                m[r] = [x - f * y for x, y in zip(m[r], m[c])]
    return tuple(tuple(row[n:]) for row in m)


def int_mat_inv(a) -> IntMatrix:
    """Inverse of a unimodular integer matrix, as integers."""
    inv = mat_inv(a)
    if any(x.denominator != 1 for row in inv for x in row):
        raise LatticeError("matrix is not unimodular")
    return tuple(tuple(int(x) for x in row) for row in inv)


def is_integral(v) -> bool:
    return all(Fraction(x).denominator == 1 for x in v)


def is_integral_matrix(a) -> bool:
    return all(Fraction(x).denominator == 1 for row in a for x in row)


def frac(x) -> Fraction:
    """Fractional part with floor semantics, so ``frac(-1/4) == 3/4``."""
    x = Fraction(x)
    return x - math.floor(x)


def _same_dim(a, b):
    if len(a) != len(b):
        raise LatticeError(f"dimension mismatch: {len(a)} vs {len(b)}")


# -- cocycle --------------------------------------------------------------


def cocycle_exponent(k: Sequence[int], l: Sequence[int]) -> int:
    """N(k, l) = sum over m > n of k_m * l_n (zero when D == 1)."""
    _same_dim(k, l)
    total = 0
    partial = 0  # running l_1 + ... + l_{m-1}
    for m in range(len(k)):
        total += k[m] * partial
        partial += l[m]
    return total


def rational_cocycle_exponent(x: Sequence, l: Sequence) -> Fraction:
    """The same bilinear form with rational entries."""
    _same_dim(x, l)
    total = Fraction(0)
    partial = Fraction(0)
    for m in range(len(x)):
        total += Fraction(x[m]) * partial
        partial += Fraction(l[m])
    return total


# -- normal forms ---------------------------------------------------------


@dataclass(frozen=True)
class HermiteForm:
    H: IntMatrix
    U: IntMatrix


@dataclass(frozen=True)
class SmithForm:
    U: IntMatrix
    S: IntMatrix
    V: IntMatrix


def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    """Return (g, s, t) with s*a + t*b == g >= 0."""
    old_r, r = a, b
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
        old_t, t = t, old_t - q * t
    if old_r < 0:
        old_r, old_s, old_t = -old_r, -old_s, -old_t
    return old_r, old_s, old_t


def hermite_normal_form(M) -> HermiteForm:
    """Row-style Hermite normal form with ``M == U @ H``.

    H is upper triangular with positive diagonal and the entries above each
    pivot reduced into ``[0, H_ii)``.
    """
    M = as_int_matrix(M)
    n = len(M)
    if det(M) == 0:
        raise LatticeError("Hermite normal form requires det M != 0")
    A = [list(r) for r in M]
    V = [list(r) for r in identity(n)]  # V @ M == A throughout

    def combine(i, j, s, t, u, v):
        # rows (i, j) <- (s*Ai + t*Aj, u*Ai + v*Aj); the 2x2 block is unimodular
        for X in (A, V):
            ri, rj = X[i], X[j]
            X[i] = [s * a + t * b for a, b in zip(ri, rj)]
            X[j] = [u * a + v * b for a, b in zip(ri, rj)]

    for c in range(n):
        for r in range(c + 1, n):
            if A[r][c] == 0:
                continue
            a, b = A[c][c], A[r][c]
            g, s, t = _xgcd(a, b)
            combine(c, r, s, t, -b // g, a // g)
        if A[c][c] < 0:
            A[c] = [-x for x in A[c]]
            V[c] = [-x for x in V[c]]
        p = A[c][c]
        for r in range(c):
            q = A[r][c] // p
            if q:
                A[r] = [x - q * y for x, y in zip(A[r], A[c])]
                V[r] = [x - q * y for x, y in zip(V[r], V[c])]
    H = tuple(tuple(r) for r in A)
    U = int_mat_inv(tuple(tuple(r) for r in V))
    return HermiteForm(H=H, U=U)


def is_hermite_normal_form(H) -> bool:
    n = len(H)
    for i in range(n):
        if H[i][i] <= 0:
            return False
        for j in range(n):
            if j > i and not (0 <= H[i][j] < H[j][j]):
                return False
            if j < i and H[i][j] != 0:
                return False
    return True


def smith_normal_form(M) -> SmithForm:
    """Smith normal form ``M == U @ S @ V`` with S_ii | S_{i+1,i+1}."""
    M = as_int_matrix(M)
    n = len(M)
    A = [list(r) for r in M]
    L = [list(r) for r in identity(n)]  # L @ M @ Rt == A
    Rt = [list(r) for r in identity(n)]

    def row_combine(i, j, s, t, u, v):
        for X in (A, L):
            ri, rj = X[i], X[j]
            X[i] = [s * a + t * b for a, b in zip(ri, rj)]
            X[j] = [u * a + v * b for a, b in zip(ri, rj)]

    def col_combine(i, j, s, t, u, v):
        for X in (A, Rt):
            for row in X:
                a, b = row[i], row[j]
                row[i], row[j] = s * a + t * b, u * a + v * b

    for c in range(n):
        # bring a nonzero entry to the pivot
        if all(A[i][j] == 0 for i in range(c, n) for j in range(c, n)):
            break
        while True:
            if A[c][c] == 0:
                i, j = next((i, j) for i in range(c, n) for j in range(c, n) if A[i][j] != 0)
                A[c], A[i] = A[i], A[c]
                L[c], L[i] = L[i], L[c]
                col_combine(c, j, 0, 1, 1, 0)
            for r in range(c + 1, n):
                if A[r][c]:
                    a, b = A[c][c], A[r][c]
                    if b % a == 0:
                        row_combine(c, r, 1, 0, -(b // a), 1)
                        continue
                    g, s, t = _xgcd(a, b)
                    row_combine(c, r, s, t, -b // g, a // g)
            for k in range(c + 1, n):
                if A[c][k]:
                    a, b = A[c][c], A[c][k]
                    if b % a == 0:
                        col_combine(c, k, 1, 0, -(b // a), 1)
                        continue
                    g, s, t = _xgcd(a, b)
                    col_combine(c, k, s, t, -b // g, a // g)
            if any(A[r][c] for r in range(c + 1, n)) or any(A[c][k] for k in range(c + 1, n)):
                continue
            p = A[c][c]
            bad = next(
                ((i, j) for i in range(c + 1, n) for j in range(c + 1, n) if A[i][j] % p),
                None,
            )
            if bad is None:
                break
            # divisibility fix: add the offending row to the pivot row
            i, _ = bad
            row_combine(c, i, 1, 1, 0, 1)
        if A[c][c] < 0:
            A[c] = [-x for x in A[c]]
            L[c] = [-x for x in L[c]]
    S = tuple(tuple(r) for r in A)
    U = int_mat_inv(tuple(tuple(r) for r in L))
    V = int_mat_inv(tuple(tuple(r) for r in Rt))
    return SmithForm(U=U, S=S, V=V)


def is_unimodular(M) -> bool:
    return abs(det(M)) == 1


# -- cosets and classification -------------------------------------------


@dataclass(frozen=True)
class CosetSystem:
    R: IntMatrix
    reps: tuple  # tuple[MultiIndex, ...]

    @property
    def count(self) -> int:
        return len(self.reps)

    def index_of(self, k: Sequence[int]) -> tuple[int, MultiIndex]:
        """Return (i, m) with ``k == reps[i] + R @ m``."""
        Rinv = mat_inv(self.R)
        for i, rep in enumerate(self.reps):
            m = mat_vec(Rinv, vec_sub(tuple(k), rep))
            if is_integral(m):
                return i, tuple(int(x) for x in m)
        raise LatticeError(f"{k} is not covered by the coset system")  # unreachable for valid systems


def reduce_mod_lattice(R, k: Sequence[int]) -> MultiIndex:
    """Canonical representative of ``k + R Z^D`` with 0 <= x_i < h_i."""
    R = as_int_matrix(R)
    # columns of B = H^T span R Z^D and B is lower triangular
    H = hermite_normal_form(transpose(R)).H
    x = list(int(v) for v in k)
    for i in range(len(x)):
        q = x[i] // H[i][i]
        if q:
            for r in range(i, len(x)):
                x[r] -= q * H[i][r]
    return tuple(x)


def coset_representatives(R) -> CosetSystem:
    """One representative per class of Z^D / R Z^D, via the Smith form."""
    R = as_int_matrix(R)
    if det(R) == 0:
        raise LatticeError("coset enumeration requires det R != 0")
    sf = smith_normal_form(R)
    # R Z^D == U S Z^D, so U maps the box prod [0, S_ii) onto a transversal
    box = [range(abs(sf.S[i][i])) for i in range(len(R))]
    reps = sorted(reduce_mod_lattice(R, mat_vec(sf.U, b)) for b in itertools.product(*box))
    return CosetSystem(R=R, reps=tuple(reps))


@dataclass(frozen=True)
class CanonicalPair:
    H: IntMatrix
    delta0: RatVector


def canonical_pair(R, delta) -> CanonicalPair:
    """Hermite form of R together with frac(H @ delta)."""
    hf = hermite_normal_form(R)
    delta = as_rat_vector(delta)
    _same_dim(hf.H, delta)
    d0 = tuple(frac(x) for x in mat_vec(hf.H, delta))
    return CanonicalPair(H=hf.H, delta0=d0)


def discrete_iso_criteria(R1, d1, R2, d2) -> bool:
    """Direct test: R1 R2^{-1} unimodular and R1 (d1 - d2) integral."""
    R1, R2 = as_int_matrix(R1), as_int_matrix(R2)
    if det(R1) == 0 or det(R2) == 0:
        raise LatticeError("singular matrix")
    B = mat_mul(R1, mat_inv(R2))
    if not is_integral_matrix(B) or abs(det(B)) != 1:
        return False
    return is_integral(mat_vec(R1, vec_sub(as_rat_vector(d1), as_rat_vector(d2))))


def is_isomorphic_discrete(R1, d1, R2, d2) -> bool:
    if det(as_int_matrix(R1)) == 0 or det(as_int_matrix(R2)) == 0:
        raise LatticeError("singular matrix")
    return canonical_pair(R1, d1) == canonical_pair(R2, d2)


def simplicity_discrete(R) -> bool:
    """The discrete module S(R, delta) is simple iff R is unimodular."""
    return is_unimodular(as_int_matrix(R))


def fmt_rational(x) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
