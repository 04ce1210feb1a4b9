"""Acceptance suite: one test per criterion, each recording a pass/fail line.

Run with ``pytest tests/test_acceptance.py`` (the lines appear in the terminal
summary) or ``python tests/test_acceptance.py`` to print them directly.
"""

import csv
import io
import itertools
import random
import time
from fractions import Fraction
from math import comb

import numpy as np

from shiftalg import algebra as alg
from shiftalg import funcspace as fs
from shiftalg import fuzzy as fz
from shiftalg import lattice as lat
from shiftalg import liealg as la
from shiftalg import modules as mod

RESULTS: dict = {}
TITLES = {
    1: "golden 3x3 representation",
    2: "spindle sequence",
    3: "relation suite",
    4: "classification",
    5: "module axioms",
    6: "direct-sum decomposition",
    7: "Lie suite",
    8: "algebra homomorphisms",
    9: "level-set contract",
    10: "Hermite normal form",
}


def record(n, detail):
    """Decorator: run the criterion body and store a one-line verdict."""
    def wrap(fn):
        def test():
            t0 = time.perf_counter()
            try:
                info = fn()
            except BaseException:
                RESULTS[n] = (False, f"{detail}", time.perf_counter() - t0)
                raise
            RESULTS[n] = (True, f"{detail}{'; ' + info if info else ''}", time.perf_counter() - t0)
        test.__name__ = fn.__name__
        test.__doc__ = fn.__doc__
        return test
    return wrap


def summary_lines():
    out = []
    for n in sorted(TITLES):
        if n not in RESULTS:
            out.append(f"criterion {n:2d} [SKIP] {TITLES[n]}")
            continue
        ok, detail, dt = RESULTS[n]
        out.append(f"criterion {n:2d} [{'PASS' if ok else 'FAIL'}] {TITLES[n]}: {detail} ({dt:.2f}s)")
    return out


def random_int_matrix(rng, D, bound=4):
    while True:
        M = tuple(tuple(rng.randint(-bound, bound) for _ in range(D)) for _ in range(D))
        if lat.det(M) != 0:
            return M


def exact_1d_matrices(f, w):
    """A+ and A- as exact Gaussian-rational arrays, built from point values only."""
    half = Fraction(1, 2)
    ns = list(range(w.M, w.N + 1))
    n = len(ns)
    Ap = [[fs.GaussQ.of(0)] * n for _ in range(n)]
    Am = [[fs.GaussQ.of(0)] * n for _ in range(n)]
    for i, k in enumerate(ns):
        if i + 1 < n:
            Ap[i + 1][i] = fs.exact_value(f, ((k + half + w.delta) * w.hbar,))
        if i > 0:
            Am[i - 1][i] = fs.exact_value(f, ((k - half + w.delta) * w.hbar,))
    return ns, Ap, Am


def gmul(A, B):
    n = len(A)
    zero = fs.GaussQ.of(0)
    out = []
    for i in range(n):
        row = []
        for j in range(n):
            s = zero
            for k in range(n):
                s = s + A[i][k] * B[k][j]
            row.append(s)
        out.append(row)
    return out


# -- 1 -----------------------------------------------------------------------------------


@record(1, "f = 9/4 - u^2, hbar = 1, delta = 0, exact integer entries")
def test_criterion_01_golden():
    w = fz.find_window("9/4 - u1^2", 1, 0).require_finite()
    rep = fz.build_1d("9/4 - u1^2", w)
    Ap, Am = rep.dense("A+"), rep.dense("A-")
    assert Ap.tolist() == [[0, 0, 0], [2, 0, 0], [0, 2, 0]]
    assert Am.tolist() == [[0, 2, 0], [0, 0, 2], [0, 0, 0]]
    assert not Ap.imag.any() and (Ap.real == np.round(Ap.real)).all()


# -- 2 -----------------------------------------------------------------------------------


@record(2, "N_k in {3,4,5,10,11}: parity of delta, dimensions, exact boundary zeros")
def test_criterion_02_spindle():
    f = fs.parse("9/4 - u1^2", 1)
    u1, u2 = Fraction(-3, 2), Fraction(3, 2)
    half = Fraction(1, 2)
    for Nk in (3, 4, 5, 10, 11):
        h, M, d = fz.sequence_params(u1, u2, Nk)
        assert h == (u2 - u1) / Nk
        assert d == (0 if Nk % 2 else half)
        # boundary zeros land on the half-lattice points just outside the window
        assert (M - half + d) * h == u1
        assert (M + Nk - 1 + half + d) * h == u2
        rep = fz.build_1d(f, fz.Window(M, M + Nk - 1, d, h))
        assert rep.dim == Nk
        assert fs.is_zero_at(f, ((M - half + d) * h,)) is True
        assert fs.is_zero_at(f, ((M + Nk - 1 + half + d) * h,)) is True
        assert fz.find_window(f, h, d, anchor=M).window == fz.Window(M, M + Nk - 1, d, h)
        assert all(r.passed for r in fz.verify_relations(rep))


# -- 3 -----------------------------------------------------------------------------------


def _random_window_poly(rng):
    """f = (u - a)(u - b) g(u) with a, b on the half-lattice and g of degree <= 2."""
    h = Fraction(1, rng.randint(1, 3))
    d = rng.choice((Fraction(0), Fraction(1, 2), Fraction(1, 3)))
    M = rng.randint(-3, 0)
    N = M + rng.randint(0, 4)
    half = Fraction(1, 2)
    a, b = (M - half + d) * h, (N + half + d) * h
    # g has no zeros on the window: positive leading constant dominates
    g = f"({rng.randint(5, 9)} + {Fraction(rng.randint(-2, 2), 3)}*u1 + {Fraction(rng.randint(0, 2), 5)}*u1^2)"
    deg = rng.randint(2, 4)
    g = {2: "1", 3: g.replace("u1^2", "0"), 4: g}[deg]
    text = f"{rng.randint(1, 3)}*(u1 - ({a}))*(u1 - ({b}))*{g}"
    return fs.parse(text, 1), fz.Window(M, N, d, h)


@record(3, "20 random polynomials (exact + float), sphere, catenoid, plane")
def test_criterion_03_relations():
    rng = random.Random(2024)
    worst = 0.0
    for _ in range(20):
        f, w = _random_window_poly(rng)
        assert fz.find_window(f, w.hbar, w.delta, anchor=w.M).window == w
        ns, Ap, Am = exact_1d_matrices(f, w)
        lhs = gmul(Ap, Am)
        rhs = gmul(Am, Ap)
        h2 = w.hbar / 2
        for i, k in enumerate(ns):
            u = (k + w.delta) * w.hbar
            want = fs.exact_value(f, (u - h2,)) ** 2 - fs.exact_value(f, (u + h2,)) ** 2
            for j in range(len(ns)):
                got = lhs[i][j] - rhs[i][j]
                assert got == (want if i == j else fs.GaussQ.of(0))
        rep = fz.build_1d(f, w)
        (r,) = fz.verify_relations(rep, ["[A+,A-] = fn(f_minus)^2 - fn(f_plus)^2"])
        assert r.residual_max < 1e-10
        worst = max(worst, r.residual_max)

    checks = [
        (fz.build_sphere(1, 4), "[A+,A-] = 2*hbar*u"),
        (fz.build_sphere(Fraction(3, 2), 3, Fraction(1, 2)), "[A+,A-] = 2*hbar*u"),
        (fz.build_catenoid(1, Fraction(1, 2), 0, 8), "{A+,A-}/2 - u^2 = R^2"),
        (fz.build_catenoid(2, Fraction(1, 3), Fraction(1, 4), 8), "{A+,A-}/2 - u^2 = R^2"),
        (fz.build_plane(0, 1, 10), "[A+,A-] = -hbar*I"),
        (fz.build_plane(0, 1, 10), "{A+,A-}/2 = u + hbar*(c + 1/2)"),
        (fz.build_plane(Fraction(2, 3), Fraction(1, 2), 10), "[A+,A-] = -hbar*I"),
        (fz.build_plane(Fraction(2, 3), Fraction(1, 2), 10), "{A+,A-}/2 = u + hbar*(c + 1/2)"),
    ]
    for rep, text in checks:
        (r,) = fz.verify_relations(rep, [text])
        assert r.residual_max < 1e-10, (text, r.residual_max)
        worst = max(worst, r.residual_max)
    return f"max float residual {worst:.1e}"


# -- 4 -----------------------------------------------------------------------------------


def _class_key(R, k):
    """Class of k in Z^D / R Z^D, independent of any normal form."""
    return tuple(x - (x.numerator // x.denominator) for x in lat.mat_vec(lat.mat_inv(R), k))


def bfs_orbit_count(R):
    D = len(R)
    start = (0,) * D
    seen = {_class_key(R, start)}
    frontier = [start]
    while frontier:
        nxt = []
        for k in frontier:
            for i, s in itertools.product(range(D), (1, -1)):
                k2 = tuple(x + (s if j == i else 0) for j, x in enumerate(k))
                key = _class_key(R, k2)
                if key not in seen:
                    seen.add(key)
                    nxt.append(k2)
        frontier = nxt
    return len(seen)


@record(4, "500 orbit samples, 100 non-isomorphic pairs, 50 BFS orbit counts")
def test_criterion_04_classification():
    rng = random.Random(4)
    for _ in range(500):
        D = rng.randint(1, 3)
        R = random_int_matrix(rng, D, 3)
        delta = tuple(Fraction(rng.randint(-9, 9), rng.randint(1, 6)) for _ in range(D))
        U = mod.random_unimodular(D, rng)
        n = tuple(rng.randint(-5, 5) for _ in range(D))
        R2 = lat.mat_mul(U, R)
        d2 = lat.vec_add(delta, lat.mat_vec(lat.mat_inv(R), n))
        assert lat.canonical_pair(R, delta) == lat.canonical_pair(R2, d2)

    found = 0
    while found < 100:
        D = rng.randint(1, 3)
        R1 = random_int_matrix(rng, D, 3)
        d1 = tuple(Fraction(rng.randint(0, 5), 6) for _ in range(D))
        if rng.random() < 0.5:
            # same lattice up to a unimodular factor but a shifted delta
            R2 = lat.mat_mul(mod.random_unimodular(D, rng), R1)
            d2 = lat.vec_add(d1, tuple(Fraction(rng.randint(0, 5), 6) for _ in range(D)))
        else:
            R2 = random_int_matrix(rng, D, 3)
            d2 = d1
        if lat.discrete_iso_criteria(R1, d1, R2, d2):
            assert lat.canonical_pair(R1, d1) == lat.canonical_pair(R2, d2)
            continue
        assert lat.canonical_pair(R1, d1) != lat.canonical_pair(R2, d2)
        found += 1

    done = 0
    while done < 50:
        R = random_int_matrix(rng, 2, 6)
        if abs(lat.det(R)) > 12:
            continue
        assert lat.coset_representatives(R).count == abs(lat.det(R)) == bfs_orbit_count(R)
        done += 1


# -- 5 -----------------------------------------------------------------------------------


@record(5, "30 parameter sets, left/right/bimodule residuals < 1e-10 (relative)")
def test_criterion_05_modules():
    rng = random.Random(5)
    worst = 0.0
    for i in range(30):
        D = 1 + i % 3
        p = alg.AlgebraParams(D, Fraction(rng.randint(1, 4), rng.randint(1, 4)), Fraction(rng.randint(0, 11), 12))
        mp, rp = mod.random_bimodule_params(D, rng)
        assert mod.bimodule_residuals(mp, rp) == (lat.zeros(D), lat.zeros(D))
        a = alg.random_element(p, rng, 2, 1, span=1)
        b = alg.random_element(p, rng, 2, 1, span=1)
        xi = mod.random_state(D, rng)
        res = (mod.left_axiom_residual(a, b, xi, mp),
               mod.right_axiom_residual(xi, a, b, rp),
               mod.bimodule_deviation(a, xi, b, mp, rp))
        assert max(res) < 1e-10, res
        worst = max(worst, *res)
    return f"max residual {worst:.1e}"


# -- 6 -----------------------------------------------------------------------------------


@record(6, "20 random (R, delta), intertwining and bijection on [-8,8]^D")
def test_criterion_06_direct_sum():
    rng = random.Random(6)
    for i in range(20):
        D = 1 + i % 2
        R = random_int_matrix(rng, D, 3)
        delta = tuple(Fraction(rng.randint(0, 5), 6) for _ in range(D))
        ds = mod.decompose_direct_sum(R, delta)
        assert len(ds.summands) == abs(lat.det(R))
        p = alg.AlgebraParams(D, Fraction(1, rng.randint(1, 3)), Fraction(rng.randint(0, 5), 6))
        a = alg.random_element(p, rng, 2, 1, span=1)
        v = mod.DiscreteVector({tuple(rng.randint(-4, 4) for _ in range(D)): 1.0,
                                tuple(rng.randint(-4, 4) for _ in range(D)): 0.5j})
        acted = [mod.discrete_act(a, w, lat.identity(D), s.delta)
                 for w, s in zip(ds.split(v), ds.summands)]
        assert mod._dev(ds.assemble(acted), mod.discrete_act(a, v, R, delta)) < 1e-10
        images = set()
        for k in itertools.product(range(-8, 9), repeat=D):
            i_, m = ds.locate(k)
            assert ds.embed(i_, m) == k
            images.add((i_, m))
        assert len(images) == 17 ** D


# -- 7 -----------------------------------------------------------------------------------


@record(7, "E_ij for D <= 4, N <= 6; su(2) N <= 6; su(3) N <= 3")
def test_criterion_07_lie():
    worst = 0.0
    for D in range(1, 5):
        for N in range(0, 7):
            es = la.build_Eij_matrices(D, N, Fraction(1, 2))
            assert len(es.basis) == comb(N + D - 1, D - 1)
            r = la.verify_Eij_commutators(es, tol=1e-9)
            assert r.residual_max < 1e-9
            worst = max(worst, r.residual_max)
    su2 = la.su2_pauli()
    for N in range(1, 7):
        h = Fraction(1, 3)
        rep = la.build_simplex_rep(su2, N, h, name="su2")
        Xh = [rep.operators[n] for n in rep.meta["generators"]]
        r = la.verify_lie_relations(Xh, su2.sc, h, tol=1e-9)
        assert r.residual_max < 1e-9
        worst = max(worst, r.residual_max)
        assert rep.dim == N + 1
        z = sorted(np.diag(rep.dense("Z")).real)
        assert np.allclose(z, [float(h) * (2 * k - N) for k in range(N + 1)], atol=1e-12)
        assert fz.irreducibility_check(rep, rep.meta["generators"])[0] == 1
    su3 = la.su3_fundamental()
    for N in range(1, 4):
        rep = la.build_simplex_rep(su3, N, 1)
        Xh = [rep.operators[n] for n in rep.meta["generators"]]
        r = la.verify_lie_relations(Xh, su3.sc, 1, tol=1e-9)
        assert r.residual_max < 1e-9
        worst = max(worst, r.residual_max)
    return f"max residual {worst:.1e}"


# -- 8 -----------------------------------------------------------------------------------


@record(8, "50 random pairs, D = 2, tolerance 1e-10")
def test_criterion_08_homomorphisms():
    rng = random.Random(8)
    for _ in range(50):
        p = alg.AlgebraParams(2, Fraction(rng.randint(1, 5), rng.randint(1, 5)), Fraction(rng.randint(0, 11), 12))
        a = alg.random_element(p, rng, 2, 1)
        b = alg.random_element(p, rng, 2, 1)
        h2 = Fraction(rng.randint(1, 5), rng.randint(1, 5))
        for phi in (lambda x: alg.hbar_scaling_iso(x, h2), alg.q_twist_iso):
            assert alg.equals_probabilistic(phi(a * b), phi(a) * phi(b), tol=1e-10)
            assert alg.equals_probabilistic(phi(a.star()), phi(a).star(), tol=1e-10)


# -- 9 -----------------------------------------------------------------------------------


@record(9, "every CSV point has |x^2 + y^2 - f(z)^2| < 1e-9")
def test_criterion_09_levelset():
    worst = 0.0
    count = 0
    for text, u1, u2 in (("9/4 - u1^2", "-3/2", "3/2"), ("sqrt(1 + u1^2)", "-2", "2"),
                         ("sqrt(u1)", "0", "4"), ("2 + u1^3/5", "-1", "1")):
        f = fs.parse(text, 1)
        rows = list(csv.reader(io.StringIO(fz.levelset_csv(fz.levelset_sample(f, u1, u2, 60, 60)))))
        assert rows[0] == ["x", "y", "z"]
        for x, y, z in ((float(a), float(b), float(c)) for a, b, c in rows[1:]):
            fz_ = fs.evaluate(f, (Fraction(z),)).real
            err = abs(x * x + y * y - fz_ * fz_)
            assert err < 1e-9
            worst = max(worst, err)
            count += 1
    return f"{count} points, max error {worst:.1e}"


# -- 10 ----------------------------------------------------------------------------------


@record(10, "500 random matrices: uniqueness, structure, det(H) = |det M|")
def test_criterion_10_hnf():
    rng = random.Random(10)
    for _ in range(500):
        D = rng.randint(1, 4)
        M = random_int_matrix(rng, D, 6)
        hf = lat.hermite_normal_form(M)
        H = hf.H
        assert lat.mat_mul(hf.U, H) == tuple(tuple(x) for x in M)
        assert lat.is_unimodular(hf.U)
        assert lat.is_hermite_normal_form(H)
        for i in range(D):
            assert H[i][i] > 0
            for j in range(D):
                if j < i:
                    assert H[i][j] == 0
                elif j > i:
                    assert 0 <= H[i][j] < H[j][j]
        assert lat.det(H) == abs(lat.det(M))
        V = mod.random_unimodular(D, rng)
        assert lat.hermite_normal_form(lat.mat_mul(V, M)).H == H


if __name__ == "__main__":
    import sys
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_criterion_")]
    for t in tests:
        try:
            t()
        except Exception:
            pass
    lines = summary_lines()
    print("\n".join(lines))
    sys.exit(0 if all("[PASS]" in line for line in lines) else 1)
