import itertools
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from shiftalg import lattice as lat
from strategies import int_matrices, rationals, unimodular


def brute_force_index(R):
    """Count classes of Z^D modulo R Z^D by scanning a box."""
    D = len(R)
    Ri = lat.mat_inv(R)
    B = sum(abs(x) for row in R for x in row)
    reps = []
    for k in itertools.product(range(-B, B + 1), repeat=D):
        if not any(lat.is_integral(lat.mat_vec(Ri, lat.vec_sub(k, r))) for r in reps):
            reps.append(k)
    return len(reps)


class TestCocycle:
    def test_known_values(self):
        assert lat.cocycle_exponent((1, 0), (0, 1)) == 0
        assert lat.cocycle_exponent((0, 1), (1, 0)) == 1
        assert lat.cocycle_exponent((1, 2, 3), (4, 5, 6)) == 2 * 4 + 3 * 4 + 3 * 5

    @given(st.lists(st.integers(-5, 5), min_size=3, max_size=3),
           st.lists(st.integers(-5, 5), min_size=3, max_size=3),
           st.lists(st.integers(-5, 5), min_size=3, max_size=3))
    def test_bilinear_cocycle_identity(self, k, l, m):
        N = lat.cocycle_exponent
        kl = [a + b for a, b in zip(k, l)]
        lm = [a + b for a, b in zip(l, m)]
        assert N(k, l) + N(kl, m) == N(k, lm) + N(l, m)

    def test_rational_version_matches_integer(self):
        assert lat.rational_cocycle_exponent((1, 2), (3, 4)) == lat.cocycle_exponent((1, 2), (3, 4))
        assert lat.rational_cocycle_exponent((Fraction(1, 2), Fraction(1, 3)), (2, 0)) == Fraction(2, 3)


class TestHermite:
    def test_example(self):
        hf = lat.hermite_normal_form(((4, 6), (2, 9)))
        assert hf.H == ((2, 9), (0, 12))
        assert lat.mat_mul(hf.U, hf.H) == ((4, 6), (2, 9))

    def test_diagonal_is_fixed(self):
        assert lat.hermite_normal_form(((2, 0), (0, 3))).H == ((2, 0), (0, 3))

    def test_singular_rejected(self):
        with pytest.raises(lat.LatticeError):
            lat.hermite_normal_form(((1, 2), (2, 4)))

    @given(int_matrices())
    def test_structure_and_factorisation(self, M):
        hf = lat.hermite_normal_form(M)
        assert lat.is_hermite_normal_form(hf.H)
        assert lat.is_unimodular(hf.U)
        assert lat.mat_mul(hf.U, hf.H) == M
        assert lat.det(hf.H) == abs(lat.det(M))

    @given(st.data())
    def test_invariant_under_unimodular_left_multiplication(self, data):
        M = data.draw(int_matrices(n=3))
        U = data.draw(unimodular(3))
        assert lat.hermite_normal_form(lat.mat_mul(U, M)).H == lat.hermite_normal_form(M).H


class TestSmith:
    @given(int_matrices())
    def test_factorisation_and_divisibility(self, M):
        sf = lat.smith_normal_form(M)
        assert lat.mat_mul(lat.mat_mul(sf.U, sf.S), sf.V) == M
        d = [sf.S[i][i] for i in range(len(M))]
        assert all(x > 0 for x in d)
        assert all(d[i + 1] % d[i] == 0 for i in range(len(d) - 1))
        assert all(sf.S[i][j] == 0 for i in range(len(M)) for j in range(len(M)) if i != j)

    def test_repeated_diagonal(self):
        sf = lat.smith_normal_form(((2, 0), (0, 2)))
        assert [sf.S[0][0], sf.S[1][1]] == [2, 2]


class TestCosets:
    def test_diag(self):
        cs = lat.coset_representatives(((2, 0), (0, 3)))
        assert cs.count == 6
        assert cs.reps == ((0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2))

    @given(int_matrices(n=2, bound=3))
    def test_count_matches_brute_force(self, R):
        cs = lat.coset_representatives(R)
        assert cs.count == abs(lat.det(R)) == brute_force_index(R)

    @given(int_matrices(n=2, bound=3), st.lists(st.integers(-20, 20), min_size=2, max_size=2))
    def test_reduction_lands_on_a_representative(self, R, k):
        cs = lat.coset_representatives(R)
        r = lat.reduce_mod_lattice(R, k)
        assert r in cs.reps
        assert lat.is_integral(lat.mat_vec(lat.mat_inv(R), lat.vec_sub(k, r)))


class TestCanonicalPair:
    def test_frac_of_delta(self):
        cp = lat.canonical_pair(((1,),), (Fraction(7, 5),))
        assert cp.H == ((1,),) and cp.delta0 == (Fraction(2, 5),)

    @given(st.data())
    def test_constant_on_orbits(self, data):
        D = data.draw(st.integers(1, 3))
        R = data.draw(int_matrices(n=D, bound=4))
        delta = tuple(data.draw(rationals()) for _ in range(D))
        U = data.draw(unimodular(D))
        n = [data.draw(st.integers(-4, 4)) for _ in range(D)]
        delta2 = lat.vec_add(delta, lat.mat_vec(lat.mat_inv(R), n))
        R2 = lat.mat_mul(U, R)
        assert lat.canonical_pair(R, delta) == lat.canonical_pair(R2, delta2)
        assert lat.discrete_iso_criteria(R, delta, R2, delta2)

    @given(st.data())
    def test_agrees_with_direct_criteria(self, data):
        D = data.draw(st.integers(1, 2))
        R1 = data.draw(int_matrices(n=D, bound=3))
        R2 = data.draw(int_matrices(n=D, bound=3))
        d1 = tuple(data.draw(rationals(3, 3)) for _ in range(D))
        d2 = tuple(data.draw(rationals(3, 3)) for _ in range(D))
        same = lat.canonical_pair(R1, d1) == lat.canonical_pair(R2, d2)
        assert same == lat.discrete_iso_criteria(R1, d1, R2, d2)

    def test_simplicity(self):
        assert lat.simplicity_discrete(((1, 1), (0, -1)))
        assert not lat.simplicity_discrete(((2, 0), (0, 1)))


def test_fmt_rational():
    assert lat.fmt_rational(Fraction(3, 1)) == "3"
    assert lat.fmt_rational(Fraction(-2, 6)) == "-1/3"
