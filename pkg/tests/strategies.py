"""Shared hypothesis strategies."""

from fractions import Fraction

from hypothesis import strategies as st

from shiftalg.lattice import det


def rationals(max_num=6, max_den=4):
    return st.builds(Fraction, st.integers(-max_num, max_num), st.integers(1, max_den))


@st.composite
def int_matrices(draw, n=None, bound=6, nonsingular=True):
    n = draw(st.integers(1, 3)) if n is None else n
    M = draw(st.lists(st.lists(st.integers(-bound, bound), min_size=n, max_size=n),
                      min_size=n, max_size=n).map(lambda rows: tuple(map(tuple, rows))))
    if nonsingular:
        from hypothesis import assume
        assume(det(M) != 0)
    return M


@st.composite
def unimodular(draw, n):
    M = [[int(i == j) for j in range(n)] for i in range(n)]
    for _ in range(draw(st.integers(0, 6))):
        if n == 1:
            break
        i = draw(st.integers(0, n - 1))
        j = draw(st.integers(0, n - 1).filter(lambda x: x != i))
        c = draw(st.integers(-2, 2))
        M[i] = [a + c * b for a, b in zip(M[i], M[j])]
    if draw(st.booleans()):
        M[0] = [-a for a in M[0]]
    return tuple(map(tuple, M))
