import itertools
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import assume, given, settings, strategies as st

from tropslag.errors import NotSaturated, RankMismatch, ZeroVector
from tropslag.lattice import (
    complement_vector,
    complete_to_unimodular,
    is_primitive,
    primitive,
    rank,
    row_hnf,
    saturated_rank2_basis,
)


def test_primitive_examples():
    assert primitive((2, 4, 0)) == (1, 2, 0)
    assert primitive((-1, 0)) == (-1, 0)
    assert primitive((6, -9, 3)) == (2, -3, 1)
    with pytest.raises(ZeroVector):
        primitive((0, 0, 0))


def test_primitive_big_integers():
    v = (3 * 10**40, -6 * 10**40)
    assert primitive(v) == (1, -2)


ints = st.integers(-50, 50)


@given(st.lists(ints, min_size=2, max_size=6).filter(lambda v: any(v)))
def test_primitive_properties(v):
    p = primitive(v)
    assert primitive(p) == p
    assert is_primitive(p)
    # positive multiple of v
    k = next(x // y for x, y in zip(v, p) if y)
    assert k > 0 and all(x == k * y for x, y in zip(v, p))


def test_saturated_basis_examples():
    assert saturated_rank2_basis([(-1, 0), (0, 1), (1, -1)]) == ((1, 0), (0, 1))
    assert saturated_rank2_basis([(2, 0), (0, 2)]) == ((1, 0), (0, 1))
    assert saturated_rank2_basis([(1, 1, 0), (0, 0, 1)]) == ((1, 1, 0), (0, 0, 1))
    with pytest.raises(RankMismatch):
        saturated_rank2_basis([(1, 0, 0), (0, 1, 0), (0, 0, 1)])
    with pytest.raises(RankMismatch):
        saturated_rank2_basis([(1, 2), (2, 4)])


def test_saturation_index_two_brute_force():
    # every overlattice of <(2,0),(0,2)> of index 2 lies inside Z^2; the
    # saturation is the largest, Z^2 itself
    b = saturated_rank2_basis([(2, 0), (0, 2)])
    M = np.array(b)
    assert abs(round(np.linalg.det(M))) == 1


def _in_span_int(basis, p):
    """p is an integer combination of basis (exact)."""
    B = sympy.Matrix(basis).T
    sol, params = B.gauss_jordan_solve(sympy.Matrix(p))
    return all(x.is_integer for x in sol)


@st.composite
def rank2_sets(draw):
    n = draw(st.integers(2, 6))
    a = draw(st.lists(st.integers(-9, 9), min_size=n, max_size=n))
    b = draw(st.lists(st.integers(-9, 9), min_size=n, max_size=n))
    k = draw(st.integers(0, 2))
    extra = [
        [draw(st.integers(-3, 3)) * x + draw(st.integers(-3, 3)) * y for x, y in zip(a, b)]
        for _ in range(k)
    ]
    vecs = [a, b] + extra
    assume(rank(vecs) == 2)
    return vecs


def _solve2(M, r):
    (a, b), (c, d) = M
    det = Fraction(a * d - b * c)
    return (Fraction(d * r[0] - b * r[1]) / det, Fraction(a * r[1] - c * r[0]) / det)


@settings(max_examples=60, deadline=None)
@given(rank2_sets())
def test_saturation_brute_force(vecs):
    b1, b2 = saturated_rank2_basis(vecs)
    n = len(b1)
    for v in vecs:
        assert _in_span_int([b1, b2], v)
    # pick two coordinates on which the span projects injectively; every
    # integer point of the span has integer values there, so enumerating
    # them in [-20, 20]^2 finds every lattice point of the span in the box
    i, j = next(
        (i, j) for i in range(n) for j in range(i + 1, n)
        if b1[i] * b2[j] - b1[j] * b2[i] != 0
    )
    M = ((b1[i], b2[i]), (b1[j], b2[j]))
    for x, y in itertools.product(range(-20, 21), repeat=2):
        c1, c2 = _solve2(M, (x, y))
        p = [c1 * u + c2 * w for u, w in zip(b1, b2)]
        if all(q.denominator == 1 and abs(q) <= 20 for q in p):
            assert c1.denominator == 1 and c2.denominator == 1


def test_row_hnf_matches_sympy():
    from sympy.matrices.normalforms import hermite_normal_form

    rng = np.random.default_rng(3)
    for _ in range(20):
        A = rng.integers(-9, 10, size=(2, 5)).tolist()
        if rank(A) < 2:
            continue
        ours = row_hnf(A)
        # same row lattice: each HNF basis spans the other's rows
        theirs = hermite_normal_form(sympy.Matrix(A).T).T.tolist()
        theirs = [r for r in theirs if any(r)]
        for r in theirs:
            assert _in_span_int(ours, r)
        for r in ours:
            assert _in_span_int(theirs, r)
        # echelon with positive pivots, reduced above
        assert ours[0][next(j for j, x in enumerate(ours[0]) if x)] > 0


def test_frame_examples():
    f = complete_to_unimodular([(1, 0), (0, 1)])
    assert f.matrix == ((1, 0), (0, 1))
    f = complete_to_unimodular([(1, 0, 0), (0, 1, 0)])
    assert f.matrix[2] == (0, 0, 1)
    f = complete_to_unimodular([(1, 2, 3), (0, 1, 1)])
    assert f.apply((1, 2, 3)) == (1, 0, 0)
    assert f.apply((0, 1, 1)) == (0, 1, 0)
    assert abs(sympy.Matrix(f.matrix).det()) == 1
    assert f.check()


def test_frame_not_saturated():
    with pytest.raises(NotSaturated):
        complete_to_unimodular([(2, 0, 0), (0, 1, 0)])
    with pytest.raises(NotSaturated):
        complete_to_unimodular([(1, 1, 0), (1, -1, 0)])


def test_frame_snf_oracle():
    # invariant factors of a saturated basis are all 1
    from sympy.matrices.normalforms import smith_normal_form

    rng = np.random.default_rng(11)
    done = 0
    while done < 25:
        n = int(rng.integers(2, 6))
        vecs = rng.integers(-9, 10, size=(2, n)).tolist()
        if rank(vecs) < 2:
            continue
        b = saturated_rank2_basis(vecs)
        snf = smith_normal_form(sympy.Matrix(b), domain=sympy.ZZ)
        assert [abs(snf[i, i]) for i in range(2)] == [1, 1]
        f = complete_to_unimodular(b)
        assert f.check() and abs(f.det()) == 1
        assert f.apply(b[0])[:2] == (1, 0) and f.apply(b[1])[:2] == (0, 1)
        assert all(x == 0 for x in f.apply(b[0])[2:] + f.apply(b[1])[2:])
        done += 1


@settings(max_examples=50, deadline=None)
@given(rank2_sets())
def test_frame_inverse_exact(vecs):
    f = complete_to_unimodular(saturated_rank2_basis(vecs))
    assert f.check()
    for row in f.inverse:
        assert all(isinstance(x, int) for x in row)


@given(st.tuples(ints, ints).filter(lambda v: any(v)))
def test_complement_vector(n):
    n = primitive(n)
    m = (-n[1], n[0])
    mp = complement_vector(m, n)
    assert n[0] * mp[0] + n[1] * mp[1] == 1
    assert abs(m[0] * mp[1] - m[1] * mp[0]) == 1
