from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from oracles import pf_permutation
from pfaffian_lab.errors import (
    DimensionMismatch,
    DimensionTooLarge,
    IndexOutOfRange,
    NotSkewSymmetric,
    OddDimension,
)
from pfaffian_lab.pfaffian import (
    Pairing,
    SkewMatrix,
    crossing_sign,
    det_exact,
    format_matrix,
    iter_pairings,
    pf_enumerate,
    pf_expand,
    pf_stable,
    pf_sum_expand,
    pfaffian,
    read_matrix,
    submatrix,
)


def rational_skew(dim, entries):
    it = iter(entries)
    return SkewMatrix.from_upper(dim, func=lambda i, j: next(it), field="rational")


@st.composite
def rational_matrices(draw, dims=(2, 4, 6)):
    dim = draw(st.sampled_from(dims))
    vals = draw(st.lists(st.fractions(min_value=-5, max_value=5, max_denominator=4),
                         min_size=dim * (dim - 1) // 2, max_size=dim * (dim - 1) // 2))
    return rational_skew(dim, vals)


@st.composite
def float_matrices(draw, dims=(2, 4, 6, 8, 10)):
    dim = draw(st.sampled_from(dims))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    rng = np.random.default_rng(seed)
    return SkewMatrix.from_upper(dim, func=lambda i, j: float(rng.standard_normal()), field="float")


def test_identity_blocks():
    a = SkewMatrix.from_upper(4, [1, 0, 0, 0, 0, 1])
    assert pf_enumerate(a) == pf_expand(a) == 1
    assert pf_stable(a) == pytest.approx(1.0)


def test_generic_4x4_formula():
    a = rational_skew(4, [2, 3, 5, 7, 11, 13])
    # a12 a34 - a13 a24 + a14 a23
    assert pf_expand(a) == 2 * 13 - 3 * 11 + 5 * 7 == 28


def test_two_by_two():
    a = SkewMatrix.from_upper(2, [Fraction(3, 7)])
    assert pf_expand(a) == Fraction(3, 7)


def test_zero_dim_is_one():
    assert pf_expand(SkewMatrix.zeros(0)) == 1


def test_odd_dimension_rejected():
    a = SkewMatrix.zeros(3)
    for fn in (pf_enumerate, pf_expand, pf_stable):
        with pytest.raises(OddDimension):
            fn(a)


def test_enumerate_size_guard():
    with pytest.raises(DimensionTooLarge):
        pf_enumerate(SkewMatrix.zeros(14))


def test_sum_expansion_size_guard():
    with pytest.raises(DimensionTooLarge):
        pf_sum_expand(SkewMatrix.zeros(12), SkewMatrix.zeros(12))


def test_not_skew_rejected():
    with pytest.raises(NotSkewSymmetric):
        SkewMatrix([[0, 1], [1, 0]])
    with pytest.raises(NotSkewSymmetric):
        SkewMatrix([[1.0, 0.0], [0.0, 0.0]])


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        SkewMatrix.zeros(2) + SkewMatrix.zeros(4)


def test_expand_row_out_of_range():
    with pytest.raises(IndexOutOfRange):
        pf_expand(SkewMatrix.zeros(4), row=4)


def test_pairing_crossings():
    assert crossing_sign(Pairing([(0, 1), (2, 3)])) == 1
    assert crossing_sign(Pairing([(0, 2), (1, 3)])) == -1
    assert crossing_sign(Pairing([(0, 3), (1, 2)])) == 1
    assert Pairing([(0, 2), (1, 3)]).crossings() == 1


@pytest.mark.parametrize("dim,count", [(2, 1), (4, 3), (6, 15), (8, 105)])
def test_number_of_pairings(dim, count):
    assert sum(1 for _ in iter_pairings(dim)) == count


def test_submatrix_sorted_and_deduplicated():
    a = rational_skew(4, [1, 2, 3, 4, 5, 6])
    s = submatrix(a, [3, 0, 3])
    assert s.to_list() == [[0, 3], [-3, 0]]
    with pytest.raises(IndexOutOfRange):
        submatrix(a, [5])


def test_matrix_file_roundtrip():
    text = "# a comment\n4\n0 1/2 0 0\n-1/2 0 0 0.25\n0 0 0 1\n0 -0.25 -1 0\n"
    a = read_matrix(text)
    assert a.is_exact
    assert a.to_list()[1][3] == Fraction(1, 4)
    assert read_matrix(format_matrix(a)) == a


@settings(max_examples=60, deadline=None)
@given(rational_matrices(dims=(2, 4, 6)))
def test_enumerate_matches_permutation_oracle(a):
    assert pf_enumerate(a) == pf_permutation(a.to_list())


@settings(max_examples=80, deadline=None)
@given(rational_matrices(dims=(2, 4, 6, 8)), st.integers(0, 7))
def test_expand_any_row_matches_enumerate(a, row):
    row = row % a.dim
    assert pf_expand(a, row) == pf_enumerate(a)


@settings(max_examples=60, deadline=None)
@given(rational_matrices(dims=(2, 4, 6, 8)))
def test_square_is_determinant(a):
    p = pf_expand(a)
    assert p * p == det_exact(a)
    assert det_exact(a) == Fraction(sympy.Matrix(a.to_list()).det())


@settings(max_examples=60, deadline=None)
@given(float_matrices(dims=(2, 4, 6, 8, 10, 12, 14, 16)))
def test_stable_matches_expand(a):
    ref = float(pf_expand(a))
    assert pf_stable(a) == pytest.approx(ref, rel=1e-10, abs=1e-12)
    assert pf_stable(a) ** 2 == pytest.approx(np.linalg.det(a.entries), rel=1e-8, abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(float_matrices(dims=(2, 4, 6, 8)), st.integers(0, 2 ** 32 - 1))
def test_congruence(a, seed):
    b = np.random.default_rng(seed).standard_normal((a.dim, a.dim))
    lhs = pf_stable(a.congruence(b))
    assert lhs == pytest.approx(np.linalg.det(b) * pf_stable(a), rel=1e-8, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(rational_matrices(dims=(2, 4, 6)), rational_matrices(dims=(2, 4, 6)))
def test_sum_expansion_exact(a, b):
    if a.dim != b.dim:
        b = SkewMatrix.zeros(a.dim)
    assert pf_sum_expand(a, b) == pf_expand(a + b)


@settings(max_examples=40, deadline=None)
@given(float_matrices(dims=(2, 4, 6, 8)), st.floats(0.1, 3.0))
def test_scaling_homogeneity(a, lam):
    assert pf_stable(a.scaled(np.full(a.dim, lam))) == pytest.approx(
        lam ** a.dim * pf_stable(a), rel=1e-9, abs=1e-12)


def test_row_swap_sign():
    a = rational_skew(4, [1, 2, 3, 4, 5, 6])
    perm = np.eye(4, dtype=int)[[1, 0, 2, 3]]
    swapped = a.congruence([[Fraction(int(v)) for v in row] for row in perm])
    assert pf_expand(swapped) == -pf_expand(a)


def test_pfaffian_dispatch():
    rng = np.random.default_rng(0)
    big = SkewMatrix.from_upper(20, func=lambda i, j: float(rng.standard_normal()), field="float")
    assert pfaffian(big) == pf_stable(big)
    small = rational_skew(4, [1, 2, 3, 4, 5, 6])
    assert isinstance(pfaffian(small), Fraction)


def test_stable_exact_zero_pivot():
    assert pf_stable(SkewMatrix.zeros(4)) == 0.0
