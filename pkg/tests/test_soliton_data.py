from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings

from todakp import (
    OrderingError,
    OrderRangeError,
    PositivityError,
    SizeError,
    alpha_coordinates,
    from_alpha,
    make_soliton_data,
    maximal_minors,
    reciprocal_weights,
    representative_matrix,
    rref_coefficients,
    rref_matrix,
)

from conftest import soliton_data


def test_normalization_examples():
    assert make_soliton_data([-1, 1], [1, 1]).a == (0.5, 0.5)
    assert make_soliton_data([0, 1, 2], [2, 1, 1]).a == (0.5, 0.25, 0.25)


@pytest.mark.parametrize(
    "kappa, w, err",
    [
        ([0, 1, 2], [1, -1, 1], PositivityError),
        ([0, 1, 2], [1, 0, 1], PositivityError),
        ([0, 2, 1], [1, 1, 1], OrderingError),
        ([0, 0, 1], [1, 1, 1], OrderingError),
        ([0], [1], SizeError),
        ([0, 1], [1, 1, 1], SizeError),
        ([0, float("nan")], [1, 1], ValueError),
    ],
)
def test_invalid_data_rejected(kappa, w, err):
    with pytest.raises(err):
        make_soliton_data(kappa, w)


def test_alpha_of_worked_instance(worked):
    assert np.allclose(alpha_coordinates(worked).alpha, (1, 0.25, 0.5), rtol=0, atol=1e-15)


def test_alpha_matches_direct_product_formula():
    kap = [Fraction(-3, 2), Fraction(1, 3), Fraction(1), Fraction(5, 2)]
    w = [Fraction(1, 5), Fraction(2, 5), Fraction(1, 10), Fraction(3, 10)]
    n = len(kap)
    direct = []
    for j in range(n):
        v = (-1) ** (n - 1 - j) * w[j]
        for m in range(n):
            if m != j:
                v *= kap[j] - kap[m]
        direct.append(v)
    direct = [float(x / direct[0]) for x in direct]
    d = make_soliton_data([float(x) for x in kap], [float(x) for x in w])
    assert np.allclose(alpha_coordinates(d).alpha, direct, rtol=1e-14)


@settings(max_examples=40, deadline=None)
@given(soliton_data())
def test_alpha_round_trip(d):
    back = from_alpha(d.kappa, alpha_coordinates(d))
    assert np.allclose(back.a, d.a, rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(soliton_data())
def test_reciprocal_weights_is_an_involution(d):
    assert np.allclose(reciprocal_weights(reciprocal_weights(d)).a, d.a, rtol=1e-12)


def test_representative_matrix_worked(worked):
    B = representative_matrix(worked, 2).entries
    assert np.allclose(B, [[0.5, 0.25, 0.25], [0, 0.25, 0.5]], atol=1e-15)
    assert np.allclose(representative_matrix(worked, 1).entries, [worked.a])
    m = maximal_minors(worked, 2)
    assert m[(0, 1)] == pytest.approx(1 / 8)
    assert m[(0, 2)] == pytest.approx(1 / 4)
    assert m[(1, 2)] == pytest.approx(1 / 16)


@settings(max_examples=30, deadline=None)
@given(soliton_data(n_max=6))
def test_minors_match_determinants_and_are_positive(d):
    for k in range(1, d.n):
        B = representative_matrix(d, k).entries
        for I, v in maximal_minors(d, k).items():
            det = np.linalg.det(B[:, list(I)])
            assert v > 0
            assert det == pytest.approx(v, rel=1e-9, abs=1e-300)


def test_rref_worked(worked):
    assert np.allclose(rref_matrix(worked, 2).entries, [[1, 0, -0.5], [0, 1, 2]], atol=1e-15)
    assert np.allclose(rref_coefficients(worked, 2)[:, 0], [0.5, 2.0], atol=1e-15)


def test_rref_single_row_is_rescaling(worked):
    R = rref_matrix(worked, 1).entries
    assert np.allclose(R, [np.array(worked.a) / worked.a[0]])


@settings(max_examples=30, deadline=None)
@given(soliton_data(n_max=6))
def test_rref_matches_elimination(d):
    for k in range(1, d.n):
        B = representative_matrix(d, k).entries
        ref = np.linalg.solve(B[:, :k], B)
        assert np.allclose(rref_matrix(d, k).entries, ref, rtol=1e-7, atol=1e-9)
        assert np.all(rref_coefficients(d, k) > 0)


@pytest.mark.parametrize("k", [0, 3, -1])
def test_order_out_of_range(worked, k):
    with pytest.raises(OrderRangeError):
        representative_matrix(worked, k)
    with pytest.raises(OrderRangeError):
        rref_coefficients(worked, k)


def test_cauchy_binet_minors_exact():
    kap = [0, 1, 3]
    w = [Fraction(1, 2), Fraction(1, 3), Fraction(1, 6)]
    d = make_soliton_data(kap, [float(x) for x in w])
    for I in combinations(range(3), 2):
        exact = w[I[0]] * w[I[1]] * (kap[I[1]] - kap[I[0]])
        assert maximal_minors(d, 2)[I] == pytest.approx(float(exact), rel=1e-14)
