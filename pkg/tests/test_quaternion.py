import numpy as np
import pytest
from hypothesis import given, strategies as st

from flowphys.errors import DataError
from flowphys.quaternion import (
    IDENTITY,
    as_vec,
    Quaternion,
    from_vec,
    hamilton_product,
    norm,
    quaternion_matrix,
)

I = Quaternion(0, 1, 0, 0)
J = Quaternion(0, 0, 1, 0)
K = Quaternion(0, 0, 0, 1)

finite = st.floats(min_value=-10, max_value=10, allow_nan=False, allow_infinity=False)
quats = st.builds(Quaternion, finite, finite, finite, finite)


def test_basis_table():
    assert hamilton_product(I, J) == K
    assert hamilton_product(J, K) == I
    assert hamilton_product(K, I) == J
    assert hamilton_product(I, I) == Quaternion(-1, 0, 0, 0)
    assert hamilton_product(J, J) == Quaternion(-1, 0, 0, 0)
    assert hamilton_product(K, K) == Quaternion(-1, 0, 0, 0)


def test_identity_element():
    q = Quaternion(0.3, -1.2, 2.5, 0.7)
    assert hamilton_product(IDENTITY, q) == q
    assert hamilton_product(q, IDENTITY) == q


def test_noncommutative():
    assert hamilton_product(I, J) != hamilton_product(J, I)


@given(quats, quats, quats)
def test_associative(q1, q2, q3):
    left = hamilton_product(hamilton_product(q1, q2), q3)
    right = hamilton_product(q1, hamilton_product(q2, q3))
    np.testing.assert_allclose(as_vec(left), as_vec(right), atol=1e-9)


@given(quats, quats)
def test_norm_multiplicative(q1, q2):
    got = norm(hamilton_product(q1, q2))
    np.testing.assert_allclose(got, norm(q1) * norm(q2), atol=1e-9)


@given(quats, quats)
def test_matrix_homomorphism(q1, q2):
    prod_mat = quaternion_matrix(hamilton_product(q1, q2))
    mat_prod = quaternion_matrix(q1) @ quaternion_matrix(q2)
    np.testing.assert_allclose(prod_mat, mat_prod, atol=1e-9)


def test_matrix_acts_as_left_multiplication(rng):
    q1 = from_vec(rng.standard_normal(4))
    q2 = from_vec(rng.standard_normal(4))
    np.testing.assert_allclose(
        quaternion_matrix(q1) @ as_vec(q2),
        as_vec(hamilton_product(q1, q2)),
        atol=1e-12,
    )


def test_matrix_of_identity():
    np.testing.assert_array_equal(quaternion_matrix(IDENTITY), np.eye(4))


def test_rejects_non_finite():
    with pytest.raises(DataError):
        Quaternion(np.nan, 0, 0, 0)
    with pytest.raises(DataError):
        Quaternion(0, np.inf, 0, 0)
