"""
Test multimatrix algebras, commutants and representations
"""
import gc
import weakref

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corrlab.app.services.star_algebra import (
    amplify,
    commutant_algebra,
    contains,
    defining_representation,
    full_matrix_algebra,
    make_multimatrix,
    random_representation,
    restrict_blocks,
    scalars,
)
from corrlab.app.utils.errors import InvalidStructureError, ShapeMismatchError

blocks_strategy = st.lists(
    st.tuples(st.integers(min_value=1, max_value=3), st.integers(min_value=1, max_value=2)),
    min_size=1,
    max_size=3,
)


def test_make_multimatrix_sorts_blocks():
    algebra = make_multimatrix([(2, 1), (1, 1)])
    assert algebra.blocks == ((1, 1), (2, 1))
    assert algebra.dim == 5
    assert algebra.rep_dim == 3
    assert algebra.describe() == {"blocks": [[1, 1], [2, 1]], "rep_dim": 3, "dim": 5}


def test_make_multimatrix_rejects_empty():
    with pytest.raises(InvalidStructureError):
        make_multimatrix([])
    with pytest.raises(InvalidStructureError):
        make_multimatrix([(0, 1)])


def test_basis_is_orthonormal_and_closed(c_m2):
    assert c_m2.basis.gram_defect() < 1e-12
    assert c_m2.closure_defect() < 1e-12


def test_matrix_units_multiply(c_m2):
    e01 = c_m2.matrix_unit(1, 0, 1)
    e10 = c_m2.matrix_unit(1, 1, 0)
    np.testing.assert_allclose(e01 @ e10, c_m2.matrix_unit(1, 0, 0))
    np.testing.assert_allclose(
        c_m2.central_projection(0) + c_m2.central_projection(1), np.eye(3)
    )


def test_block_round_trip():
    algebra = make_multimatrix([(1, 2), (2, 1)])
    parts = [np.array([[2.0]]), np.array([[1, 1j], [0, 3]])]
    b = algebra.from_blocks(parts)

    assert contains(algebra, b)[0]
    np.testing.assert_allclose(algebra.block_of(b, 0), parts[0])
    np.testing.assert_allclose(algebra.block_of(b, 1), parts[1])


def test_contains_checks_shape(cc):
    with pytest.raises(ShapeMismatchError):
        contains(cc, np.eye(3))
    assert not contains(cc, np.array([[0, 1], [0, 0]]))[0]


def test_commutant_of_amplified_block():
    # M_2 ⊗ 1_2 has commutant 1_2 ⊗ M_2
    algebra = make_multimatrix([(2, 2)])
    prime = commutant_algebra(algebra)

    assert prime.blocks == ((2, 2),)
    for a in algebra.basis.basis:
        for b in prime.basis.basis:
            np.testing.assert_allclose(a @ b, b @ a, atol=1e-12)


def test_commutant_of_full_matrix_algebra_is_scalars():
    prime = commutant_algebra(full_matrix_algebra(3))
    assert prime.blocks == ((1, 3),)
    assert prime.dim == 1


@settings(max_examples=15, deadline=None)
@given(blocks_strategy)
def test_double_commutant_is_the_algebra(blocks):
    algebra = make_multimatrix(blocks)
    prime = commutant_algebra(algebra)
    double = commutant_algebra(prime)

    assert prime.blocks == tuple((m, n) for n, m in algebra.blocks)
    assert prime.closure_defect() < 1e-10
    assert double.same_as(algebra)


def test_amplify_contains_block_matrices(cc):
    m2 = amplify(cc, 2)
    assert m2.blocks == ((2, 1), (2, 1))
    assert m2.rep_dim == 4

    b = [np.diag([1.0, 2.0]), np.diag([0.0, 1j]), np.diag([3.0, 0.0]), np.diag([1.0, 1.0])]
    block = np.block([[b[0], b[1]], [b[2], b[3]]])
    assert contains(m2, block)[0]
    assert not contains(m2, np.block([[np.ones((2, 2)), np.zeros((2, 2))], [np.zeros((2, 2)), np.eye(2)]]))[0]
    assert m2.closure_defect() < 1e-12


def test_restrict_blocks_inclusion_is_isometric(c_m2):
    sub, inclusion = restrict_blocks(c_m2, [1])
    assert sub.blocks == ((2, 1),)
    np.testing.assert_allclose(inclusion.conj().T @ inclusion, np.eye(2))
    with pytest.raises(InvalidStructureError):
        restrict_blocks(c_m2, [])


def test_defining_representation_is_homomorphism(c_m2):
    rep = defining_representation(c_m2)
    assert rep.is_homomorphism()
    assert max(rep.residuals().values()) < 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=5_000))
def test_random_representation_is_homomorphism(seed):
    algebra = make_multimatrix([(1, 1), (2, 1)])
    rep = random_representation(algebra, [2, 1], seed)

    assert rep.space_dim == 4
    assert rep.is_homomorphism()
    b = algebra.random_element(seed)
    c = algebra.random_element(seed + 1)
    np.testing.assert_allclose(rep.apply(b @ c), rep.apply(b) @ rep.apply(c), atol=1e-10)


def test_random_representation_validation():
    algebra = scalars()
    with pytest.raises(ShapeMismatchError):
        random_representation(algebra, [1, 1], 0)
    with pytest.raises(InvalidStructureError):
        random_representation(algebra, [-1], 0)
    with pytest.raises(InvalidStructureError):
        random_representation(algebra, [0], 0)


def test_commutant_cache_is_keyed_on_structure():
    first = make_multimatrix([(2, 1), (1, 2)])
    second = make_multimatrix([(1, 2), (2, 1)])
    prime = commutant_algebra(first)
    assert first is not second
    assert commutant_algebra(second) is prime

    ref = weakref.ref(first)
    del first
    gc.collect()
    assert ref() is None
    assert prime.blocks == ((2, 1), (1, 2))
