"""
Test concrete von Neumann modules, unit vectors and the module/representation bijection
"""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corrlab.app.services.numeric_kernel import empty_span
from corrlab.app.services.star_algebra import (
    commutant_algebra,
    full_matrix_algebra,
    make_multimatrix,
    random_representation,
    scalars,
)
from corrlab.app.services.vn_module import (
    check_totality,
    defining_module,
    induced_rep,
    inner_product_span,
    intertwiner_module,
    is_full,
    make_module,
    module_from_span,
    orthogonal_complement,
    restrict_to_range,
    submodule,
    unit_vector_certificate,
)
from corrlab.app.utils.errors import InvalidStructureError, RefusedError, ShapeMismatchError


def test_non1ex_module_is_full_without_unit_vector(non1ex_module, tol):
    assert non1ex_module.dim == 4
    assert is_full(non1ex_module, tol)

    cert = unit_vector_certificate(non1ex_module, tol)
    assert cert.verdict == "impossible"
    assert cert.witness is None
    m2_row = cert.obstruction[1]
    assert m2_row["size"] == 2
    assert m2_row["rank"] == 1
    assert cert.to_dict()["verdict"] == "impossible"


def test_defining_module_has_unit_vector(c_m2, tol):
    module = defining_module(c_m2)
    cert = unit_vector_certificate(module, tol)

    assert cert.verdict == "found"
    np.testing.assert_allclose(cert.witness.conj().T @ cert.witness, np.eye(3), atol=1e-9)
    assert module.contains(cert.witness, tol)[0]


def test_column_module_over_matrix_algebra():
    # E = B(C^2, C^3) over M_2
    algebra = full_matrix_algebra(2)
    module = make_module(algebra, 3, [np.eye(3)[:, :2]])
    assert module.dim == 6
    assert unit_vector_certificate(module).verdict == "found"


def test_make_module_rejects_escaping_inner_products(cc, tol):
    with pytest.raises(InvalidStructureError, match="escapes"):
        make_module(cc, 2, [np.array([[1, 1], [0, 0]], dtype=complex)], tol)


def test_make_module_checks_generator_shape(cc, tol):
    with pytest.raises(ShapeMismatchError):
        make_module(cc, 2, [np.ones((3, 2))], tol)


def test_inner_product_span_of_partial_module(cc, tol):
    module = make_module(cc, 1, [np.array([[1, 0]], dtype=complex)], tol)
    assert inner_product_span(module, tol).dim == 1
    assert not is_full(module, tol)


def test_totality(non1ex_module, tol):
    assert check_totality(non1ex_module, tol)
    half = make_module(scalars(), 2, [np.array([[1], [0]], dtype=complex)], tol)
    assert not check_totality(half, tol)


def test_empty_module_behaviour(cc, tol):
    empty = module_from_span(cc, 2, empty_span(2, 2), tol)
    assert empty.is_empty()
    assert not check_totality(empty, tol)
    assert not is_full(empty, tol)
    with pytest.raises(RefusedError):
        unit_vector_certificate(empty, tol)
    with pytest.raises(RefusedError):
        induced_rep(empty, tol)


def test_induced_rep_of_non1ex(non1ex_module, c_m2, tol):
    induced = induced_rep(non1ex_module, tol)

    assert induced.h_dim == 3
    assert induced.rho_prime.is_homomorphism(tol)
    # B^a(E) is the corner-swapped copy of B
    assert induced.adjointables.dim == 5
    prime = commutant_algebra(c_m2, tol)
    lam, mu = 2.0, -1.0
    b_prime = prime.central_projection(0) * lam + prime.central_projection(1) * mu
    np.testing.assert_allclose(
        np.sort(np.diag(induced.rho_prime.apply(b_prime)).real), [mu, lam, lam], atol=1e-9
    )


def test_induced_rep_and_intertwiners_are_inverse(non1ex_module, c_m2, tol):
    induced = induced_rep(non1ex_module, tol)
    back = intertwiner_module(c_m2, induced.rho_prime, tol)
    same, residual = back.span.same_span(induced.module_h.span, tol)
    assert same, residual


def test_intertwiner_module_requires_commutant_rep(c_m2, tol):
    rep = random_representation(c_m2, [1, 1], 0)
    with pytest.raises(InvalidStructureError):
        intertwiner_module(c_m2, rep, tol)


@settings(max_examples=25, deadline=None)
@given(
    st.lists(st.tuples(st.integers(min_value=1, max_value=3), st.integers(min_value=1, max_value=2)),
             min_size=1, max_size=3),
    st.integers(min_value=0, max_value=10_000),
    st.data(),
)
def test_intertwiners_of_any_commutant_rep_are_total(blocks, seed, data):
    algebra = make_multimatrix(blocks)
    prime = commutant_algebra(algebra)
    mult = data.draw(st.lists(st.integers(min_value=0, max_value=2),
                              min_size=len(prime.blocks), max_size=len(prime.blocks)))
    if sum(mult) == 0:
        mult[0] = 1
    rep = random_representation(prime, mult, seed)
    module = intertwiner_module(algebra, rep)

    assert check_totality(module)
    induced = induced_rep(module)
    for got, expected in zip(induced.rho_prime.images, rep.images):
        np.testing.assert_allclose(got, expected, atol=1e-8)


def test_restrict_to_range_makes_module_full(cc, tol):
    module = make_module(cc, 1, [np.array([[1, 0]], dtype=complex)], tol)
    restricted, inclusion = restrict_to_range(module, tol)

    assert restricted.algebra.blocks == ((1, 1),)
    assert inclusion.shape == (2, 1)
    assert is_full(restricted, tol)
    assert restricted.dim == module.dim


def test_orthogonal_complement(non1ex_module, tol):
    corner = np.zeros((3, 3), dtype=complex)
    corner[1, 0] = 1.0
    sub = submodule(non1ex_module, [corner], tol)
    rest = orthogonal_complement(non1ex_module, sub, tol)

    assert sub.dim + rest.dim == non1ex_module.dim
    for x in rest.span.basis:
        for y in sub.span.basis:
            np.testing.assert_allclose(y.conj().T @ x, np.zeros((3, 3)), atol=1e-10)


def test_submodule_must_lie_inside(non1ex_module, tol):
    with pytest.raises(InvalidStructureError):
        submodule(non1ex_module, [np.eye(3)], tol)


block_lists = st.lists(
    st.tuples(st.integers(min_value=1, max_value=3), st.integers(min_value=1, max_value=2)),
    min_size=1, max_size=3,
)


def random_element(algebra, rng):
    coeffs = rng.standard_normal(len(algebra.basis.basis)) + 1j * rng.standard_normal(len(algebra.basis.basis))
    return sum(c * b for c, b in zip(coeffs, algebra.basis.basis))


@settings(max_examples=25, deadline=None)
@given(block_lists, st.integers(min_value=0, max_value=10_000), st.data())
def test_complement_vanishes_only_for_the_whole_module(blocks, seed, data):
    rng = np.random.default_rng(seed)
    algebra = make_multimatrix(blocks)
    prime = commutant_algebra(algebra)
    mult = data.draw(st.lists(st.integers(min_value=0, max_value=2),
                              min_size=len(prime.blocks), max_size=len(prime.blocks)))
    if sum(mult) == 0:
        mult[0] = 1
    module = intertwiner_module(algebra, random_representation(prime, mult, seed))

    count = data.draw(st.integers(min_value=1, max_value=module.dim))
    generators = []
    for _ in range(count):
        picked = rng.choice(module.dim, size=int(rng.integers(1, module.dim + 1)), replace=False)
        generators.append(sum(complex(rng.standard_normal(), rng.standard_normal()) * module.basis[int(i)]
                              for i in picked))
    sub = submodule(module, generators)
    rest = orthogonal_complement(module, sub)

    assert sub.dim + rest.dim == module.dim
    assert rest.is_empty() == (sub.dim == module.dim)
    for x in rest.span.basis:
        for y in sub.span.basis:
            np.testing.assert_allclose(y.conj().T @ x, 0, atol=1e-8)


@settings(max_examples=25, deadline=None)
@given(block_lists, st.integers(min_value=1, max_value=3), st.integers(min_value=0, max_value=2),
       st.integers(min_value=0, max_value=10_000))
def test_module_and_induced_representation_determine_each_other(blocks, count, extra, seed):
    rng = np.random.default_rng(seed)
    algebra = make_multimatrix(blocks)
    g = algebra.rep_dim
    target_dim = count * g + extra
    # orthogonal ranges: <x_i, x_j> = 0 for i != j, <x_i, x_i> = b_i* b_i
    frame, _ = np.linalg.qr(rng.standard_normal((target_dim, count * g))
                            + 1j * rng.standard_normal((target_dim, count * g)))
    generators = [frame[:, i * g:(i + 1) * g] @ random_element(algebra, rng) for i in range(count)]
    module = make_module(algebra, target_dim, generators)

    induced = induced_rep(module)
    assert check_totality(induced.module_h)
    back = intertwiner_module(algebra, induced.rho_prime)
    same, residual = back.span.same_span(induced.module_h.span)
    assert same, residual
