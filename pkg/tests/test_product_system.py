"""
Test discrete product systems, units and the spatial product
"""
import numpy as np
import pytest

from corrlab.app.services.correspondence import (
    identity_correspondence,
    iso_check,
    random_correspondence,
    scalar_correspondence,
)
from corrlab.app.services.product_system import (
    FiberSystem,
    central_unit,
    complement_multiplicity,
    cp_from_unit,
    hilbert_system,
    identity_system,
    is_central,
    make_unit,
    spatial_product,
)
from corrlab.app.services.vn_module import defining_module
from corrlab.app.utils.errors import InvalidStructureError, RefusedError


def basis_vector(k, i):
    v = np.zeros((k, 1), dtype=complex)
    v[i, 0] = 1.0
    return v


def test_hilbert_system_fibers_grow_as_powers(tol):
    system = hilbert_system(2, tol)
    assert [system.power(n).h_dim for n in range(4)] == [1, 2, 4, 8]
    assert system.describe(2)["fibers"][2]["multiplicity"] == [[4]]


def test_fiber_index_validation(tol):
    system = hilbert_system(2, tol)
    with pytest.raises(InvalidStructureError):
        system.power(-1)
    with pytest.raises(InvalidStructureError):
        system.frame(1)
    with pytest.raises(InvalidStructureError):
        hilbert_system(0, tol)


def test_fiber_system_needs_bb_correspondence(cc, tol):
    with pytest.raises(InvalidStructureError):
        FiberSystem(scalar_correspondence(defining_module(cc), tol), tol)


def test_words_of_orthonormal_vectors_are_orthonormal(tol):
    system = hilbert_system(2, tol)
    e0, e1 = basis_vector(2, 0), basis_vector(2, 1)
    words = [system.word([a, b, c]) for a in (e0, e1) for b in (e0, e1) for c in (e0, e1)]
    gram = np.array([[(u.conj().T @ v)[0, 0] for v in words] for u in words])
    np.testing.assert_allclose(gram, np.eye(8), atol=1e-9)


def test_associativity_of_fibers(c_m2, tol):
    system = identity_system(c_m2, tol)
    result = system.check_associativity(1, 2)
    assert result.isomorphic and result.certified


def test_new_fibers_record_associator_residuals(cc, tol):
    system = FiberSystem(random_correspondence(cc, [[1, 1], [1, 1]], 7, tol=tol), tol)
    system.power(2)
    assert system.associator_residuals == {}

    system.power(4)
    assert sorted(system.associator_residuals) == [3, 4]
    assert max(system.associator_residuals.values()) < 1e-8


def test_central_unit_gives_identity_semigroup(tol):
    system = hilbert_system(3, tol)
    unit = central_unit(system, basis_vector(3, 0))

    assert unit.is_unital()
    for n in range(3):
        cp = cp_from_unit(unit, n)
        np.testing.assert_allclose(cp.apply(np.eye(1)), np.eye(1), atol=1e-9)
    np.testing.assert_allclose(np.linalg.norm(unit.element(3)), 1.0, atol=1e-9)


def test_central_unit_refuses_non_unital(tol):
    system = hilbert_system(2, tol)
    with pytest.raises(RefusedError, match="not unital"):
        central_unit(system, 2 * basis_vector(2, 0))


def test_non_central_unit_is_detected(c_m2, tol):
    system = identity_system(c_m2, tol)
    swap = c_m2.from_blocks([np.eye(1), np.array([[0, 1], [1, 0]])])
    unit = make_unit(system, swap)

    central, residual = is_central(unit)
    assert not central
    assert residual > 0.1
    with pytest.raises(RefusedError, match="not central"):
        central_unit(system, swap)


def test_make_unit_rejects_foreign_element(cc, tol):
    system = identity_system(cc, tol)
    with pytest.raises(InvalidStructureError):
        make_unit(system, np.array([[0, 1], [0, 0]], dtype=complex))


def test_complement_multiplicity_of_hilbert_fiber(tol):
    system = hilbert_system(3, tol)
    unit = central_unit(system, basis_vector(3, 0))
    np.testing.assert_array_equal(complement_multiplicity(system, unit), [[2]])


def test_spatial_product_of_hilbert_systems(tol):
    s1, s2 = hilbert_system(2, tol), hilbert_system(3, tol)
    w1 = central_unit(s1, basis_vector(2, 0))
    w2 = central_unit(s2, basis_vector(3, 0))
    product = spatial_product(s1, w1, s2, w2, tol)

    assert product.system.generator.h_dim == 4
    assert product.amalgamation_residual < 1e-9
    report = product.embedding_report()
    assert report["intersection_dim"] == report["unit_span_dim"] == 1.0
    assert max(v for k, v in report.items() if not k.endswith("_dim")) < 1e-9
    np.testing.assert_array_equal(complement_multiplicity(product.system, product.unit), [[3]])
    assert product.system.power(2).h_dim == 16


def test_spatial_product_is_unique_up_to_isomorphism(tol):
    s1, s2 = hilbert_system(2, tol), hilbert_system(3, tol)
    first = spatial_product(s1, central_unit(s1, basis_vector(2, 0)), s2, central_unit(s2, basis_vector(3, 0)), tol)
    t1, t2 = hilbert_system(2, tol), hilbert_system(3, tol)
    other = np.array([[0.6], [0.8j]])
    second = spatial_product(t1, central_unit(t1, other), t2, central_unit(t2, basis_vector(3, 2)), tol)

    assert iso_check(first.system.generator, second.system.generator, tol).certified
    assert iso_check(first.system.power(2), second.system.power(2), tol).certified


def test_spatial_product_of_identity_systems_is_identity(cc, tol):
    s1, s2 = identity_system(cc, tol), identity_system(cc, tol)
    w1 = central_unit(s1, np.eye(2))
    w2 = central_unit(s2, np.eye(2))
    product = spatial_product(s1, w1, s2, w2, tol)

    assert product.system.generator.h_dim == 2
    np.testing.assert_array_equal(complement_multiplicity(product.system, product.unit), np.zeros((2, 2)))


def test_spatial_product_checks_ownership_and_base(cc, tol):
    s1, s2 = hilbert_system(2, tol), hilbert_system(2, tol)
    w1 = central_unit(s1, basis_vector(2, 0))
    w2 = central_unit(s2, basis_vector(2, 0))
    with pytest.raises(InvalidStructureError, match="another system"):
        spatial_product(s1, w2, s2, w1, tol)

    s3 = identity_system(cc, tol)
    w3 = central_unit(s3, np.eye(2))
    with pytest.raises(InvalidStructureError):
        spatial_product(s1, w1, s3, w3, tol)


def test_identity_correspondence_unit_is_central(c_m2, tol):
    system = FiberSystem(identity_correspondence(c_m2, tol), tol)
    unit = central_unit(system, np.eye(3))
    assert unit.central_residual < 1e-12


def check_semigroup(unit, top):
    for m in range(top + 1):
        for n in range(top + 1 - m):
            composed = cp_from_unit(unit, n).compose(cp_from_unit(unit, m))
            assert cp_from_unit(unit, m + n).distance(composed) < 1e-8, (m, n)


def test_semigroup_law_for_non_central_unitary_unit(c_m2, tol):
    system = identity_system(c_m2, tol)
    swap = c_m2.from_blocks([np.eye(1), np.array([[0, 1], [1, 0]])])
    unit = make_unit(system, swap)
    assert unit.is_unital() and not is_central(unit)[0]

    one_step = cp_from_unit(unit, 1)
    b = c_m2.from_blocks([np.eye(1), np.diag([1.0, 2.0])])
    np.testing.assert_allclose(one_step.apply(b), c_m2.from_blocks([np.eye(1), np.diag([2.0, 1.0])]), atol=1e-9)
    check_semigroup(unit, 3)


def test_semigroup_law_for_non_unital_unit(c_m2, tol):
    rng = np.random.default_rng(11)
    system = identity_system(c_m2, tol)
    element = c_m2.from_blocks([
        rng.standard_normal((1, 1)),
        rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)),
    ])
    unit = make_unit(system, 0.5 * element / np.linalg.norm(element, 2))
    assert not unit.is_unital()
    check_semigroup(unit, 3)


def test_semigroup_law_on_random_generator(cc, tol):
    rng = np.random.default_rng(5)
    system = FiberSystem(random_correspondence(cc, [[1, 1], [1, 1]], 3, tol=tol), tol)
    basis = system.generator.module.span.basis
    xi1 = sum(complex(rng.standard_normal(), rng.standard_normal()) * x for x in basis)
    unit = make_unit(system, xi1 / np.linalg.norm(xi1, 2))
    assert not is_central(unit)[0]
    check_semigroup(unit, 3)
