"""
Test the Powers CP map, its GNS fiber and the comparison with the spatial product
"""
import numpy as np
import pytest

from corrlab.app.services.correspondence import CPMap, identity_correspondence
from corrlab.app.services.powers_product import (
    SpatialDatum,
    _gns_multiplicity,
    build_module_powers_map,
    build_powers_map,
    compare_with_spatial_product,
    n_step_check,
    powers_kraus,
    predicted_gns,
    tensor_power_datum,
    verify_module_powers_gns,
    verify_powers_gns,
)
from corrlab.app.services.product_system import hilbert_system
from corrlab.app.services.star_algebra import full_matrix_algebra
from corrlab.app.utils.errors import InvalidStructureError, NumericError, RefusedError


def test_spatial_datum_validation():
    with pytest.raises(InvalidStructureError):
        SpatialDatum(0, np.zeros(0))
    with pytest.raises(InvalidStructureError, match="length"):
        SpatialDatum(2, np.array([1.0, 0.0, 0.0]))
    with pytest.raises(InvalidStructureError, match="unit vector"):
        SpatialDatum(2, np.array([1.0, 1.0]))


def test_spatial_datum_complement():
    datum = SpatialDatum.random(4, 9)
    comp = datum.complement()
    assert comp.shape == (4, 3)
    np.testing.assert_allclose(datum.omega.conj() @ comp, np.zeros(3), atol=1e-12)


def test_tensor_power_datum():
    datum = SpatialDatum(2, np.array([0.6, 0.8]))
    square = tensor_power_datum(datum, 2)
    assert square.k == 4
    np.testing.assert_allclose(square.omega, [0.36, 0.48, 0.48, 0.64])
    with pytest.raises(InvalidStructureError):
        tensor_power_datum(datum, 0)


def test_kraus_count_and_block_formula(tol):
    d1, d2 = SpatialDatum.basis_vector(3), SpatialDatum.random(2, 4)
    assert len(powers_kraus(2, d1, d2)) == 1 + 2 + 1

    powers = build_powers_map(2, d1, d2, tol)
    assert powers.source.rep_dim == 4
    assert powers.target.rep_dim == 10
    assert powers.block_formula_residual() < 1e-12
    assert powers.cp.unital_defect() < 1e-12


def test_build_powers_map_rejects_empty_g(tol):
    with pytest.raises(InvalidStructureError):
        build_powers_map(0, SpatialDatum.basis_vector(2), SpatialDatum.basis_vector(2), tol)


def test_gns_multiplicity_is_spatial_not_tensor(tol):
    powers = build_powers_map(1, SpatialDatum.basis_vector(2), SpatialDatum.basis_vector(2), tol)
    report = verify_powers_gns(powers, tol)

    assert report["passed"]
    assert report["gns_multiplicity"] == 3
    assert report["expected_multiplicity"] == 3
    assert report["h_dim"] == 6
    assert report["iso"]["certified"]


def test_predicted_model_reproduces_map(tol):
    powers = build_powers_map(2, SpatialDatum.random(3, 1), SpatialDatum.random(2, 2), tol)
    model = predicted_gns(powers, tol)

    assert model.multiplicity == 4
    assert model.h_dim == 16
    np.testing.assert_allclose(model.phi1.conj().T @ model.phi1, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(model.phi1.conj().T @ model.phi2,
                               np.outer(powers.data1.omega, powers.data2.omega.conj()), atol=1e-12)


def test_comparison_with_spatial_product(tol):
    powers = build_powers_map(1, SpatialDatum.basis_vector(2), SpatialDatum.basis_vector(2), tol)
    report = compare_with_spatial_product(powers, tol)

    assert report["passed"]
    assert report["dims"] == {"spatial": 3, "tensor": 4, "gns_multiplicity": 3}
    assert report["not_tensor_product"]
    assert report["verdict"] == "not tensor product"
    assert max(report["tipdef"].values()) < 1e-9


def test_one_dimensional_factor_coincides_with_tensor_product(tol):
    powers = build_powers_map(1, SpatialDatum.random(3, 5), SpatialDatum.basis_vector(1), tol)
    report = compare_with_spatial_product(powers, tol)

    assert report["passed"]
    assert report["dims"]["spatial"] == report["dims"]["tensor"] == 3
    assert report["verdict"] == "coincides with tensor product"


@pytest.mark.parametrize("g, k1, k2, seed", [(1, 2, 2, 0), (2, 3, 2, 1), (1, 3, 3, 2)])
def test_spatial_fiber_carries_unitarily_onto_gns_space(g, k1, k2, seed, tol):
    powers = build_powers_map(g, SpatialDatum.random(k1, seed), SpatialDatum.random(k2, seed + 10), tol)
    report = compare_with_spatial_product(powers, tol)

    assert report["passed"]
    assert report["residuals"]["gns_unitary"] < 1e-8
    assert report["dims"]["gns_multiplicity"] == k1 + k2 - 1


def test_gns_multiplicity_needs_whole_copies(tol):
    odd = CPMap.identity(full_matrix_algebra(3))
    with pytest.raises(NumericError, match="not a multiple"):
        _gns_multiplicity(odd, 1, tol)
    assert _gns_multiplicity(CPMap.identity(full_matrix_algebra(2)), 1, tol) == 1


def test_n_step_fibers(tol):
    powers = build_powers_map(1, SpatialDatum.basis_vector(2), SpatialDatum.basis_vector(2), tol)
    report = n_step_check(powers, 2, tol)

    assert report["passed"]
    assert report["gns_multiplicity"] == 7
    assert report["fiber_dim"] == report["predicted_fiber_dim"] == 9
    assert report["embedding_residual"] < 1e-8


def test_comparison_runs_requested_steps(tol):
    powers = build_powers_map(1, SpatialDatum.basis_vector(2), SpatialDatum.basis_vector(1), tol)
    report = compare_with_spatial_product(powers, tol, steps=2)
    assert sorted(report["n_step"]) == ["1", "2"]
    assert report["passed"]


def test_module_powers_map_over_scalars(tol):
    e1 = hilbert_system(2, tol).generator
    e2 = hilbert_system(3, tol).generator
    omega1, omega2 = np.eye(2)[:, [0]], np.eye(3)[:, [0]]
    powers = build_module_powers_map(e1, omega1, e2, omega2, tol)
    report = verify_module_powers_gns(powers, tol)

    assert report["fiber_h_dim"] == 4
    assert report["gns_h_dim"] == 8
    assert report["passed"]


def test_module_powers_map_over_cc(cc, tol):
    e = identity_correspondence(cc, tol)
    powers = build_module_powers_map(e, np.eye(2), e, np.eye(2), tol)
    report = verify_module_powers_gns(powers, tol)

    assert report["fiber_h_dim"] == 2
    assert report["passed"]


def test_module_powers_map_refuses_non_central_reference(c_m2, tol):
    e = identity_correspondence(c_m2, tol)
    swap = c_m2.from_blocks([np.eye(1), np.array([[0, 1], [1, 0]])])
    with pytest.raises(RefusedError):
        build_module_powers_map(e, swap, e, np.eye(3), tol)
