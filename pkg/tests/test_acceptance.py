"""
Acceptance checks: every bundled scenario passes, and the structural statements hold on random instances
"""
import itertools

import numpy as np
import pytest
from scipy.stats import unitary_group

from corrlab.app.services.correspondence import (
    CPMap,
    commutant,
    flip_check,
    gns,
    iso_check,
    multiplicity_matrix,
    random_correspondence,
)
from corrlab.app.services.endo_system import Endomorphism, construct_via_unit, duality_check
from corrlab.app.services.numeric_kernel import Tolerance
from corrlab.app.services.powers_product import (
    SpatialDatum,
    build_powers_map,
    compare_with_spatial_product,
    predicted_gns,
    verify_powers_gns,
)
from corrlab.app.services.scenario_service import run_scenario, run_suite
from corrlab.app.services.star_algebra import (
    commutant_algebra,
    full_matrix_algebra,
    make_multimatrix,
    random_representation,
)
from corrlab.app.services.vn_module import check_totality, induced_rep, intertwiner_module, defining_module

from conftest import CORPUS_DIR

SCENARIOS = sorted(p.name for p in CORPUS_DIR.glob("*.json"))
TOL = Tolerance(abs_eps=1e-9, rel_eps=1e-8)


@pytest.mark.parametrize("name", SCENARIOS)
def test_corpus_scenario_passes(name):
    report = run_scenario(CORPUS_DIR / name)
    assert report.verdict == "pass", report.message or report.results


def test_known_verdicts():
    non1ex = run_scenario(CORPUS_DIR / "non1ex-unit-vector.json")
    assert non1ex.results["certificate"]["verdict"] == "impossible"
    assert non1ex.results["full"]

    square = run_scenario(CORPUS_DIR / "powers-2x2.json")
    assert square.results["dims"] == {"spatial": 3, "tensor": 4, "gns_multiplicity": 3, "H": 3}


@pytest.mark.slow
def test_whole_corpus_as_suite():
    report = run_suite(CORPUS_DIR, jobs=2)
    assert report.total == len(SCENARIOS)
    assert report.verdict == "pass", {r.scenario: r.verdict for r in report.reports if r.verdict != "pass"}


def random_blocks(rng):
    count = int(rng.integers(1, 4))
    return [(int(rng.integers(1, 4)), int(rng.integers(1, 3))) for _ in range(count)]


def check_totality_and_round_trip(seed):
    rng = np.random.default_rng(seed)
    algebra = make_multimatrix(random_blocks(rng))
    prime = commutant_algebra(algebra, TOL)
    mult = [int(m) for m in rng.integers(0, 3, size=len(prime.blocks))]
    if not any(mult):
        mult[0] = 1
    module = intertwiner_module(algebra, random_representation(prime, mult, seed), TOL)
    assert check_totality(module, TOL)
    induced = induced_rep(module, TOL)
    back = intertwiner_module(algebra, induced.rho_prime, TOL)
    same, residual = back.span.same_span(induced.module_h.span, TOL)
    assert same, residual


@pytest.mark.parametrize("seed", range(5))
def test_totality_and_bijection(seed):
    check_totality_and_round_trip(seed)


@pytest.mark.slow
def test_totality_and_bijection_full():
    for seed in range(100):
        check_totality_and_round_trip(seed)


def check_flip_and_double_commutant(seed):
    rng = np.random.default_rng(seed)
    algebra = [make_multimatrix([(1, 1), (1, 1)]), make_multimatrix([(1, 1), (2, 1)])][seed % 2]
    mults = [rng.integers(1, 3, size=(2, 2)) for _ in range(2)]
    e1 = random_correspondence(algebra, mults[0], seed, tol=TOL)
    e2 = random_correspondence(algebra, mults[1], seed + 1000, tol=TOL)
    report = flip_check(e1, e2, TOL)
    assert report.passed
    np.testing.assert_array_equal(report.product_multiplicity, mults[0] @ mults[1])
    np.testing.assert_array_equal(report.iso.left_multiplicity, (mults[0] @ mults[1]).T)

    double = commutant(commutant(e1, TOL), TOL)
    np.testing.assert_array_equal(multiplicity_matrix(double, TOL), mults[0])
    assert iso_check(e1, double, TOL).certified


@pytest.mark.parametrize("seed", range(4))
def test_flip_and_double_commutant(seed):
    check_flip_and_double_commutant(seed)


@pytest.mark.slow
def test_flip_and_double_commutant_full():
    for seed in range(50):
        check_flip_and_double_commutant(seed)


@pytest.mark.parametrize("n, rank, seed", [(2, 1, 0), (2, 4, 1), (3, 2, 2), (3, 4, 3)])
def test_gns_of_random_kraus_map(n, rank, seed):
    rng = np.random.default_rng(seed)
    algebra = full_matrix_algebra(n)
    kraus = [rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)) for _ in range(rank)]
    cp = CPMap(algebra, algebra, kraus=kraus)
    construction = gns(cp, TOL)

    for a in algebra.basis.basis:
        xi = construction.xi
        np.testing.assert_allclose(xi.conj().T @ construction.correspondence.rho(a) @ xi,
                                   cp.apply(a), atol=1e-9)
    kraus_rank = np.linalg.matrix_rank(np.array([k.reshape(-1) for k in kraus]))
    assert multiplicity_matrix(construction.correspondence, TOL)[0, 0] == kraus_rank


def test_depolarizing_composition():
    m2 = full_matrix_algebra(2)
    half = CPMap.depolarizing(m2, 0.5)
    assert half.compose(half).distance(CPMap.depolarizing(m2, 0.75)) < 1e-10


@pytest.mark.parametrize("d", [2, 3, 5])
def test_inner_endomorphisms(d):
    module = defining_module(full_matrix_algebra(d))
    theta = Endomorphism.inner(module, unitary_group.rvs(d, random_state=d), TOL)
    construction = construct_via_unit(theta, np.eye(d))
    assert construction.residual < 1e-9
    if d <= 3:
        assert duality_check(theta, np.eye(d)).passed


def check_powers(g, k1, k2):
    powers = build_powers_map(g, SpatialDatum.basis_vector(k1), SpatialDatum.basis_vector(k2), TOL)
    verified = verify_powers_gns(powers, TOL)
    assert verified["gns_multiplicity"] == k1 + k2 - 1
    assert predicted_gns(powers, TOL).residual < 1e-10
    comparison = compare_with_spatial_product(powers, TOL)
    assert comparison["passed"]
    assert comparison["not_tensor_product"] == (k1 >= 2 and k2 >= 2)


@pytest.mark.parametrize("g, k1, k2", [(1, 1, 2), (1, 3, 2), (2, 2, 2)])
def test_powers_grid(g, k1, k2):
    check_powers(g, k1, k2)


@pytest.mark.slow
def test_powers_grid_full():
    for g, k1, k2 in itertools.product((1, 2), (1, 2, 3), (1, 2, 3)):
        check_powers(g, k1, k2)
