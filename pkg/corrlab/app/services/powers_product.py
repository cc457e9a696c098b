"""The Powers CP map of two spatial multiplicity spaces and its GNS fiber.

T acts from B(G ⊕ G) to B((G ⊗ h¹) ⊕ (G ⊗ h²)) by

    [[a11, a12], [a21, a22]] ↦ [[a11 ⊗ 1, (1 ⊗ ω¹) a12 (1 ⊗ ω²)*],
                                [(1 ⊗ ω²) a21 (1 ⊗ ω¹)*, a22 ⊗ 1]]

and its GNS multiplicity space is the spatial product fiber of (h¹, ω¹) and (h², ω²),
of dimension k1 + k2 - 1.
"""

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from ..utils.errors import InvalidStructureError, NumericError, RefusedError
from ..utils.logging import logger
from .correspondence import (
    CPMap,
    Correspondence,
    cyclic_isometry,
    gns,
    iso_check,
    make_correspondence,
    multiplicity_matrix,
)
from .numeric_kernel import (
    DEFAULT_TOLERANCE,
    Tolerance,
    complement_basis,
    frobenius,
    gram_quotient,
    pseudo_inverse,
)
from .product_system import (
    FiberSystem,
    SpatialProduct,
    central_unit,
    hilbert_system,
    spatial_product,
)
from .star_algebra import Algebra, amplify, full_matrix_algebra, make_multimatrix
from .vn_module import make_module


@dataclass(frozen=True)
class SpatialDatum:
    k: int
    omega: np.ndarray

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=complex).reshape(-1)
        if self.k < 1:
            raise InvalidStructureError("multiplicity space dimension must be >= 1")
        if omega.shape != (self.k,):
            raise InvalidStructureError(f"reference vector has length {omega.shape[0]}, expected {self.k}")
        if abs(np.linalg.norm(omega) - 1.0) > 1e-9:
            raise InvalidStructureError("reference vector must be a unit vector")
        object.__setattr__(self, "omega", omega)

    @classmethod
    def basis_vector(cls, k: int, index: int = 0) -> "SpatialDatum":
        omega = np.zeros(k, dtype=complex)
        omega[index] = 1.0
        return cls(k, omega)

    @classmethod
    def random(cls, k: int, seed) -> "SpatialDatum":
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(k) + 1j * rng.standard_normal(k)
        return cls(k, v / np.linalg.norm(v))

    def complement(self) -> np.ndarray:
        """Orthonormal basis of the complement of ω, as columns."""
        return complement_basis(self.omega.reshape(-1, 1))


def tensor_power_datum(datum: SpatialDatum, n: int) -> SpatialDatum:
    """(h^{⊗n}, ω^{⊗n})."""
    if n < 1:
        raise InvalidStructureError("tensor powers start at 1")
    omega = datum.omega
    for _ in range(n - 1):
        omega = np.kron(omega, datum.omega)
    return SpatialDatum(datum.k ** n, omega)


@dataclass(frozen=True, eq=False)
class PowersMap:
    g_dim: int
    data1: SpatialDatum
    data2: SpatialDatum
    cp: CPMap

    @property
    def source(self) -> Algebra:
        return self.cp.source

    @property
    def target(self) -> Algebra:
        return self.cp.target

    def block_formula(self, a: np.ndarray) -> np.ndarray:
        g, k1, k2 = self.g_dim, self.data1.k, self.data2.k
        w1 = np.kron(np.eye(g), self.data1.omega.reshape(-1, 1))
        w2 = np.kron(np.eye(g), self.data2.omega.reshape(-1, 1))
        a11, a12, a21, a22 = a[:g, :g], a[:g, g:], a[g:, :g], a[g:, g:]
        return np.block([
            [np.kron(a11, np.eye(k1)), w1 @ a12 @ w2.conj().T],
            [w2 @ a21 @ w1.conj().T, np.kron(a22, np.eye(k2))],
        ])

    def block_formula_residual(self) -> float:
        return max(frobenius(self.cp.apply(a) - self.block_formula(a)) for a in self.source.basis.basis)


def powers_kraus(g_dim: int, d1: SpatialDatum, d2: SpatialDatum) -> List[np.ndarray]:
    """diag(1⊗ω¹, 1⊗ω²) plus one operator per complement direction of each factor."""
    g, k1, k2 = g_dim, d1.k, d2.k
    rows, cols = g * (k1 + k2), 2 * g
    eye = np.eye(g)
    k0 = np.zeros((rows, cols), dtype=complex)
    k0[:g * k1, :g] = np.kron(eye, d1.omega.reshape(-1, 1))
    k0[g * k1:, g:] = np.kron(eye, d2.omega.reshape(-1, 1))
    kraus = [k0]
    for e in d1.complement().T:
        k = np.zeros((rows, cols), dtype=complex)
        k[:g * k1, :g] = np.kron(eye, e.reshape(-1, 1))
        kraus.append(k)
    for e in d2.complement().T:
        k = np.zeros((rows, cols), dtype=complex)
        k[g * k1:, g:] = np.kron(eye, e.reshape(-1, 1))
        kraus.append(k)
    return kraus


def build_powers_map(g_dim: int, d1: SpatialDatum, d2: SpatialDatum,
                     tol: Tolerance = DEFAULT_TOLERANCE) -> PowersMap:
    if g_dim < 1:
        raise InvalidStructureError("dim G must be >= 1")
    source = make_multimatrix([(2 * g_dim, 1)])
    target = make_multimatrix([(g_dim * (d1.k + d2.k), 1)])
    cp = CPMap(source, target, kraus=powers_kraus(g_dim, d1, d2), unital=True, tol=tol)
    if not cp.is_completely_positive(tol):
        logger.log_error("powers_map_not_cp", {"defect": cp.positivity_defect()})
        raise NumericError("Powers map failed the complete positivity certificate")
    powers = PowersMap(g_dim, d1, d2, cp)
    residual = powers.block_formula_residual()
    if not tol.allows(residual, float(target.rep_dim)):
        raise NumericError(f"Powers map deviates from its block formula (residual {residual:.3e})")
    return powers


@dataclass(frozen=True, eq=False)
class PredictedGNS:
    multiplicity: int
    phi1: np.ndarray
    phi2: np.ndarray
    xi: np.ndarray
    correspondence: Correspondence
    residual: float

    @property
    def h_dim(self) -> int:
        return self.correspondence.h_dim


def _model_maps(d1: SpatialDatum, d2: SpatialDatum) -> Tuple[np.ndarray, np.ndarray]:
    """φ_i : h^i -> C ω ⊕ (h¹ ⊖ Cω¹) ⊕ (h² ⊖ Cω²), φ_1 v = (<ω¹, v>, p¹ v, 0)."""
    k1, k2 = d1.k, d2.k
    dim = k1 + k2 - 1
    phi1 = np.zeros((dim, k1), dtype=complex)
    phi2 = np.zeros((dim, k2), dtype=complex)
    phi1[0] = d1.omega.conj()
    phi2[0] = d2.omega.conj()
    phi1[1:k1] = d1.complement().conj().T
    phi2[k1:] = d2.complement().conj().T
    return phi1, phi2


def predicted_gns(p: PowersMap, tol: Tolerance = DEFAULT_TOLERANCE) -> PredictedGNS:
    g = p.g_dim
    phi1, phi2 = _model_maps(p.data1, p.data2)
    mult = phi1.shape[0]
    top = np.vstack([np.eye(g), np.zeros((g, g))])
    bottom = np.vstack([np.zeros((g, g)), np.eye(g)])
    xi = np.hstack([np.kron(top, phi1), np.kron(bottom, phi2)])
    images = [np.kron(a, np.eye(mult)) for a in p.source.basis.basis]
    module = make_module(p.target, xi.shape[0], [img @ xi for img in images], tol)
    corr = make_correspondence(p.source, module, images, tol)
    residual = max(
        frobenius(xi.conj().T @ img @ xi - p.cp.apply(a)) for a, img in zip(p.source.basis.basis, images)
    )
    if not tol.allows(residual, float(p.target.rep_dim)):
        raise NumericError(f"model cyclic vector does not reproduce T (residual {residual:.3e})")
    return PredictedGNS(mult, phi1, phi2, xi, corr, residual)


def verify_powers_gns(p: PowersMap, tol: Tolerance = DEFAULT_TOLERANCE) -> Dict[str, object]:
    """GNS of T from first principles against the predicted model."""
    construction = gns(p.cp, tol)
    corr = construction.correspondence
    model = predicted_gns(p, tol)
    mult = multiplicity_matrix(corr, tol)
    iso = iso_check(corr, model.correspondence, tol)
    carry = cyclic_isometry(corr, construction.xi, model.correspondence, model.xi, tol)
    expected = p.data1.k + p.data2.k - 1
    scale = float(max(1, corr.h_dim))
    passed = (int(mult[0, 0]) == expected and iso.isomorphic and iso.certified
              and carry.cyclic and tol.allows(carry.residual, scale))
    logger.log_debug("powers_gns_verified", {"multiplicity": int(mult[0, 0]), "passed": bool(passed)})
    return {
        "gns_multiplicity": int(mult[0, 0]),
        "expected_multiplicity": expected,
        "module_dim": corr.dim,
        "h_dim": corr.h_dim,
        "gns_residual": construction.residual,
        "model_residual": model.residual,
        "iso": iso.to_dict(),
        "cyclic_vector_residual": carry.residual,
        "passed": bool(passed),
    }


def _reference_unit(k: int, omega: np.ndarray, tol: Tolerance):
    system = hilbert_system(k, tol)
    return system, central_unit(system, omega.reshape(-1, 1))


def _spatial_fiber(d1: SpatialDatum, d2: SpatialDatum, tol: Tolerance) -> SpatialProduct:
    s1, w1 = _reference_unit(d1.k, d1.omega, tol)
    s2, w2 = _reference_unit(d2.k, d2.omega, tol)
    return spatial_product(s1, w1, s2, w2, tol)


def tipdef_table(product: SpatialProduct, d1: SpatialDatum, d2: SpatialDatum) -> Dict[str, float]:
    """Worst deviation of the spatial inner product from its three defining cases."""
    j1, j2 = product.embeddings
    eye1, eye2 = np.eye(d1.k), np.eye(d2.k)
    same1 = frobenius(j1.conj().T @ j1 - eye1)
    same2 = frobenius(j2.conj().T @ j2 - eye2)
    predicted = np.outer(d1.omega, d2.omega.conj())
    mixed = frobenius(j1.conj().T @ j2 - predicted)
    return {"first": same1, "second": same2, "mixed": mixed}


def _gns_multiplicity(cp: CPMap, g_dim: int, tol: Tolerance) -> int:
    """Multiplicity of C^{2g} inside the GNS space, read off the rank of the Choi gram."""
    gram_dim, _ = gram_quotient(cp.choi_gram(), tol)
    if gram_dim % (2 * g_dim):
        raise NumericError(f"GNS space of dimension {gram_dim} is not a multiple of C^{2 * g_dim}")
    return gram_dim // (2 * g_dim)


def _gns_unitary_residual(p: PowersMap, w: np.ndarray, tol: Tolerance) -> float:
    """Defect of U = V (1 ⊗ w) : C^{2g} ⊗ F -> H_gns, V the cyclic isometry from the model onto gns(T).

    U must be a unitary intertwining a ⊗ 1_F with the GNS left action.
    """
    model = predicted_gns(p, tol)
    construction = gns(p.cp, tol)
    g = p.source.rep_dim
    if model.correspondence.h_dim != g * model.multiplicity:
        raise NumericError("model GNS space does not exhaust C^{2g} ⊗ K")
    carry = cyclic_isometry(model.correspondence, model.xi, construction.correspondence, construction.xi, tol)
    u = carry.isometry @ np.kron(np.eye(g), w)
    f_dim = w.shape[1]
    h_dim = construction.correspondence.h_dim
    return max(
        frobenius(u.conj().T @ u - np.eye(g * f_dim)),
        frobenius(u @ u.conj().T - np.eye(h_dim)),
        max(frobenius(u @ np.kron(a, np.eye(f_dim)) - construction.correspondence.rho(a) @ u)
            for a in p.source.basis.basis),
        carry.residual,
    )


def compare_with_spatial_product(p: PowersMap, tol: Tolerance = DEFAULT_TOLERANCE,
                                 steps: int = 0) -> Dict[str, object]:
    """The spatial product fiber F of (h¹, ω¹) and (h², ω²) against the GNS multiplicity space."""
    d1, d2 = p.data1, p.data2
    product = _spatial_fiber(d1, d2, tol)
    j1, j2 = product.embeddings
    f_dim = product.system.generator.h_dim
    phi1, phi2 = _model_maps(d1, d2)
    frame = np.hstack([j1, j2])
    target = np.hstack([phi1, phi2])
    w = target @ pseudo_inverse(frame)
    omega_f = product.unit.xi1
    omega_model = np.zeros((phi1.shape[0], 1), dtype=complex)
    omega_model[0, 0] = 1.0
    residuals = {
        "unitary": max(frobenius(w.conj().T @ w - np.eye(f_dim)), frobenius(w @ w.conj().T - np.eye(phi1.shape[0]))),
        "first_factor": frobenius(w @ j1 - phi1),
        "second_factor": frobenius(w @ j2 - phi2),
        "reference": frobenius(w @ omega_f - omega_model),
    }
    table = tipdef_table(product, d1, d2)
    residuals["gns_unitary"] = _gns_unitary_residual(p, w, tol)
    gns_mult = _gns_multiplicity(p.cp, p.g_dim, tol)
    tensor_dim = d1.k * d2.k
    scale = float(max(1, f_dim))
    passed = (gns_mult == f_dim
              and all(tol.allows(v, scale) for v in residuals.values())
              and all(tol.allows(v, scale) for v in table.values()))
    report: Dict[str, object] = {
        "dims": {"spatial": f_dim, "tensor": tensor_dim, "gns_multiplicity": gns_mult},
        "not_tensor_product": f_dim < tensor_dim,
        "verdict": "not tensor product" if f_dim < tensor_dim else "coincides with tensor product",
        "residuals": residuals,
        "tipdef": table,
    }
    if steps:
        report["n_step"] = {str(n): n_step_check(p, n, tol) for n in range(1, steps + 1)}
        passed = passed and all(r["passed"] for r in report["n_step"].values())
    report["passed"] = bool(passed)
    return report


def n_step_check(p: PowersMap, n: int, tol: Tolerance = DEFAULT_TOLERANCE) -> Dict[str, object]:
    """The n-step Powers map against the n-th fiber of the spatial product system."""
    e1, e2 = tensor_power_datum(p.data1, n), tensor_power_datum(p.data2, n)
    step = build_powers_map(p.g_dim, e1, e2, tol)
    gns_mult = _gns_multiplicity(step.cp, p.g_dim, tol)
    expected = e1.k + e2.k - 1

    product = _spatial_fiber(p.data1, p.data2, tol)
    system = product.system
    j1, j2 = product.embeddings
    fiber_n = system.power(n)

    def words(k: int, emb: np.ndarray) -> np.ndarray:
        cols = []
        for index in np.ndindex(*([k] * n)):
            cols.append(system.word([emb[:, [i]] for i in index]))
        return np.hstack(cols)

    psi1, psi2 = words(p.data1.k, j1), words(p.data2.k, j2)
    phi1, phi2 = _model_maps(e1, e2)
    embedding = np.hstack([psi1, psi2]) @ pseudo_inverse(np.hstack([phi1, phi2]))
    residual = max(
        frobenius(embedding.conj().T @ embedding - np.eye(expected)),
        frobenius(embedding @ phi1 - psi1),
        frobenius(embedding @ phi2 - psi2),
    )
    fiber_dim = fiber_n.h_dim
    predicted_fiber = (p.data1.k + p.data2.k - 1) ** n
    passed = (gns_mult == expected and fiber_dim == predicted_fiber
              and tol.allows(residual, float(max(1, fiber_dim))))
    return {
        "gns_multiplicity": gns_mult,
        "expected_multiplicity": expected,
        "fiber_dim": fiber_dim,
        "predicted_fiber_dim": predicted_fiber,
        "embedding_residual": residual,
        "passed": bool(passed),
    }


@dataclass(frozen=True, eq=False)
class ModulePowersMap:
    base: Algebra
    factors: Tuple[Correspondence, Correspondence]
    references: Tuple[np.ndarray, np.ndarray]
    cp: CPMap


def build_module_powers_map(e1: Correspondence, w1: np.ndarray, e2: Correspondence, w2: np.ndarray,
                            tol: Tolerance = DEFAULT_TOLERANCE) -> ModulePowersMap:
    """[[b_ij]] ↦ [[ρ¹(b11), ω¹ b12 ω²*], [ω² b21 ω¹*, ρ²(b22)]] from M_2(B) to B(H¹ ⊕ H²)."""
    base = e1.right
    for e, w in ((e1, w1), (e2, w2)):
        if not (e.left.same_as(base, tol) and e.right.same_as(base, tol)):
            raise InvalidStructureError("both factors must be B-B correspondences over the same B")
        central = max(frobenius(e.rho(b) @ w - w @ b) for b in base.basis.basis)
        unital = frobenius(w.conj().T @ w - base.unit)
        if not (tol.allows(central, 1.0) and tol.allows(unital, float(base.rep_dim))):
            raise RefusedError("reference vectors must be central and unital")
    g = base.rep_dim
    h1, h2 = e1.h_dim, e2.h_dim
    source = amplify(base, 2)
    target = full_matrix_algebra(h1 + h2)
    images = []
    for a in source.basis.basis:
        b11, b12, b21, b22 = a[:g, :g], a[:g, g:], a[g:, :g], a[g:, g:]
        images.append(np.block([
            [e1.rho(b11), w1 @ b12 @ w2.conj().T],
            [w2 @ b21 @ w1.conj().T, e2.rho(b22)],
        ]))
    cp = CPMap(source, target, action=images, unital=True, tol=tol)
    if not cp.is_completely_positive(tol):
        raise NumericError("module Powers map failed the complete positivity certificate")
    return ModulePowersMap(base, (e1, e2), (w1, w2), cp)


def verify_module_powers_gns(p: ModulePowersMap, tol: Tolerance = DEFAULT_TOLERANCE) -> Dict[str, object]:
    """GNS of the module Powers map against (spatial product fiber) ⊗ C²."""
    e1, e2 = p.factors
    s1, s2 = FiberSystem(e1, tol), FiberSystem(e2, tol)
    product = spatial_product(s1, central_unit(s1, p.references[0]),
                              s2, central_unit(s2, p.references[1]), tol)
    fiber = product.system.generator
    j1, j2 = product.embeddings
    e_1, e_2 = np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]])
    xi = np.hstack([np.kron(j1, e_1), np.kron(j2, e_2)])
    g = p.base.rep_dim
    units = [np.zeros((2, 2)) for _ in range(4)]
    for idx, (r, c) in enumerate(((0, 0), (0, 1), (1, 0), (1, 1))):
        units[idx][r, c] = 1.0
    images = []
    for a in p.cp.source.basis.basis:
        blocks = ((a[:g, :g], units[0]), (a[:g, g:], units[1]), (a[g:, :g], units[2]), (a[g:, g:], units[3]))
        images.append(sum(np.kron(fiber.rho(b), u) for b, u in blocks))
    module = make_module(p.cp.target, xi.shape[0], [img @ xi for img in images], tol)
    model = make_correspondence(p.cp.source, module, images, tol)
    model_residual = max(
        frobenius(xi.conj().T @ img @ xi - p.cp.apply(a)) for a, img in zip(p.cp.source.basis.basis, images)
    )
    construction = gns(p.cp, tol)
    iso = iso_check(construction.correspondence, model, tol)
    carry = cyclic_isometry(construction.correspondence, construction.xi, model, xi, tol)
    scale = float(max(1, model.h_dim))
    passed = (construction.correspondence.h_dim == 2 * fiber.h_dim
              and iso.isomorphic and iso.certified
              and tol.allows(model_residual, scale) and tol.allows(carry.residual, scale))
    return {
        "fiber_h_dim": fiber.h_dim,
        "gns_h_dim": construction.correspondence.h_dim,
        "model_residual": model_residual,
        "iso": iso.to_dict(),
        "cyclic_vector_residual": carry.residual,
        "passed": bool(passed),
    }
