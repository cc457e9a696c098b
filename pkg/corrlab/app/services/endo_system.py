"""Product systems of a unital endomorphism ϑ of B^a(E).

Everything is computed on H = E·G in the coordinates of ``induced_rep``: B^a(E) is
the span of {x y*} there and ϑ is given on that basis. Two constructions are offered:
through a unit vector ξ (fiber ϑ(ξξ*)E) and through intertwiners of ϑ on H (fiber
computed as the commutant of a B'-B' correspondence), with cross checks between them.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy import linalg

from ..utils.errors import InvalidStructureError, NumericError, RefusedError, ShapeMismatchError
from ..utils.logging import logger
from .correspondence import (
    CPMap,
    Correspondence,
    IsoResult,
    TensorFrame,
    commutant,
    iso_check,
    make_correspondence,
    scalar_correspondence,
    tensor,
    tensor_with_frame,
)
from .numeric_kernel import (
    DEFAULT_TOLERANCE,
    Tolerance,
    as_cmatrix,
    frobenius,
    gram_quotient,
    hs_orthonormalize,
    pseudo_inverse,
    solve_intertwiners,
)
from .product_system import FiberSystem, cp_from_unit, make_unit
from .star_algebra import commutant_algebra
from .vn_module import (
    ConcreteModule,
    InducedRepresentation,
    check_totality,
    induced_rep,
    intertwiner_module,
    is_full,
    make_module,
)

FINITE_DIMENSION_NOTE = (
    "strictness and normality are automatic in finite dimension; "
    "surjectivity of the isometries is checked by dimension count"
)


@dataclass(frozen=True, eq=False)
class Endomorphism:
    """A unital *-endomorphism of B^a(E), given on the basis of π(B^a(E)) ⊂ B(H)."""

    module: ConcreteModule
    induced: InducedRepresentation
    images: tuple
    tol: Tolerance = DEFAULT_TOLERANCE
    _stacked: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        h = self.induced.h_dim
        basis = self.induced.adjointables.basis
        if len(self.images) != len(basis):
            raise ShapeMismatchError(f"{len(self.images)} images for B^a(E) of dimension {len(basis)}")
        for img in self.images:
            if img.shape != (h, h):
                raise ShapeMismatchError(f"endomorphism image has shape {img.shape}, expected {(h, h)}")
        object.__setattr__(self, "_stacked", np.array(self.images, dtype=complex).reshape(len(basis), h, h))
        self._validate()

    @property
    def h_dim(self) -> int:
        return self.induced.h_dim

    @property
    def basis(self):
        return self.induced.adjointables.basis

    def apply(self, a: np.ndarray) -> np.ndarray:
        coeffs = self.induced.adjointables.coordinates(a)
        return np.tensordot(coeffs, self._stacked, axes=1)

    def residuals(self) -> Dict[str, float]:
        span = self.induced.adjointables
        eye = np.eye(self.h_dim)
        into = max(span.residual(img) for img in self.images)
        star = max(frobenius(self.apply(a.conj().T) - img.conj().T) for a, img in zip(self.basis, self.images))
        mult = 0.0
        for a, ia in zip(self.basis, self.images):
            for b, ib in zip(self.basis, self.images):
                mult = max(mult, frobenius(self.apply(a @ b) - ia @ ib))
        return {"into": into, "star": star, "multiplicative": mult, "unital": frobenius(self.apply(eye) - eye)}

    def _validate(self) -> None:
        for key, value in self.residuals().items():
            if not self.tol.allows(value, float(self.h_dim)):
                raise InvalidStructureError(f"not a unital *-endomorphism of B^a(E) ({key} residual {value:.3e})")

    def to_h(self, x: np.ndarray) -> np.ndarray:
        """Module element in ambient coordinates -> H coordinates."""
        return self.induced.embedding.conj().T @ np.asarray(x, dtype=complex)

    def compose(self, inner: "Endomorphism") -> "Endomorphism":
        """self ∘ inner."""
        if inner.induced is not self.induced:
            raise InvalidStructureError("composition needs endomorphisms of the same module")
        return Endomorphism(self.module, self.induced, tuple(self.apply(img) for img in inner.images), self.tol)

    def power(self, n: int) -> "Endomorphism":
        if n < 1:
            raise InvalidStructureError("endomorphism powers start at 1")
        out = self
        for _ in range(n - 1):
            out = self.compose(out)
        return out

    @classmethod
    def from_function(cls, module: ConcreteModule, fn: Callable[[np.ndarray], np.ndarray],
                      tol: Tolerance = DEFAULT_TOLERANCE,
                      induced: Optional[InducedRepresentation] = None) -> "Endomorphism":
        induced = induced or induced_rep(module, tol)
        images = tuple(np.asarray(fn(a), dtype=complex) for a in induced.adjointables.basis)
        return cls(module, induced, images, tol)

    @classmethod
    def identity(cls, module: ConcreteModule, tol: Tolerance = DEFAULT_TOLERANCE) -> "Endomorphism":
        return cls.from_function(module, lambda a: a, tol)

    @classmethod
    def inner(cls, module: ConcreteModule, unitary: np.ndarray,
              tol: Tolerance = DEFAULT_TOLERANCE) -> "Endomorphism":
        """Ad U for a unitary U on the ambient target space normalizing B^a(E)."""
        induced = induced_rep(module, tol)
        q = induced.embedding
        unitary = as_cmatrix(unitary, "unitary")
        if unitary.shape != (module.target_dim, module.target_dim):
            raise ShapeMismatchError(f"unitary has shape {unitary.shape}, expected square {module.target_dim}")
        u_h = q.conj().T @ unitary @ q
        defect = frobenius(u_h.conj().T @ u_h - np.eye(induced.h_dim))
        if not tol.allows(defect, float(induced.h_dim)):
            raise InvalidStructureError(f"conjugating operator is not unitary on H (defect {defect:.3e})")
        return cls.from_function(module, lambda a: u_h @ a @ u_h.conj().T, tol, induced)

    @classmethod
    def from_pairs(cls, module: ConcreteModule, domain: Sequence[np.ndarray], images: Sequence[np.ndarray],
                   tol: Tolerance = DEFAULT_TOLERANCE) -> "Endomorphism":
        """Linear extension of a_j ↦ ϑ(a_j) given on the ambient target space."""
        induced = induced_rep(module, tol)
        q = induced.embedding
        dom = [q.conj().T @ as_cmatrix(a, "domain element") @ q for a in domain]
        img = [q.conj().T @ as_cmatrix(b, "image") @ q for b in images]
        if len(dom) != len(img):
            raise ShapeMismatchError("domain and image lists differ in length")
        span = induced.adjointables
        coords = np.stack([span.coordinates(a) for a in dom], axis=1) if dom else np.zeros((span.dim, 0))
        if coords.shape[1] == 0 or np.linalg.matrix_rank(coords) < span.dim:
            raise InvalidStructureError("domain elements do not span B^a(E)")
        # express each basis element of B^a(E) through the domain elements
        weights, *_ = linalg.lstsq(coords, np.eye(span.dim))
        stacked = np.array(img)
        return cls(module, induced, tuple(np.tensordot(weights[:, i], stacked, axes=1)
                                          for i in range(span.dim)), tol)


def _unit_in_h(theta: Endomorphism, xi: np.ndarray) -> np.ndarray:
    xi_h = theta.to_h(xi)
    ok, res = theta.induced.module_h.contains(xi_h, theta.tol)
    if not ok:
        raise InvalidStructureError(f"ξ lies outside the module (residual {res:.3e})")
    algebra = theta.module.algebra
    defect = frobenius(xi_h.conj().T @ xi_h - algebra.unit)
    if not theta.tol.allows(defect, float(algebra.rep_dim)):
        raise RefusedError(f"ξ is not a unit vector (<ξ, ξ> - 1 has norm {defect:.3e})")
    return xi_h


def _adjointable_coefficients(module_h: ConcreteModule, a: np.ndarray) -> np.ndarray:
    basis = module_h.span.basis
    moved = [a @ x for x in basis]
    return np.array([[np.vdot(xm, y) for y in moved] for xm in basis])


@dataclass(frozen=True, eq=False)
class UnitConstruction:
    fiber: Correspondence
    unitary: np.ndarray
    embedding: np.ndarray
    projection: np.ndarray
    residuals: Dict[str, float]
    note: str = FINITE_DIMENSION_NOTE

    @property
    def residual(self) -> float:
        return max(self.residuals.values())


def construct_via_unit(theta: Endomorphism, xi: np.ndarray) -> UnitConstruction:
    """E_1 = ϑ(ξξ*)E with b·x = ϑ(ξbξ*)x, and u: x ⊙ y ↦ ϑ(xξ*)y onto E."""
    tol = theta.tol
    xi_h = _unit_in_h(theta, xi)
    module_h = theta.induced.module_h
    algebra = module_h.algebra
    p1 = theta.apply(xi_h @ xi_h.conj().T)
    fiber_module = make_module(algebra, theta.h_dim, [p1 @ x for x in module_h.span.basis], tol)
    left = [theta.apply(xi_h @ b @ xi_h.conj().T) for b in algebra.basis.basis]
    fiber = make_correspondence(algebra, fiber_module, left, tol)
    q1 = induced_rep(fiber_module, tol).embedding

    outer, frame = tensor_with_frame(scalar_correspondence(module_h, tol), fiber, tol)
    cols_t, cols_h = [], []
    for i, x in enumerate(module_h.span.basis):
        cols_t.append(frame.piece(i))
        cols_h.append(theta.apply(x @ xi_h.conj().T) @ q1)
    m_t, m_h = np.hstack(cols_t), np.hstack(cols_h)
    unitary = m_h @ pseudo_inverse(m_t)
    recon = max(
        frobenius(unitary @ frame.lift(_adjointable_coefficients(module_h, a)) @ unitary.conj().T - theta.apply(a))
        for a in theta.basis
    )
    residuals = {
        "gram": frobenius(m_t.conj().T @ m_t - m_h.conj().T @ m_h),
        "u_star_u": frobenius(unitary.conj().T @ unitary - np.eye(outer.h_dim)),
        "u_u_star": frobenius(unitary @ unitary.conj().T - np.eye(theta.h_dim)),
        "reconstruction": recon,
    }
    logger.log_debug("construct_via_unit", {"fiber_h_dim": fiber.h_dim, **residuals})
    return UnitConstruction(fiber, unitary, q1, p1, residuals)


@dataclass(frozen=True, eq=False)
class CommutantConstruction:
    fiber_prime: Correspondence
    fiber: Correspondence
    identification: np.ndarray
    residuals: Dict[str, float]
    morita_identity: bool
    totality: bool
    note: str = FINITE_DIMENSION_NOTE

    @property
    def residual(self) -> float:
        return max(self.residuals.values())


def _inverse_lift(theta: Endomorphism, operators: Sequence[np.ndarray]) -> List[np.ndarray]:
    """ρ'^{-1} on operators known to lie in ρ'(B')."""
    rho_prime = theta.induced.rho_prime
    basis = rho_prime.algebra.basis
    system = np.stack([img.reshape(-1) for img in rho_prime.images], axis=1)
    out = []
    for op in operators:
        coeffs, *_ = linalg.lstsq(system, op.reshape(-1))
        res = frobenius(system @ coeffs - op.reshape(-1))
        if not theta.tol.allows(res, 1.0 + frobenius(op)):
            raise NumericError(f"operator is not in the commutant lift (residual {res:.3e})")
        out.append(basis.combine(coeffs))
    return out


def construct_via_commutant(theta: Endomorphism) -> CommutantConstruction:
    """E'_1 = {x' ∈ B(H) : ϑ(a) x' = x' a} and E_1 = (E'_1)', with E ⊙ E_1 = E."""
    tol = theta.tol
    module_h = theta.induced.module_h
    algebra = module_h.algebra
    if not is_full(module_h, tol):
        logger.log_error("construct_via_commutant_refused", {"reason": "module not full"})
        raise RefusedError("module is not full, so ρ' is not faithful; restrict to the range first")
    h = theta.h_dim
    b_prime = commutant_algebra(algebra, tol)
    rho_prime = theta.induced.rho_prime

    span = solve_intertwiners(theta.images, theta.basis, (h, h), tol)
    if span.dim == 0:
        raise NumericError("endomorphism has no intertwiners")
    xs = span.basis
    g = algebra.rep_dim
    d = len(xs)
    gram = np.zeros((d * g, d * g), dtype=complex)
    inner = _inverse_lift(theta, [xj.conj().T @ xl for xj in xs for xl in xs])
    for j in range(d):
        for l in range(d):
            gram[j * g:(j + 1) * g, l * g:(l + 1) * g] = inner[j * d + l]
    dim, factor = gram_quotient(gram, tol)
    frame = TensorFrame(factor, d, g)
    prime_module = make_module(b_prime, dim, [frame.piece(j) for j in range(d)], tol)
    left = []
    for bp in rho_prime.images:
        coeffs = np.array([[np.vdot(xm, bp @ xj) for xj in xs] for xm in xs])
        left.append(frame.lift(coeffs))
    fiber_prime = make_correspondence(b_prime, prime_module, left, tol)
    fiber = commutant(fiber_prime, tol)

    outer, outer_frame = tensor_with_frame(scalar_correspondence(module_h, tol), fiber, tol)
    cols_t, cols_h = [], []
    for i, x in enumerate(module_h.span.basis):
        for j, xp in enumerate(xs):
            cols_t.append(outer_frame.piece(i) @ frame.piece(j))
            cols_h.append(xp @ x)
    m_t, m_h = np.hstack(cols_t), np.hstack(cols_h)
    ident = m_h @ pseudo_inverse(m_t)
    recon = max(
        frobenius(ident @ outer_frame.lift(_adjointable_coefficients(module_h, a)) @ ident.conj().T - theta.apply(a))
        for a in theta.basis
    )
    lift_res = max(
        frobenius(ident @ op_t - op_h @ ident)
        for op_t, op_h in zip(outer.rho_prime.images, rho_prime.images)
    )
    residuals = {
        "gram": frobenius(m_t.conj().T @ m_t - m_h.conj().T @ m_h),
        "unitary": max(frobenius(ident.conj().T @ ident - np.eye(outer.h_dim)),
                       frobenius(ident @ ident.conj().T - np.eye(h))),
        "commutant_lift": lift_res,
        "reconstruction": recon,
    }
    adjointables = theta.induced.adjointables
    commutant_span = solve_intertwiners(adjointables.basis, adjointables.basis, (h, h), tol)
    morita, _ = commutant_span.same_span(hs_orthonormalize(rho_prime.images, tol, shape=(h, h)), tol)
    totality = check_totality(
        intertwiner_module(b_prime, induced_rep(fiber_prime.module, tol).rho_prime, tol), tol
    )
    logger.log_debug("construct_via_commutant", {
        "fiber_prime_dim": fiber_prime.dim, "morita": bool(morita), **residuals
    })
    return CommutantConstruction(fiber_prime, fiber, ident, residuals, bool(morita), bool(totality))


@dataclass(frozen=True, eq=False)
class DualityReport:
    commutant_iso: IsoResult
    unit_semigroup: IsoResult
    commutant_semigroup: IsoResult
    unit_residual: float
    commutant_residual: float
    passed: bool

    def to_dict(self) -> Dict[str, object]:
        return {
            "commutant_iso": self.commutant_iso.to_dict(),
            "unit_semigroup": self.unit_semigroup.to_dict(),
            "commutant_semigroup": self.commutant_semigroup.to_dict(),
            "unit_residual": self.unit_residual,
            "commutant_residual": self.commutant_residual,
            "passed": self.passed,
        }


def duality_check(theta: Endomorphism, xi: np.ndarray) -> DualityReport:
    """(unit-vector fiber)' ≅ intertwiner fiber, and fiber(ϑ²) ≅ fiber(ϑ)^{⊙2} both ways."""
    tol = theta.tol
    via_unit = construct_via_unit(theta, xi)
    via_comm = construct_via_commutant(theta)
    dual = iso_check(commutant(via_unit.fiber, tol), via_comm.fiber_prime, tol)
    theta2 = theta.compose(theta)
    unit2 = construct_via_unit(theta2, xi)
    comm2 = construct_via_commutant(theta2)
    semi_unit = iso_check(unit2.fiber, tensor(via_unit.fiber, via_unit.fiber, tol), tol)
    semi_comm = iso_check(comm2.fiber, tensor(via_comm.fiber, via_comm.fiber, tol), tol)
    scale = float(theta.h_dim)
    unit_res = max(via_unit.residual, unit2.residual)
    comm_res = max(via_comm.residual, comm2.residual)
    passed = all(r.isomorphic and r.certified for r in (dual, semi_unit, semi_comm)) \
        and tol.allows(unit_res, scale) and tol.allows(comm_res, scale)
    return DualityReport(dual, semi_unit, semi_comm, unit_res, comm_res, bool(passed))


@dataclass(frozen=True, eq=False)
class DilationReport:
    p0: np.ndarray
    p1: np.ndarray
    order_holds: bool
    order_residual: float
    extracted_cp: Optional[CPMap] = None
    unit: Optional[object] = None
    semigroup_residuals: Dict[int, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, object]:
        return {
            "order_holds": self.order_holds,
            "order_residual": self.order_residual,
            "semigroup_residuals": {str(k): v for k, v in sorted(self.semigroup_residuals.items())},
        }


def dilation_check(theta: Endomorphism, xi: np.ndarray, steps: int = 3) -> DilationReport:
    """p_1 >= p_0 iff ϑ(ξξ*)ξ = ξ; then T(b) = <ξ, ϑ(ξbξ*)ξ> is compared with the unit ξ."""
    tol = theta.tol
    xi_h = _unit_in_h(theta, xi)
    algebra = theta.module.algebra
    p0 = xi_h @ xi_h.conj().T
    p1 = theta.apply(p0)
    order_residual = frobenius(p1 @ xi_h - xi_h)
    order_holds = tol.allows(order_residual, float(theta.h_dim))
    if not order_holds:
        logger.log_debug("dilation_order_fails", {"residual": order_residual})
        return DilationReport(p0, p1, False, order_residual)
    images = [xi_h.conj().T @ theta.apply(xi_h @ b @ xi_h.conj().T) @ xi_h for b in algebra.basis.basis]
    cp = CPMap(algebra, algebra, action=images, unital=True, tol=tol)
    if not cp.is_completely_positive(tol):
        raise NumericError("extracted map is not completely positive")
    construction = construct_via_unit(theta, xi)
    system = FiberSystem(construction.fiber, tol)
    unit = make_unit(system, construction.embedding.conj().T @ xi_h)
    residuals = {}
    power = CPMap.identity(algebra)
    for n in range(1, steps + 1):
        power = cp.compose(power)
        residuals[n] = cp_from_unit(unit, n).distance(power)
    return DilationReport(p0, p1, True, order_residual, cp, unit, residuals)
