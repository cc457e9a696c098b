"""Discrete product systems E_n = E_1^{⊙n}, their units and the spatial product."""

from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ..utils.errors import InvalidStructureError, RefusedError
from ..utils.logging import logger
from .correspondence import (
    CPMap,
    Correspondence,
    IsoResult,
    TensorFrame,
    associator,
    identity_correspondence,
    iso_check,
    make_correspondence,
    multiplicity_matrix,
    tensor,
    tensor_with_frame,
)
from .numeric_kernel import DEFAULT_TOLERANCE, Tolerance, frobenius, gram_quotient, pseudo_inverse
from .star_algebra import Algebra, scalars
from .vn_module import make_module, orthogonal_complement, submodule


class FiberSystem:
    """The product system generated by one B-B correspondence, left-fold bracketed."""

    def __init__(self, generator: Correspondence, tol: Tolerance = DEFAULT_TOLERANCE):
        if not generator.left.same_as(generator.right, tol):
            raise InvalidStructureError("a product system needs a B-B correspondence")
        self.base: Algebra = generator.right
        self.generator = generator
        self.tol = tol
        self._powers: Dict[int, Correspondence] = {1: generator}
        self._frames: Dict[int, TensorFrame] = {}
        self.associator_residuals: Dict[int, float] = {}

    def power(self, n: int) -> Correspondence:
        """E_1^{⊙n}, left-fold bracketed; each new fiber from n = 3 on has its associator verified."""
        if n < 0:
            raise InvalidStructureError(f"fiber index must be nonnegative, got {n}")
        if n == 0:
            if 0 not in self._powers:
                self._powers[0] = identity_correspondence(self.base, self.tol)
            return self._powers[0]
        for j in range(2, n + 1):
            if j not in self._powers:
                corr, frame = tensor_with_frame(self._powers[j - 1], self.generator, self.tol)
                if j >= 3:
                    self._verify_associator(j, corr)
                self._powers[j] = corr
                self._frames[j] = frame
                logger.log_debug("fiber_power", {"n": j, "h_dim": corr.h_dim, "module_dim": corr.dim})
        return self._powers[n]

    def _verify_associator(self, j: int, corr: Correspondence) -> None:
        # (E_{j-2} ⊙ E_1) ⊙ E_1 -> E_{j-2} ⊙ (E_1 ⊙ E_1)
        assoc = associator(self._powers[j - 2], self.generator, self.generator, self.tol)
        self.associator_residuals[j] = assoc.residual
        if not self.tol.allows(assoc.residual, float(max(1, corr.h_dim))):
            logger.log_error("associator_failed", {"n": j, "residual": assoc.residual})
            raise InvalidStructureError(f"associator of fiber {j} is not a bimodule unitary (residual {assoc.residual:.3e})")

    def frame(self, n: int) -> TensorFrame:
        """Quotient frame of E_{n-1} ⊙ E_1 (n >= 2)."""
        if n < 2:
            raise InvalidStructureError("fibers below 2 carry no tensor frame")
        self.power(n)
        return self._frames[n]

    def word(self, factors: Sequence[np.ndarray]) -> np.ndarray:
        """x_1 ⊙ x_2 ⊙ ... ⊙ x_n for elements of E_1, as an element of E_n."""
        if not factors:
            return self.base.unit
        out = np.asarray(factors[0], dtype=complex)
        for j, x in enumerate(factors[1:], start=2):
            coeffs = self.power(j - 1).coordinates(out)
            out = self.frame(j).element(coeffs, np.asarray(x, dtype=complex))
        return out

    def check_associativity(self, m: int, n: int) -> IsoResult:
        return iso_check(tensor(self.power(m), self.power(n), self.tol), self.power(m + n), self.tol)

    def describe(self, up_to: int = 2) -> Dict[str, object]:
        return {
            "fibers": [
                {"n": n, "h_dim": self.power(n).h_dim, "module_dim": self.power(n).dim,
                 "multiplicity": multiplicity_matrix(self.power(n), self.tol).tolist()}
                for n in range(up_to + 1)
            ]
        }


@dataclass(frozen=True, eq=False)
class Unit:
    system: FiberSystem
    xi1: np.ndarray

    def element(self, n: int) -> np.ndarray:
        return self.system.word([self.xi1] * n)

    def unital_defect(self) -> float:
        return frobenius(self.xi1.conj().T @ self.xi1 - self.system.base.unit)

    def is_unital(self, tol: Optional[Tolerance] = None) -> bool:
        tol = tol or self.system.tol
        return tol.allows(self.unital_defect(), float(self.system.base.rep_dim))


@dataclass(frozen=True, eq=False)
class CentralUnit(Unit):
    central_residual: float = 0.0


def make_unit(system: FiberSystem, xi1: np.ndarray) -> Unit:
    xi1 = np.asarray(xi1, dtype=complex)
    ok, res = system.generator.module.contains(xi1, system.tol)
    if not ok:
        raise InvalidStructureError(f"unit element lies outside the generator (residual {res:.3e})")
    return Unit(system, xi1)


def is_central(unit: Unit) -> Tuple[bool, float]:
    """max_b ||b ξ - ξ b|| over the algebra basis."""
    gen = unit.system.generator
    residual = max(
        frobenius(gen.rho(b) @ unit.xi1 - unit.xi1 @ b) for b in unit.system.base.basis.basis
    )
    return unit.system.tol.allows(residual, 1.0 + frobenius(unit.xi1)), residual


def central_unit(system: FiberSystem, xi1: np.ndarray) -> CentralUnit:
    """Verified central unital reference unit."""
    unit = make_unit(system, xi1)
    central, residual = is_central(unit)
    if not central:
        raise RefusedError(f"reference unit is not central (commutator residual {residual:.3e})")
    if not unit.is_unital():
        raise RefusedError(f"reference unit is not unital (defect {unit.unital_defect():.3e})")
    return CentralUnit(system, unit.xi1, residual)


def cp_from_unit(unit: Unit, n: int) -> CPMap:
    """T_n(b) = <ξ_n, b ξ_n>."""
    base = unit.system.base
    if n == 0:
        return CPMap.identity(base)
    xi = unit.element(n)
    fiber = unit.system.power(n)
    images = [xi.conj().T @ fiber.rho(b) @ xi for b in base.basis.basis]
    return CPMap(base, base, action=images, unital=unit.is_unital(), tol=unit.system.tol)


def identity_system(algebra: Algebra, tol: Tolerance = DEFAULT_TOLERANCE) -> FiberSystem:
    return FiberSystem(identity_correspondence(algebra, tol), tol)


def hilbert_system(k: int, tol: Tolerance = DEFAULT_TOLERANCE) -> FiberSystem:
    """B = C with fiber C^k."""
    if k < 1:
        raise InvalidStructureError("a Hilbert space fiber needs dimension >= 1")
    base = scalars()
    module = make_module(base, k, [np.eye(k)[:, [i]] for i in range(k)], tol)
    return FiberSystem(make_correspondence(base, module, [np.eye(k)], tol), tol)


@dataclass(frozen=True, eq=False)
class SpatialProduct:
    system: FiberSystem
    unit: CentralUnit
    factors: Tuple[Correspondence, Correspondence]
    embeddings: Tuple[np.ndarray, np.ndarray]
    amalgamation_residual: float

    def embedding_report(self) -> Dict[str, float]:
        """Isometry and bimodule defects of both embeddings, plus the intersection dimension."""
        fiber = self.system.generator
        factors = self.factors
        report: Dict[str, float] = {}
        for idx, (emb, factor) in enumerate(zip(self.embeddings, factors), start=1):
            report[f"isometry_{idx}"] = frobenius(emb.conj().T @ emb - np.eye(emb.shape[1]))
            report[f"left_{idx}"] = max(
                frobenius(emb @ factor.rho(b) - fiber.rho(b) @ emb) for b in self.system.base.basis.basis
            )
            report[f"module_{idx}"] = max(fiber.module.span.residual(emb @ x) for x in factor.module.span.basis)
        images = [self.embeddings[0] @ x for x in factors[0].module.span.basis]
        images += [self.embeddings[1] @ x for x in factors[1].module.span.basis]
        joint = make_module(self.system.base, fiber.h_dim, images, self.system.tol)
        omega_b = make_module(self.system.base, fiber.h_dim, [self.unit.xi1], self.system.tol)
        report["intersection_dim"] = float(factors[0].dim + factors[1].dim - joint.dim)
        report["unit_span_dim"] = float(omega_b.dim)
        return report


def spatial_product(s1: FiberSystem, w1: CentralUnit, s2: FiberSystem, w2: CentralUnit,
                    tol: Optional[Tolerance] = None) -> SpatialProduct:
    """Amalgamate the generators over ω¹ ≡ ω² with cross inner products <x, ω¹><ω², y>."""
    tol = tol or s1.tol
    if not s1.base.same_as(s2.base, tol):
        raise InvalidStructureError("spatial product needs systems over the same algebra")
    for w, s in ((w1, s1), (w2, s2)):
        if w.system is not s:
            raise InvalidStructureError("reference unit belongs to another system")
        central, residual = is_central(w)
        if not central or not w.is_unital(tol):
            raise RefusedError(f"reference unit is not central and unital (residual {residual:.3e})")
    e1, e2 = s1.generator, s2.generator
    h1, h2 = e1.h_dim, e2.h_dim
    cross = w1.xi1 @ w2.xi1.conj().T
    gram = np.block([[np.eye(h1), cross], [cross.conj().T, np.eye(h2)]])
    dim, factor = gram_quotient(gram, tol)
    j1, j2 = factor[:, :h1], factor[:, h1:]
    pinv = pseudo_inverse(factor)
    base = s1.base
    images = []
    for b in base.basis.basis:
        block = np.block([
            [e1.rho(b), np.zeros((h1, h2))],
            [np.zeros((h2, h1)), e2.rho(b)],
        ])
        images.append(factor @ block @ pinv)
    generators = [j1 @ x for x in e1.module.span.basis] + [j2 @ y for y in e2.module.span.basis]
    module = make_module(base, dim, generators, tol)
    fiber = make_correspondence(base, module, images, tol)
    system = FiberSystem(fiber, tol)
    omega = j1 @ w1.xi1
    amalgamation = frobenius(omega - j2 @ w2.xi1)
    unit = central_unit(system, omega)
    logger.log_debug("spatial_product", {"h_dim": dim, "module_dim": fiber.dim, "amalgamation": amalgamation})
    return SpatialProduct(system, unit, (e1, e2), (j1, j2), amalgamation)


def complement_correspondence(system: FiberSystem, unit: Unit) -> Optional[Correspondence]:
    """E_1 ⊖ ωB as a B-B correspondence, or None when it vanishes."""
    gen = system.generator
    omega_b = submodule(gen.module, [unit.xi1], system.tol)
    rest = orthogonal_complement(gen.module, omega_b, system.tol)
    if rest.is_empty():
        return None
    return make_correspondence(system.base, rest, gen.left_images.images, system.tol)


def complement_multiplicity(system: FiberSystem, unit: CentralUnit) -> np.ndarray:
    central, residual = is_central(unit)
    if not central or not unit.is_unital():
        raise RefusedError(f"complement multiplicity needs a central unital unit (residual {residual:.3e})")
    rest = complement_correspondence(system, unit)
    blocks = len(system.base.blocks)
    if rest is None:
        return np.zeros((blocks, blocks), dtype=int)
    return multiplicity_matrix(rest, system.tol)
