"""Concrete von Neumann modules E ⊂ B(G, H) over a multimatrix algebra B ⊂ B(G)."""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from ..utils.errors import InvalidStructureError, RefusedError, ShapeMismatchError
from ..utils.logging import logger
from .numeric_kernel import (
    DEFAULT_TOLERANCE,
    OperatorSpan,
    Tolerance,
    frobenius,
    hs_orthonormalize,
    kernel_basis,
    pseudo_inverse,
    range_basis,
    solve_intertwiners,
    tolerant_rank,
)
from .star_algebra import Algebra, Representation, commutant_algebra, restrict_blocks


@dataclass(frozen=True, eq=False)
class ConcreteModule:
    algebra: Algebra
    target_dim: int
    span: OperatorSpan

    @property
    def dim(self) -> int:
        return self.span.dim

    @property
    def source_dim(self) -> int:
        return self.algebra.rep_dim

    @property
    def basis(self) -> Tuple[np.ndarray, ...]:
        return self.span.basis

    def is_empty(self) -> bool:
        return self.span.dim == 0

    def inner(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return x.conj().T @ y

    def contains(self, x: np.ndarray, tol: Tolerance = DEFAULT_TOLERANCE) -> Tuple[bool, float]:
        return self.span.contains(x, tol)

    def columns(self) -> np.ndarray:
        """All vectors x_i e_k, basis-major, as columns of one matrix."""
        if self.is_empty():
            return np.zeros((self.target_dim, 0), dtype=complex)
        return np.hstack(self.span.basis)


@dataclass(frozen=True)
class UnitCertificate:
    verdict: str
    witness: Optional[np.ndarray] = None
    obstruction: Tuple[Dict[str, int], ...] = ()
    residual: float = 0.0

    def to_dict(self) -> Dict[str, object]:
        return {
            "verdict": self.verdict,
            "obstruction": [dict(row) for row in self.obstruction],
            "residual": self.residual,
        }


@dataclass(frozen=True, eq=False)
class InducedRepresentation:
    """H = span E·G in its own coordinates, with π(B^a(E)) and ρ'(B') acting on it."""

    module: ConcreteModule
    h_dim: int
    embedding: np.ndarray
    module_h: ConcreteModule
    adjointables: OperatorSpan
    rho_prime: Representation


def _validate(module: ConcreteModule, tol: Tolerance) -> ConcreteModule:
    if module.is_empty():
        return module
    algebra = module.algebra
    stack = np.array(module.span.basis)
    algebra_stack = np.array(algebra.basis.basis)
    for x in stack:
        products = np.einsum("hg,jhk->jgk", x.conj(), stack).reshape(len(stack), -1)
        res = algebra.basis.batch_residuals(products)
        bound = tol.abs_eps + tol.rel_eps * (1.0 + np.linalg.norm(products, axis=1))
        if np.any(res > bound):
            raise InvalidStructureError(f"inner product escapes the algebra (residual {res.max():.3e})")
        moved = (x @ algebra_stack).reshape(len(algebra_stack), -1)
        res = module.span.batch_residuals(moved)
        bound = tol.abs_eps + tol.rel_eps * (1.0 + np.linalg.norm(moved, axis=1))
        if np.any(res > bound):
            raise InvalidStructureError(f"span is not a right module (residual {res.max():.3e})")
    return module


def module_from_span(algebra: Algebra, target_dim: int, span: OperatorSpan,
                     tol: Tolerance = DEFAULT_TOLERANCE, validate: bool = True) -> ConcreteModule:
    if span.shape != (target_dim, algebra.rep_dim):
        raise ShapeMismatchError(
            f"module span has shape {span.shape}, expected {(target_dim, algebra.rep_dim)}"
        )
    module = ConcreteModule(algebra, int(target_dim), span)
    return _validate(module, tol) if validate else module


def make_module(algebra: Algebra, target_dim: int, generators: Sequence[np.ndarray],
                tol: Tolerance = DEFAULT_TOLERANCE) -> ConcreteModule:
    """Right B-module spanned by {g·b}; inner products are checked to land in B."""
    shape = (int(target_dim), algebra.rep_dim)
    gens = [np.asarray(g, dtype=complex) for g in generators]
    for g in gens:
        if g.shape != shape:
            raise ShapeMismatchError(f"generator has shape {g.shape}, expected {shape}")
    vectors = [g @ b for g in gens for b in algebra.basis.basis]
    span = hs_orthonormalize(vectors, tol, shape=shape)
    module = module_from_span(algebra, target_dim, span, tol)
    logger.log_debug("module_built", {"generators": len(gens), "dimension": module.dim})
    return module


def defining_module(algebra: Algebra) -> ConcreteModule:
    """B as a right module over itself."""
    return ConcreteModule(algebra, algebra.rep_dim, algebra.basis)


def inner_product_span(module: ConcreteModule, tol: Tolerance = DEFAULT_TOLERANCE) -> OperatorSpan:
    """B_E = span{<x, y>}."""
    g = module.source_dim
    products = [x.conj().T @ y for x in module.span.basis for y in module.span.basis]
    return hs_orthonormalize(products, tol, shape=(g, g))


def is_full(module: ConcreteModule, tol: Tolerance = DEFAULT_TOLERANCE) -> bool:
    if module.is_empty():
        return False
    return inner_product_span(module, tol).dim == module.algebra.dim


def _block_columns(module: ConcreteModule, k: int) -> List[np.ndarray]:
    """x ↦ x U (1_{n_k} ⊗ e_0) on block k: the n_k-column shadow of E p_k."""
    algebra = module.algebra
    n, m = algebra.blocks[k]
    sl = algebra._block_slice(k)
    picks = [sl.start + i * m for i in range(n)]
    frame_cols = algebra.frame[:, picks]
    return [x @ frame_cols for x in module.span.basis]


def unit_vector_certificate(module: ConcreteModule, tol: Tolerance = DEFAULT_TOLERANCE) -> UnitCertificate:
    """Decide whether E has ξ with <ξ, ξ> = 1 and construct it when it does.

    Per block k the shadows of E p_k form B(C^{n_k}, V_k) for the column space V_k,
    so a unit vector exists iff dim V_k >= n_k for every block.
    """
    if module.is_empty():
        raise RefusedError("unit vector certificate refuses the empty module")
    algebra = module.algebra
    rows, parts, ambiguous = [], [], False
    for k, (n, _) in enumerate(algebra.blocks):
        shadows = _block_columns(module, k)
        stacked = np.hstack(shadows)
        s = linalg.svd(stacked, compute_uv=False) if stacked.size else np.zeros(0)
        top = float(s[0]) if s.size else 0.0
        cutoff = tol.cutoff(top)
        rank = int(np.sum(s > cutoff)) if top > 0.0 else 0
        if np.any((s > cutoff) & (s <= 1e3 * cutoff)):
            ambiguous = True
        rows.append({"block": k, "size": n, "column_rank": rank, "rank": min(n, rank)})
        if rank < n:
            continue
        space = range_basis(stacked, tol)
        target = space[:, :n]
        system = np.stack([sh.reshape(-1) for sh in shadows], axis=1)
        coeffs, *_ = linalg.lstsq(system, target.reshape(-1))
        p_k = algebra.central_projection(k)
        parts.append(sum(c * x for c, x in zip(coeffs, module.span.basis)) @ p_k)
    obstruction = tuple(rows)
    if any(row["rank"] < row["size"] for row in rows):
        if ambiguous:
            return UnitCertificate("unknown", None, obstruction)
        logger.log_debug("unit_vector_impossible", {"blocks": list(obstruction)})
        return UnitCertificate("impossible", None, obstruction)
    xi = sum(parts)
    defect = frobenius(xi.conj().T @ xi - algebra.unit)
    ok_member, member_res = module.span.contains(xi, tol)
    residual = max(defect, member_res)
    if ambiguous or not ok_member or not tol.allows(defect, float(algebra.rep_dim)):
        logger.log_error("unit_vector_unverified", {"residual": residual})
        return UnitCertificate("unknown", xi, obstruction, residual)
    return UnitCertificate("found", xi, obstruction, residual)


def check_totality(module: ConcreteModule, tol: Tolerance = DEFAULT_TOLERANCE) -> bool:
    """True iff span{x g} is the whole target space."""
    if module.is_empty():
        logger.log_error("totality_on_empty_module", {"target_dim": module.target_dim})
        return False
    return tolerant_rank(module.columns(), tol) == module.target_dim


def induced_rep(module: ConcreteModule, tol: Tolerance = DEFAULT_TOLERANCE) -> InducedRepresentation:
    if module.is_empty():
        raise RefusedError("induced representation refuses the empty module")
    algebra = module.algebra
    columns = module.columns()
    if tolerant_rank(columns, tol) == module.target_dim:
        embedding = np.eye(module.target_dim, dtype=complex)
    else:
        embedding = range_basis(columns, tol)
    h_dim = embedding.shape[1]
    q_adj = embedding.conj().T
    span_h = OperatorSpan(h_dim, algebra.rep_dim, tuple(q_adj @ x for x in module.span.basis))
    module_h = ConcreteModule(algebra, h_dim, span_h)

    reduced = q_adj @ columns
    reduced_pinv = pseudo_inverse(reduced)
    commutant = commutant_algebra(algebra, tol)
    d = module.dim
    g = algebra.rep_dim
    stacked = reduced.reshape(h_dim, d, g)
    images = tuple(
        (stacked @ bp).reshape(h_dim, d * g) @ reduced_pinv for bp in commutant.basis.basis
    )
    rho_prime = Representation(commutant, h_dim, images)
    adjointables = hs_orthonormalize(
        [x @ y.conj().T for x in span_h.basis for y in span_h.basis], tol, shape=(h_dim, h_dim)
    )
    logger.log_debug("induced_representation", {
        "h_dim": h_dim, "module_dim": d, "adjointables_dim": adjointables.dim
    })
    return InducedRepresentation(module, h_dim, embedding, module_h, adjointables, rho_prime)


def intertwiner_module(algebra: Algebra, rho_prime: Representation,
                       tol: Tolerance = DEFAULT_TOLERANCE) -> ConcreteModule:
    """{x ∈ B(G, H) : ρ'(b') x = x b'} as a right B-module."""
    commutant = commutant_algebra(algebra, tol)
    if not rho_prime.algebra.same_as(commutant, tol):
        raise InvalidStructureError("representation is not a representation of the commutant")
    span = solve_intertwiners(
        rho_prime.images, commutant.basis.basis, (rho_prime.space_dim, algebra.rep_dim), tol
    )
    if span.dim == 0:
        logger.log_error("empty_intertwiner_module", {"h_dim": rho_prime.space_dim})
    return module_from_span(algebra, rho_prime.space_dim, span, tol)


def restrict_to_range(module: ConcreteModule,
                      tol: Tolerance = DEFAULT_TOLERANCE) -> Tuple[ConcreteModule, np.ndarray]:
    """Pass to the full module over B_E, with the inclusion G_E -> G."""
    if module.is_empty():
        raise RefusedError("cannot restrict the empty module")
    algebra = module.algebra
    keep = []
    for k in range(len(algebra.blocks)):
        p_k = algebra.central_projection(k)
        weight = max(frobenius(x @ p_k) for x in module.span.basis)
        if weight > tol.cutoff(1.0):
            keep.append(k)
    sub, inclusion = restrict_blocks(algebra, keep)
    restricted = make_module(sub, module.target_dim, [x @ inclusion for x in module.span.basis], tol)
    logger.log_debug("module_restricted", {"kept_blocks": keep, "dimension": restricted.dim})
    return restricted, inclusion


def submodule(module: ConcreteModule, generators: Sequence[np.ndarray],
              tol: Tolerance = DEFAULT_TOLERANCE) -> ConcreteModule:
    sub = make_module(module.algebra, module.target_dim, generators, tol)
    for x in sub.span.basis:
        ok, res = module.span.contains(x, tol)
        if not ok:
            raise InvalidStructureError(f"generator lies outside the module (residual {res:.3e})")
    return sub


def orthogonal_complement(module: ConcreteModule, sub: ConcreteModule,
                          tol: Tolerance = DEFAULT_TOLERANCE) -> ConcreteModule:
    """{x ∈ E : <y, x> = 0 for all y in the submodule}."""
    basis = module.span.basis
    if not sub.span.basis or not basis:
        return module
    system = np.vstack([
        np.stack([(y.conj().T @ x).reshape(-1) for x in basis], axis=1) for y in sub.span.basis
    ])
    null = kernel_basis(system, len(basis), tol)
    vectors = [sum(c * x for c, x in zip(col, basis)) for col in null.T]
    span = hs_orthonormalize(vectors, tol, shape=module.span.shape)
    return module_from_span(module.algebra, module.target_dim, span, tol)
