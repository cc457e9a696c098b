"""Correspondences as concrete commuting triples (H, ρ, ρ').

A ``Correspondence`` from A to B keeps the module E ⊂ B(G_B, H) over B, the left
action ρ of A on H and the lifted commutant action ρ' of B' on H. H is always the
reachable span E·G_B in its own coordinates.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from ..utils.errors import InvalidStructureError, NumericError, ShapeMismatchError
from ..utils.logging import logger
from .numeric_kernel import (
    DEFAULT_TOLERANCE,
    Tolerance,
    as_cmatrix,
    frobenius,
    gram_quotient,
    hs_orthonormalize,
    pseudo_inverse,
    random_unitary,
    range_basis,
    solve_intertwiners,
    tolerant_rank,
)
from .star_algebra import Algebra, Representation, commutant_algebra, scalars
from .vn_module import (
    ConcreteModule,
    check_totality,
    defining_module,
    induced_rep,
    intertwiner_module,
    make_module,
    module_from_span,
)


@dataclass(frozen=True)
class ProgressRecord:
    stage: str
    done: int
    total: int


ProgressCallback = Callable[[ProgressRecord], None]


def _report(progress: Optional[ProgressCallback], stage: str, done: int, total: int) -> None:
    if progress is not None:
        progress(ProgressRecord(stage, done, total))


@dataclass(frozen=True, eq=False)
class Correspondence:
    left: Algebra
    module: ConcreteModule
    left_images: Representation
    rho_prime: Representation

    @property
    def right(self) -> Algebra:
        return self.module.algebra

    @property
    def h_dim(self) -> int:
        return self.module.target_dim

    @property
    def dim(self) -> int:
        return self.module.dim

    def rho(self, a: np.ndarray) -> np.ndarray:
        return self.left_images.apply(a)

    def act(self, a: np.ndarray, x: np.ndarray) -> np.ndarray:
        return self.rho(a) @ x

    def coordinates(self, x: np.ndarray) -> np.ndarray:
        return self.module.span.coordinates(x)

    def describe(self) -> Dict[str, object]:
        return {
            "h_dim": self.h_dim,
            "module_dim": self.dim,
            "multiplicity": multiplicity_matrix(self).tolist(),
        }


def _assemble(left: Algebra, module: ConcreteModule, rep: Representation,
              rho_prime: Representation, tol: Tolerance) -> Correspondence:
    scale = float(max(1, module.target_dim))
    residuals = rep.residuals()
    for key, value in residuals.items():
        if not tol.allows(value, scale):
            raise InvalidStructureError(f"left action is not a unital *-homomorphism ({key} residual {value:.3e})")
    worst = 0.0
    stack = np.array(module.span.basis, dtype=complex).reshape(module.dim, module.target_dim, module.source_dim)
    for img in rep.images:
        moved = (img @ stack).reshape(module.dim, -1)
        worst = max([worst] + list(module.span.batch_residuals(moved)))
    if not tol.allows(worst, scale):
        raise InvalidStructureError(f"left action does not preserve the module (residual {worst:.3e})")
    comm = 0.0
    for img in rep.images:
        for rp in rho_prime.images:
            comm = max(comm, frobenius(img @ rp - rp @ img))
    if not tol.allows(comm, scale):
        raise InvalidStructureError(f"left action does not commute with the commutant lift (residual {comm:.3e})")
    return Correspondence(left, module, rep, rho_prime)


def make_correspondence(left: Algebra, module: ConcreteModule, left_images: Sequence[np.ndarray],
                        tol: Tolerance = DEFAULT_TOLERANCE) -> Correspondence:
    """Validate a left action given on the ambient target space of ``module``.

    The result lives on the reachable span H = E·G; the left action must leave it invariant.
    """
    images = [as_cmatrix(img, "left image") for img in left_images]
    if len(images) != left.dim:
        raise ShapeMismatchError(f"{len(images)} left images for an algebra of dimension {left.dim}")
    for img in images:
        if img.shape != (module.target_dim, module.target_dim):
            raise ShapeMismatchError(
                f"left image has shape {img.shape}, module target dimension is {module.target_dim}"
            )
    ind = induced_rep(module, tol)
    q = ind.embedding
    leak = max(frobenius(img @ q - q @ (q.conj().T @ img @ q)) for img in images)
    if not tol.allows(leak, float(module.target_dim)):
        raise InvalidStructureError(f"left action leaves the reachable span (residual {leak:.3e})")
    rep = Representation(left, ind.h_dim, tuple(q.conj().T @ img @ q for img in images))
    return _assemble(left, ind.module_h, rep, ind.rho_prime, tol)


def identity_correspondence(algebra: Algebra, tol: Tolerance = DEFAULT_TOLERANCE) -> Correspondence:
    return make_correspondence(algebra, defining_module(algebra), algebra.basis.basis, tol)


def scalar_correspondence(module: ConcreteModule, tol: Tolerance = DEFAULT_TOLERANCE) -> Correspondence:
    """E as a C-B correspondence."""
    return make_correspondence(scalars(), module, [np.eye(module.target_dim)], tol)


def random_correspondence(algebra: Algebra, multiplicities, seed,
                          left: Optional[Algebra] = None,
                          tol: Tolerance = DEFAULT_TOLERANCE) -> Correspondence:
    """An A-B correspondence with prescribed multiplicity matrix, in a random basis of H."""
    left = left or algebra
    mult = np.asarray(multiplicities, dtype=int)
    if mult.shape != (len(left.blocks), len(algebra.blocks)):
        raise ShapeMismatchError(
            f"multiplicity matrix has shape {mult.shape}, expected {(len(left.blocks), len(algebra.blocks))}"
        )
    if np.any(mult < 0):
        raise InvalidStructureError("multiplicities must be nonnegative")
    commutant = commutant_algebra(algebra, tol)
    pieces = []
    for k, (n_k, _) in enumerate(left.blocks):
        for l, (m_l, _) in enumerate(commutant.blocks):
            if mult[k, l]:
                pieces.append((k, l, n_k, int(mult[k, l]), m_l))
    dim = sum(n * c * m for _, _, n, c, m in pieces)
    if dim == 0:
        raise InvalidStructureError("multiplicity matrix gives an empty correspondence")
    unitary = random_unitary(dim, seed)

    def assemble(fn) -> np.ndarray:
        out = np.zeros((dim, dim), dtype=complex)
        off = 0
        for k, l, n, c, m in pieces:
            size = n * c * m
            out[off:off + size, off:off + size] = fn(k, l, n, c, m)
            off += size
        return unitary @ out @ unitary.conj().T

    left_imgs = [
        assemble(lambda k, l, n, c, m, a=a: np.kron(left.block_of(a, k), np.eye(c * m)))
        for a in left.basis.basis
    ]
    prime_imgs = tuple(
        assemble(lambda k, l, n, c, m, b=b: np.kron(np.eye(n * c), commutant.block_of(b, l)))
        for b in commutant.basis.basis
    )
    rho_prime = Representation(commutant, dim, prime_imgs)
    module = intertwiner_module(algebra, rho_prime, tol)
    logger.log_debug("random_correspondence", {"multiplicity": mult.tolist(), "h_dim": dim})
    return make_correspondence(left, module, left_imgs, tol)


@dataclass(frozen=True, eq=False)
class TensorFrame:
    """Coordinates of the Gram quotient of span{x_i ⊙ h} for a basis x_i and h in a space."""

    factor: np.ndarray
    left_dim: int
    right_space: int
    _pinv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_pinv", pseudo_inverse(self.factor))

    @property
    def dim(self) -> int:
        return self.factor.shape[0]

    def piece(self, i: int) -> np.ndarray:
        """The operator h ↦ x_i ⊙ h."""
        return self.factor[:, i * self.right_space:(i + 1) * self.right_space]

    def element(self, coeffs: Sequence[complex], op: np.ndarray) -> np.ndarray:
        """(Σ c_i x_i) ⊙ op."""
        out = np.zeros((self.dim, op.shape[1]), dtype=complex)
        for i, c in enumerate(coeffs):
            if c != 0:
                out += c * (self.piece(i) @ op)
        return out

    def lift(self, matrix: np.ndarray) -> np.ndarray:
        """x_i ⊙ h ↦ Σ_m M[m, i] x_m ⊙ h."""
        pieces = self.factor.reshape(self.dim, self.left_dim, self.right_space)
        moved = np.einsum("rmk,mi->rik", pieces, matrix)
        return moved.reshape(self.dim, -1) @ self._pinv


def _left_coefficients(corr: Correspondence, a: np.ndarray) -> np.ndarray:
    basis = corr.module.span.basis
    image = [corr.act(a, x) for x in basis]
    return np.array([[np.vdot(xm, yi) for yi in image] for xm in basis])


def tensor_with_frame(e1: Correspondence, e2: Correspondence,
                      tol: Tolerance = DEFAULT_TOLERANCE) -> Tuple[Correspondence, TensorFrame]:
    if not e1.right.same_as(e2.left, tol):
        raise InvalidStructureError("right algebra of the first factor differs from the left algebra of the second")
    basis1 = e1.module.span.basis
    d1, h2 = len(basis1), e2.h_dim
    gram = np.zeros((d1 * h2, d1 * h2), dtype=complex)
    for i, xi in enumerate(basis1):
        for j, xj in enumerate(basis1):
            gram[i * h2:(i + 1) * h2, j * h2:(j + 1) * h2] = e2.rho(xi.conj().T @ xj)
    dim, factor = gram_quotient(gram, tol)
    frame = TensorFrame(factor, d1, h2)
    generators = [frame.piece(i) @ x2 for i in range(d1) for x2 in e2.module.span.basis]
    span = hs_orthonormalize(generators, tol, shape=(dim, e2.right.rep_dim))
    module = module_from_span(e2.right, dim, span, tol)
    images = [frame.lift(_left_coefficients(e1, a)) for a in e1.left.basis.basis]
    logger.log_debug("tensor_product", {"h_dim": dim, "module_dim": module.dim})
    return make_correspondence(e1.left, module, images, tol), frame


def tensor(e1: Correspondence, e2: Correspondence, tol: Tolerance = DEFAULT_TOLERANCE) -> Correspondence:
    return tensor_with_frame(e1, e2, tol)[0]


class CPMap:
    """A completely positive map between algebras, given by Kraus operators or by images of the source basis."""

    def __init__(self, source: Algebra, target: Algebra, kraus: Optional[Sequence[np.ndarray]] = None,
                 action: Optional[Sequence[np.ndarray]] = None, unital: bool = False,
                 tol: Tolerance = DEFAULT_TOLERANCE):
        if (kraus is None) == (action is None):
            raise InvalidStructureError("a CP map needs exactly one of kraus operators or basis images")
        self.source = source
        self.target = target
        self.unital = unital
        self.kraus = None
        self.action = None
        shape_t = (target.rep_dim, target.rep_dim)
        if kraus is not None:
            self.kraus = tuple(as_cmatrix(k, "kraus operator") for k in kraus)
            if not self.kraus:
                raise InvalidStructureError("at least one Kraus operator is required")
            for k in self.kraus:
                if k.shape != (target.rep_dim, source.rep_dim):
                    raise ShapeMismatchError(
                        f"Kraus operator has shape {k.shape}, expected {(target.rep_dim, source.rep_dim)}"
                    )
        else:
            self.action = tuple(as_cmatrix(a, "basis image") for a in action)
            if len(self.action) != source.dim:
                raise ShapeMismatchError(f"{len(self.action)} images for a source of dimension {source.dim}")
            for a in self.action:
                if a.shape != shape_t:
                    raise ShapeMismatchError(f"basis image has shape {a.shape}, expected {shape_t}")
        for b in source.basis.basis:
            ok, res = target.basis.contains(self.apply(b), tol)
            if not ok:
                raise InvalidStructureError(f"image escapes the target algebra (residual {res:.3e})")
        # Kraus families are completely positive by construction
        if self.action is not None and not self.is_completely_positive(tol):
            raise InvalidStructureError(
                f"map is not completely positive (Choi defect {self.positivity_defect():.3e})"
            )
        if unital:
            defect = frobenius(self.apply(source.unit) - target.unit)
            if not tol.allows(defect, float(target.rep_dim)):
                raise InvalidStructureError(f"map flagged unital but T(1) - 1 has norm {defect:.3e}")

    @classmethod
    def identity(cls, algebra: Algebra) -> "CPMap":
        return cls(algebra, algebra, kraus=[np.eye(algebra.rep_dim)], unital=True)

    @classmethod
    def depolarizing(cls, algebra: Algebra, p: float) -> "CPMap":
        """b ↦ (1 - p) b + p tr(b)/n 1 on a full matrix algebra."""
        n = algebra.rep_dim
        images = [(1 - p) * b + p * np.trace(b) / n * np.eye(n) for b in algebra.basis.basis]
        return cls(algebra, algebra, action=images, unital=True)

    def apply(self, a: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=complex)
        if self.kraus is not None:
            return sum(k @ a @ k.conj().T for k in self.kraus)
        coeffs = self.source.basis.coordinates(a)
        return sum(c * img for c, img in zip(coeffs, self.action))

    def __call__(self, a: np.ndarray) -> np.ndarray:
        return self.apply(a)

    def compose(self, inner: "CPMap") -> "CPMap":
        """self ∘ inner."""
        if not inner.target.same_as(self.source):
            raise InvalidStructureError("composition needs matching algebras")
        unital = self.unital and inner.unital
        if self.kraus is not None and inner.kraus is not None:
            kraus = [k @ j for k in self.kraus for j in inner.kraus]
            return CPMap(inner.source, self.target, kraus=kraus, unital=unital)
        images = [self.apply(inner.apply(b)) for b in inner.source.basis.basis]
        return CPMap(inner.source, self.target, action=images, unital=unital)

    def choi_gram(self) -> np.ndarray:
        """The block matrix [T(a_i* a_j)] over the source basis."""
        basis = self.source.basis.basis
        g = self.target.rep_dim
        out = np.zeros((len(basis) * g, len(basis) * g), dtype=complex)
        for i, ai in enumerate(basis):
            for j, aj in enumerate(basis):
                out[i * g:(i + 1) * g, j * g:(j + 1) * g] = self.apply(ai.conj().T @ aj)
        return out

    def positivity_defect(self) -> float:
        gram = self.choi_gram()
        herm = 0.5 * (gram + gram.conj().T)
        return max(0.0, -float(np.min(np.linalg.eigvalsh(herm))))

    def is_completely_positive(self, tol: Tolerance = DEFAULT_TOLERANCE) -> bool:
        gram = self.choi_gram()
        return tol.allows(self.positivity_defect(), frobenius(gram))

    def unital_defect(self) -> float:
        return frobenius(self.apply(self.source.unit) - self.target.unit)

    def distance(self, other: "CPMap") -> float:
        return max(frobenius(self.apply(b) - other.apply(b)) for b in self.source.basis.basis)


@dataclass(frozen=True, eq=False)
class GNSConstruction:
    correspondence: Correspondence
    xi: np.ndarray
    frame: TensorFrame
    residual: float


def gns(cp: CPMap, tol: Tolerance = DEFAULT_TOLERANCE) -> GNSConstruction:
    """GNS correspondence of T: quotient of span{a ⊗ b} under <a⊗b, a'⊗b'> = b* T(a* a') b'."""
    source, target = cp.source, cp.target
    try:
        dim, factor = gram_quotient(cp.choi_gram(), tol)
    except NumericError as exc:
        logger.log_error("cp_violation", {"detail": str(exc)})
        raise NumericError(f"map is not completely positive: {exc}") from exc
    frame = TensorFrame(factor, source.dim, target.rep_dim)
    module = make_module(target, dim, [frame.piece(i) for i in range(source.dim)], tol)
    basis = source.basis.basis
    images = []
    for a in basis:
        coeffs = np.array([[np.vdot(am, a @ ai) for ai in basis] for am in basis])
        images.append(frame.lift(coeffs))
    corr = make_correspondence(source, module, images, tol)
    xi = frame.element(source.basis.coordinates(source.unit), np.eye(target.rep_dim))
    residual = max(frobenius(xi.conj().T @ corr.rho(a) @ xi - cp.apply(a)) for a in basis)
    if not tol.allows(residual, float(target.rep_dim)):
        raise NumericError(f"GNS vector does not reproduce the map (residual {residual:.3e})")
    logger.log_debug("gns_built", {"h_dim": corr.h_dim, "module_dim": corr.dim, "residual": residual})
    return GNSConstruction(corr, xi, frame, residual)


def commutant(corr: Correspondence, tol: Tolerance = DEFAULT_TOLERANCE) -> Correspondence:
    """E' = {x : G_A -> H | ρ(a) x = x a} as a B'-A' correspondence."""
    a_alg = corr.left
    a_prime = commutant_algebra(a_alg, tol)
    b_prime = commutant_algebra(corr.right, tol)
    if not corr.rho_prime.algebra.same_as(b_prime, tol):
        raise InvalidStructureError("commutant lift is not a representation of B'")
    span = solve_intertwiners(corr.left_images.images, a_alg.basis.basis, (corr.h_dim, a_alg.rep_dim), tol)
    module = module_from_span(a_prime, corr.h_dim, span, tol)
    if not check_totality(module, tol):
        raise NumericError("commutant module is not total on H")
    return make_correspondence(b_prime, module, corr.rho_prime.images, tol)


def multiplicity_matrix(corr: Correspondence, tol: Tolerance = DEFAULT_TOLERANCE) -> np.ndarray:
    """c_kl = dim(p_k E q_l) / (n_k n_l)."""
    left, right = corr.left, corr.right
    out = np.zeros((len(left.blocks), len(right.blocks)), dtype=int)
    for k, (n_k, _) in enumerate(left.blocks):
        p_k = corr.rho(left.central_projection(k))
        for l, (n_l, _) in enumerate(right.blocks):
            q_l = right.central_projection(l)
            pieces = [p_k @ x @ q_l for x in corr.module.span.basis]
            if pieces:
                dim = hs_orthonormalize(pieces, tol, shape=corr.module.span.shape).dim
            else:
                dim = 0
            value = dim / (n_k * n_l)
            if abs(value - round(value)) > 1e-9:
                raise NumericError(f"non-integral multiplicity {value} at block pair {(k, l)}")
            out[k, l] = int(round(value))
    return out


@dataclass(frozen=True, eq=False)
class IsoResult:
    isomorphic: bool
    certified: bool
    unitary: Optional[np.ndarray]
    residual: float
    left_multiplicity: np.ndarray
    right_multiplicity: np.ndarray

    def to_dict(self) -> Dict[str, object]:
        return {
            "isomorphic": self.isomorphic,
            "certified": self.certified,
            "residual": self.residual,
            "multiplicity": self.left_multiplicity.tolist(),
            "other_multiplicity": self.right_multiplicity.tolist(),
        }


def _isotypic_frame(corr: Correspondence, k: int, l: int, tol: Tolerance) -> np.ndarray:
    """Orthonormal basis of the (k, l) isotypic part built from matrix units."""
    left, bp = corr.left, corr.rho_prime.algebra
    n_k, _ = left.blocks[k]
    m_l, _ = bp.blocks[l]
    corner = corr.rho(left.matrix_unit(k, 0, 0)) @ corr.rho_prime.apply(bp.matrix_unit(l, 0, 0))
    seeds = range_basis(corner, tol)
    cols = []
    for i in range(n_k):
        e_i = corr.rho(left.matrix_unit(k, i, 0))
        for j in range(m_l):
            f_j = corr.rho_prime.apply(bp.matrix_unit(l, j, 0))
            cols.append(e_i @ f_j @ seeds)
    return np.hstack(cols) if cols else np.zeros((corr.h_dim, 0), dtype=complex)


def iso_check(e: Correspondence, f: Correspondence, tol: Tolerance = DEFAULT_TOLERANCE) -> IsoResult:
    """Decide isomorphism by multiplicity matrices, then certify with an explicit unitary."""
    if not (e.left.same_as(f.left, tol) and e.right.same_as(f.right, tol)):
        raise InvalidStructureError("isomorphism check needs the same left and right algebras")
    mult_e, mult_f = multiplicity_matrix(e, tol), multiplicity_matrix(f, tol)
    if not np.array_equal(mult_e, mult_f):
        return IsoResult(False, False, None, float("inf"), mult_e, mult_f)
    commutant = e.rho_prime.algebra
    m_e, m_f = [], []
    for k in range(len(e.left.blocks)):
        for l in range(len(commutant.blocks)):
            if mult_e[k, l]:
                m_e.append(_isotypic_frame(e, k, l, tol))
                m_f.append(_isotypic_frame(f, k, l, tol))
    frame_e = np.hstack(m_e) if m_e else np.zeros((e.h_dim, 0), dtype=complex)
    frame_f = np.hstack(m_f) if m_f else np.zeros((f.h_dim, 0), dtype=complex)
    if frame_e.shape[1] != e.h_dim or frame_f.shape[1] != f.h_dim:
        logger.log_error("isotypic_frame_incomplete", {"expected": e.h_dim, "found": frame_e.shape[1]})
        return IsoResult(True, False, None, float("inf"), mult_e, mult_f)
    unitary = frame_f @ frame_e.conj().T
    residual = _intertwining_residual(unitary, e, f)
    certified = tol.allows(residual, float(max(1, e.h_dim)))
    if not certified:
        logger.log_error("iso_certificate_failed", {"residual": residual})
    return IsoResult(True, certified, unitary, residual, mult_e, mult_f)


def _intertwining_residual(unitary: np.ndarray, e: Correspondence, f: Correspondence) -> float:
    eye_e, eye_f = np.eye(e.h_dim), np.eye(f.h_dim)
    residuals = [
        frobenius(unitary.conj().T @ unitary - eye_e),
        frobenius(unitary @ unitary.conj().T - eye_f),
    ]
    residuals += [frobenius(unitary @ a - b @ unitary)
                  for a, b in zip(e.left_images.images, f.left_images.images)]
    residuals += [frobenius(unitary @ a - b @ unitary)
                  for a, b in zip(e.rho_prime.images, f.rho_prime.images)]
    residuals += [f.module.span.residual(unitary @ x) for x in e.module.span.basis]
    return max(residuals)


@dataclass(frozen=True, eq=False)
class CyclicIsometry:
    isometry: np.ndarray
    gram_defect: float
    intertwining: float
    vector_defect: float
    cyclic: bool

    @property
    def residual(self) -> float:
        return max(self.gram_defect, self.intertwining, self.vector_defect)


def cyclic_isometry(e: Correspondence, xi: np.ndarray, f: Correspondence, eta: np.ndarray,
                    tol: Tolerance = DEFAULT_TOLERANCE) -> CyclicIsometry:
    """The isometry ρ_E(a) ξ g ↦ ρ_F(a) η g on the cyclic subspace of ξ."""
    if not e.left.same_as(f.left, tol):
        raise InvalidStructureError("cyclic isometry needs the same left algebra")
    basis = e.left.basis.basis
    m_e = np.hstack([e.rho(a) @ xi for a in basis])
    m_f = np.hstack([f.rho(a) @ eta for a in basis])
    gram_defect = frobenius(m_e.conj().T @ m_e - m_f.conj().T @ m_f)
    iso = m_f @ pseudo_inverse(m_e)
    inter = max(frobenius(iso @ e.rho(a) @ m_e - f.rho(a) @ m_f) for a in basis)
    vector_defect = frobenius(iso @ xi - eta)
    cyclic = tolerant_rank(m_e, tol) == e.h_dim
    return CyclicIsometry(iso, gram_defect, inter, vector_defect, cyclic)


def cyclic_subcorrespondence(corr: Correspondence, xi: np.ndarray,
                             tol: Tolerance = DEFAULT_TOLERANCE) -> Correspondence:
    """The sub-correspondence generated by ξ, i.e. span A ξ B."""
    generators = [corr.act(a, xi) for a in corr.left.basis.basis]
    module = make_module(corr.right, corr.h_dim, generators, tol)
    return make_correspondence(corr.left, module, corr.left_images.images, tol)


@dataclass(frozen=True, eq=False)
class CompositionReport:
    iso: IsoResult
    isometry: CyclicIsometry
    product_h_dim: int
    cyclic_h_dim: int
    passed: bool

    def to_dict(self) -> Dict[str, object]:
        return {
            "iso": self.iso.to_dict(),
            "isometry_residual": self.isometry.residual,
            "product_h_dim": self.product_h_dim,
            "cyclic_h_dim": self.cyclic_h_dim,
            "passed": self.passed,
        }


def composition_check(s: CPMap, t: CPMap, tol: Tolerance = DEFAULT_TOLERANCE) -> CompositionReport:
    """gns(T∘S) against the sub-correspondence of gns(S) ⊙ gns(T) generated by ξ_S ⊙ ξ_T."""
    if not s.target.same_as(t.source, tol):
        raise InvalidStructureError("composition needs the target of S to be the source of T")
    g_s, g_t = gns(s, tol), gns(t, tol)
    product, frame = tensor_with_frame(g_s.correspondence, g_t.correspondence, tol)
    zeta = frame.element(g_s.correspondence.coordinates(g_s.xi), g_t.xi)
    composite = gns(t.compose(s), tol)
    sub = cyclic_subcorrespondence(product, zeta, tol)
    iso = iso_check(sub, composite.correspondence, tol)
    isometry = cyclic_isometry(composite.correspondence, composite.xi, product, zeta, tol)
    passed = (iso.isomorphic and iso.certified and isometry.cyclic
              and sub.h_dim == composite.correspondence.h_dim
              and tol.allows(isometry.residual, float(max(1, product.h_dim))))
    logger.log_debug("composition_checked", {
        "product_h_dim": product.h_dim, "cyclic_h_dim": sub.h_dim, "passed": bool(passed)
    })
    return CompositionReport(iso, isometry, product.h_dim, sub.h_dim, bool(passed))


@dataclass(frozen=True, eq=False)
class Associator:
    unitary: np.ndarray
    residual: float


def associator(e1: Correspondence, e2: Correspondence, e3: Correspondence,
               tol: Tolerance = DEFAULT_TOLERANCE) -> Associator:
    """(x1 ⊙ x2) ⊙ h3 ↦ x1 ⊙ (x2 ⊙ h3)."""
    e12, f12 = tensor_with_frame(e1, e2, tol)
    left, f_left = tensor_with_frame(e12, e3, tol)
    e23, f23 = tensor_with_frame(e2, e3, tol)
    right, f_right = tensor_with_frame(e1, e23, tol)
    cols_l, cols_r = [], []
    for i in range(e1.dim):
        for j, x2 in enumerate(e2.module.span.basis):
            coeffs = e12.coordinates(f12.piece(i) @ x2)
            cols_l.append(f_left.element(coeffs, np.eye(e3.h_dim)))
            unit_j = np.zeros(e2.dim)
            unit_j[j] = 1.0
            cols_r.append(f_right.piece(i) @ f23.element(unit_j, np.eye(e3.h_dim)))
    m_l, m_r = np.hstack(cols_l), np.hstack(cols_r)
    unitary = m_r @ pseudo_inverse(m_l)
    residual = max(
        frobenius(m_l.conj().T @ m_l - m_r.conj().T @ m_r),
        frobenius(unitary @ m_l - m_r),
        _intertwining_residual(unitary, left, right),
    )
    return Associator(unitary, residual)


@dataclass(frozen=True, eq=False)
class FlipUnitary:
    unitary: np.ndarray
    left: Correspondence
    right: Correspondence
    residuals: Dict[str, float]

    @property
    def residual(self) -> float:
        return max(self.residuals.values())


def flip_unitary(e1: Correspondence, e2: Correspondence,
                 tol: Tolerance = DEFAULT_TOLERANCE,
                 progress: Optional[ProgressCallback] = None) -> FlipUnitary:
    """x'_2 ⊙ y_1 ⊙ g ↦ y_1 ⊙ x'_2 ⊙ g from E_2' ⊙ E_1' onto (E_1 ⊙ E_2)'."""
    e12, f12 = tensor_with_frame(e1, e2, tol)
    _report(progress, "tensor", 1, 4)
    left = commutant(e12, tol)
    _report(progress, "commutant", 2, 4)
    c1, c2 = commutant(e1, tol), commutant(e2, tol)
    right, f_right = tensor_with_frame(c2, c1, tol)
    _report(progress, "commutant tensor", 3, 4)
    cols_r, cols_l = [], []
    for i, y1 in enumerate(e1.module.span.basis):
        for j, x2p in enumerate(c2.module.span.basis):
            cols_r.append(f_right.piece(j) @ y1)
            cols_l.append(f12.piece(i) @ x2p)
    m_r, m_l = np.hstack(cols_r), np.hstack(cols_l)
    unitary = m_l @ pseudo_inverse(m_r)
    residuals = {
        "gram": frobenius(m_r.conj().T @ m_r - m_l.conj().T @ m_l),
        "well_defined": frobenius(unitary @ m_r - m_l),
        "bimodule": _intertwining_residual(unitary, right, left),
    }
    _report(progress, "flip", 4, 4)
    return FlipUnitary(unitary, left, right, residuals)


@dataclass(frozen=True, eq=False)
class FlipReport:
    iso: IsoResult
    flip: FlipUnitary
    product_multiplicity: np.ndarray
    passed: bool

    def to_dict(self) -> Dict[str, object]:
        return {
            "isomorphic": self.iso.isomorphic,
            "certified": self.iso.certified,
            "iso_residual": self.iso.residual,
            "flip_residuals": dict(self.flip.residuals),
            "left_multiplicity": self.iso.left_multiplicity.tolist(),
            "right_multiplicity": self.iso.right_multiplicity.tolist(),
            "product_multiplicity": self.product_multiplicity.tolist(),
            "passed": self.passed,
        }


def flip_check(e1: Correspondence, e2: Correspondence, tol: Tolerance = DEFAULT_TOLERANCE,
               progress: Optional[ProgressCallback] = None) -> FlipReport:
    """(E_1 ⊙ E_2)' against E_2' ⊙ E_1'."""
    if not (e1.left.same_as(e1.right, tol) and e2.left.same_as(e2.right, tol)
            and e1.right.same_as(e2.left, tol)):
        raise InvalidStructureError("flip check needs two correspondences over the same algebra")
    flip = flip_unitary(e1, e2, tol, progress)
    iso = iso_check(flip.left, flip.right, tol)
    product = multiplicity_matrix(e1, tol) @ multiplicity_matrix(e2, tol)
    scale = float(max(1, flip.left.h_dim))
    passed = (iso.isomorphic and iso.certified
              and tol.allows(flip.residual, scale)
              and np.array_equal(iso.left_multiplicity, product.T))
    logger.log_debug("flip_checked", {"passed": bool(passed), "residual": flip.residual})
    return FlipReport(iso, flip, product, bool(passed))
