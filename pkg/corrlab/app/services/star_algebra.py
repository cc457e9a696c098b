"""Finite-dimensional von Neumann algebras in block-multiplicity form.

An ``Algebra`` is B = U (⊕_k M_{n_k} ⊗ 1_{m_k}) U* acting on
G = ⊕_k C^{n_k} ⊗ C^{m_k}. ``U`` (the frame) is the identity for algebras built
by ``make_multimatrix``; commutants and amplifications carry a permutation frame
so that every algebra keeps named blocks.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..utils.errors import InvalidStructureError, NumericError, ShapeMismatchError
from ..utils.logging import logger
from .numeric_kernel import (
    DEFAULT_TOLERANCE,
    OperatorSpan,
    Tolerance,
    frobenius,
    random_unitary,
    solve_intertwiners,
)


def _offsets(blocks: Sequence[Tuple[int, int]]) -> List[int]:
    offsets, acc = [], 0
    for n, m in blocks:
        offsets.append(acc)
        acc += n * m
    return offsets


@dataclass(frozen=True, eq=False)
class Algebra:
    """A multimatrix algebra with a concrete unital representation on G."""

    blocks: Tuple[Tuple[int, int], ...]
    frame: np.ndarray
    basis: OperatorSpan = field(init=False, repr=False)
    unit: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.blocks:
            raise InvalidStructureError("an algebra needs at least one block")
        for n, m in self.blocks:
            if n < 1 or m < 1:
                raise InvalidStructureError(f"block sizes and multiplicities must be >= 1, got {(n, m)}")
        dim = self.rep_dim
        if self.frame.shape != (dim, dim):
            raise ShapeMismatchError(f"frame has shape {self.frame.shape}, expected {(dim, dim)}")
        units = []
        for k, (n, m) in enumerate(self.blocks):
            for i in range(n):
                for j in range(n):
                    units.append(self.matrix_unit(k, i, j) / np.sqrt(m))
        object.__setattr__(self, "basis", OperatorSpan(dim, dim, tuple(units)))
        object.__setattr__(self, "unit", np.eye(dim, dtype=complex))

    @property
    def rep_dim(self) -> int:
        return sum(n * m for n, m in self.blocks)

    @property
    def dim(self) -> int:
        return sum(n * n for n, _ in self.blocks)

    @property
    def sizes(self) -> List[int]:
        return [n for n, _ in self.blocks]

    def _block_slice(self, k: int) -> slice:
        off = _offsets(self.blocks)[k]
        n, m = self.blocks[k]
        return slice(off, off + n * m)

    def _to_frame(self, canonical: np.ndarray) -> np.ndarray:
        return self.frame @ canonical @ self.frame.conj().T

    def matrix_unit(self, k: int, i: int, j: int) -> np.ndarray:
        """The matrix unit e_ij of block k, amplified by the block multiplicity."""
        n, m = self.blocks[k]
        canonical = np.zeros((self.rep_dim, self.rep_dim), dtype=complex)
        e = np.zeros((n, n), dtype=complex)
        e[i, j] = 1.0
        canonical[self._block_slice(k), self._block_slice(k)] = np.kron(e, np.eye(m))
        return self._to_frame(canonical)

    def central_projection(self, k: int) -> np.ndarray:
        canonical = np.zeros((self.rep_dim, self.rep_dim), dtype=complex)
        sl = self._block_slice(k)
        canonical[sl, sl] = np.eye(sl.stop - sl.start)
        return self._to_frame(canonical)

    def block_of(self, b: np.ndarray, k: int) -> np.ndarray:
        """The n_k x n_k matrix representing b in block k."""
        n, m = self.blocks[k]
        sl = self._block_slice(k)
        sub = (self.frame.conj().T @ b @ self.frame)[sl, sl]
        return np.einsum("iajb->ij", sub.reshape(n, m, n, m) * np.eye(m)[None, :, None, :]) / m

    def from_blocks(self, parts: Sequence[np.ndarray]) -> np.ndarray:
        canonical = np.zeros((self.rep_dim, self.rep_dim), dtype=complex)
        for k, ((n, m), part) in enumerate(zip(self.blocks, parts)):
            canonical[self._block_slice(k), self._block_slice(k)] = np.kron(np.asarray(part), np.eye(m))
        return self._to_frame(canonical)

    def same_as(self, other: "Algebra", tol: Tolerance = DEFAULT_TOLERANCE) -> bool:
        if self is other:
            return True
        return (tuple(self.blocks) == tuple(other.blocks)
                and self.frame.shape == other.frame.shape
                and tol.allows(frobenius(self.frame - other.frame), 1.0))

    def random_element(self, seed) -> np.ndarray:
        rng = np.random.default_rng(seed)
        coeffs = rng.standard_normal(self.dim) + 1j * rng.standard_normal(self.dim)
        return self.basis.combine(coeffs)

    def closure_defect(self) -> float:
        """Worst distance of adjoints and products of basis elements from the span."""
        worst = 0.0
        for a in self.basis.basis:
            worst = max(worst, self.basis.residual(a.conj().T))
            for b in self.basis.basis:
                worst = max(worst, self.basis.residual(a @ b))
        return worst

    def describe(self) -> Dict[str, object]:
        return {"blocks": [list(b) for b in self.blocks], "rep_dim": self.rep_dim, "dim": self.dim}


def make_multimatrix(blocks: Sequence[Tuple[int, int]]) -> Algebra:
    """⊕ M_{n_k} ⊗ 1_{m_k} on ⊕ C^{n_k} ⊗ C^{m_k}, blocks sorted by (size, multiplicity)."""
    blocks = [(int(n), int(m)) for n, m in blocks]
    if not blocks:
        raise InvalidStructureError("an algebra needs at least one block")
    blocks.sort()
    dim = sum(n * m for n, m in blocks)
    return Algebra(tuple(blocks), np.eye(dim, dtype=complex))


def scalars() -> Algebra:
    return make_multimatrix([(1, 1)])


def full_matrix_algebra(n: int) -> Algebra:
    return make_multimatrix([(n, 1)])


def _swap_frame(blocks: Sequence[Tuple[int, int]]) -> np.ndarray:
    """Permutation taking (k, mu, i) coordinates of the commutant model to (k, i, mu)."""
    dim = sum(n * m for n, m in blocks)
    perm = np.zeros((dim, dim), dtype=complex)
    for off, (n, m) in zip(_offsets(blocks), blocks):
        for i in range(n):
            for mu in range(m):
                perm[off + i * m + mu, off + mu * n + i] = 1.0
    return perm


@lru_cache(maxsize=512)
def _commutant(blocks: Tuple[Tuple[int, int], ...], frame_bytes: bytes, tol: Tolerance) -> Algebra:
    # keyed on block structure and frame contents, not on the Algebra object
    dim = sum(n * m for n, m in blocks)
    algebra = Algebra(blocks, np.frombuffer(frame_bytes, dtype=complex).reshape(dim, dim).copy())
    solved = solve_intertwiners(algebra.basis.basis, algebra.basis.basis, (dim, dim), tol)
    model = Algebra(
        tuple((m, n) for n, m in algebra.blocks),
        algebra.frame @ _swap_frame(algebra.blocks),
    )
    if solved.dim != model.dim:
        raise NumericError(
            f"commutant has dimension {solved.dim}, block model predicts {model.dim}"
        )
    worst = max([solved.residual(b) for b in model.basis.basis] + [0.0])
    if not tol.allows(worst, 1.0):
        raise NumericError(f"commutant does not match the block model (residual {worst:.3e})")
    logger.log_debug("commutant_algebra_computed", {
        "blocks": [list(b) for b in model.blocks], "dimension": model.dim
    })
    return model


def commutant_algebra(algebra: Algebra, tol: Tolerance = DEFAULT_TOLERANCE) -> Algebra:
    """B' on the same G, solved from [x, b] = 0 and identified with ⊕ 1_{n_k} ⊗ M_{m_k}.

    Blocks keep the order of ``algebra``: block k of B' lives on the same central
    projection as block k of B.
    """
    frame = np.ascontiguousarray(algebra.frame, dtype=complex)
    return _commutant(tuple(tuple(b) for b in algebra.blocks), frame.tobytes(), tol)


def contains(algebra: Algebra, x: np.ndarray, tol: Tolerance = DEFAULT_TOLERANCE) -> Tuple[bool, float]:
    x = np.asarray(x, dtype=complex)
    if x.shape != (algebra.rep_dim, algebra.rep_dim):
        raise ShapeMismatchError(
            f"element has shape {x.shape}, algebra acts on dimension {algebra.rep_dim}"
        )
    return algebra.basis.contains(x, tol)


def amplify(algebra: Algebra, r: int) -> Algebra:
    """M_r(B) acting on G ⊕ ... ⊕ G (r copies)."""
    dim = algebra.rep_dim
    new_blocks = tuple((r * n, m) for n, m in algebra.blocks)
    offsets, new_offsets = _offsets(algebra.blocks), _offsets(new_blocks)
    perm = np.zeros((r * dim, r * dim), dtype=complex)
    for k, (n, m) in enumerate(algebra.blocks):
        for s in range(r):
            for i in range(n):
                for mu in range(m):
                    perm[s * dim + offsets[k] + i * m + mu,
                         new_offsets[k] + (s * n + i) * m + mu] = 1.0
    frame = np.kron(np.eye(r), algebra.frame) @ perm
    return Algebra(new_blocks, frame)


def restrict_blocks(algebra: Algebra, keep: Sequence[int]) -> Tuple[Algebra, np.ndarray]:
    """The corner ⊕_{k in keep} of B on its own space, with the inclusion isometry G_keep -> G."""
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise InvalidStructureError("cannot restrict to an empty set of blocks")
    cols = []
    for k in keep:
        sl = algebra._block_slice(k)
        cols.extend(range(sl.start, sl.stop))
    inclusion = algebra.frame[:, cols]
    blocks = tuple(algebra.blocks[k] for k in keep)
    sub = Algebra(blocks, np.eye(len(cols), dtype=complex))
    return sub, inclusion


@dataclass(frozen=True, eq=False)
class Representation:
    """A *-representation given by its images on the algebra basis."""

    algebra: Algebra
    space_dim: int
    images: Tuple[np.ndarray, ...]
    _stacked: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.images) != self.algebra.dim:
            raise ShapeMismatchError(
                f"{len(self.images)} images for an algebra of dimension {self.algebra.dim}"
            )
        for img in self.images:
            if img.shape != (self.space_dim, self.space_dim):
                raise ShapeMismatchError(f"image has shape {img.shape}, expected square {self.space_dim}")
        stacked = np.array(self.images, dtype=complex).reshape(len(self.images), self.space_dim, self.space_dim)
        object.__setattr__(self, "_stacked", stacked)

    def apply(self, b: np.ndarray) -> np.ndarray:
        coeffs = self.algebra.basis.coordinates(b)
        return np.tensordot(coeffs, self._stacked, axes=1)

    def residuals(self) -> Dict[str, float]:
        basis = self.algebra.basis.basis
        star = max(frobenius(self.apply(b.conj().T) - img.conj().T) for b, img in zip(basis, self.images))
        mult = 0.0
        for a, ia in zip(basis, self.images):
            for b, ib in zip(basis, self.images):
                mult = max(mult, frobenius(self.apply(a @ b) - ia @ ib))
        unit = frobenius(self.apply(self.algebra.unit) - np.eye(self.space_dim))
        return {"star": star, "multiplicative": mult, "unital": unit}

    def is_homomorphism(self, tol: Tolerance = DEFAULT_TOLERANCE) -> bool:
        return all(tol.allows(v, 1.0) for v in self.residuals().values())


def defining_representation(algebra: Algebra) -> Representation:
    return Representation(algebra, algebra.rep_dim, tuple(algebra.basis.basis))


def block_images(algebra: Algebra, multiplicities: Sequence[int], conjugate: np.ndarray = None) -> Tuple[int, List[np.ndarray]]:
    """Images of the basis under b ↦ ⊕_k b_k ⊗ 1_{r_k} (optionally conjugated)."""
    dim = sum(n * r for (n, _), r in zip(algebra.blocks, multiplicities))
    images = []
    for b in algebra.basis.basis:
        out = np.zeros((dim, dim), dtype=complex)
        off = 0
        for k, ((n, _), r) in enumerate(zip(algebra.blocks, multiplicities)):
            if r == 0:
                continue
            out[off:off + n * r, off:off + n * r] = np.kron(algebra.block_of(b, k), np.eye(r))
            off += n * r
        if conjugate is not None:
            out = conjugate @ out @ conjugate.conj().T
        images.append(out)
    return dim, images


def random_representation(algebra: Algebra, multiplicities: Sequence[int], seed) -> Representation:
    """⊕_k id_{n_k} ⊗ 1_{r_k} composed with a Haar-random change of basis."""
    multiplicities = [int(r) for r in multiplicities]
    if len(multiplicities) != len(algebra.blocks):
        raise ShapeMismatchError(
            f"{len(multiplicities)} multiplicities for {len(algebra.blocks)} blocks"
        )
    if any(r < 0 for r in multiplicities):
        raise InvalidStructureError("multiplicities must be nonnegative")
    dim = sum(n * r for (n, _), r in zip(algebra.blocks, multiplicities))
    if dim == 0:
        raise InvalidStructureError("representation has zero total dimension")
    unitary = random_unitary(dim, seed)
    dim, images = block_images(algebra, multiplicities, unitary)
    return Representation(algebra, dim, tuple(images))
