"""Tolerance-aware dense complex linear algebra shared by every service.

All operators are ``numpy`` complex arrays. Subspaces of operators are kept as
``OperatorSpan`` values whose basis is orthonormal for the Hilbert-Schmidt
pairing ``<A, B> = trace(A* B)``, so coordinates are plain inner products.
"""

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import linalg

from ..config import settings
from ..utils.errors import NumericError, ShapeMismatchError
from ..utils.logging import logger


class Tolerance(BaseModel):
    """Absolute and relative cutoffs for ranks and residual checks"""

    model_config = ConfigDict(frozen=True)

    abs_eps: float = Field(default=1e-9, ge=0.0, lt=1.0)
    rel_eps: float = Field(default=1e-8, ge=0.0, lt=1.0)

    @classmethod
    def from_settings(cls) -> "Tolerance":
        return cls(abs_eps=settings.ABS_EPS, rel_eps=settings.REL_EPS)

    def cutoff(self, scale: float) -> float:
        """Singular values or eigenvalues at or below this are treated as zero."""
        return self.abs_eps + self.rel_eps * scale

    def allows(self, residual: float, scale: float = 1.0) -> bool:
        return residual <= self.abs_eps + self.rel_eps * scale


DEFAULT_TOLERANCE = Tolerance.from_settings()


def as_cmatrix(x, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-d complex array."""
    arr = np.asarray(x, dtype=complex)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ShapeMismatchError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} has non-finite entries")
    return arr


def frobenius(x: np.ndarray) -> float:
    return float(np.linalg.norm(x))


def _normalize_phase(v: np.ndarray) -> np.ndarray:
    # fix the phase on the first entry of maximal (rounded) modulus
    idx = int(np.argmax(np.round(np.abs(v), 9)))
    if abs(v[idx]) == 0.0:
        return v
    return v * (np.conj(v[idx]) / abs(v[idx]))


def _ordered_columns(columns: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Phase-normalize columns and order them by descending weight, then entries."""
    cols = [_normalize_phase(columns[:, i]) for i in range(columns.shape[1])]
    keys = []
    for w, c in zip(weights, cols):
        entries = tuple(np.round(np.concatenate([c.real, c.imag]), 9))
        keys.append((-round(float(w), 9), entries))
    order = sorted(range(len(cols)), key=lambda i: keys[i])
    if not cols:
        return columns[:, :0]
    return np.stack([cols[i] for i in order], axis=1)


@dataclass(frozen=True, eq=False)
class OperatorSpan:
    """A subspace of B(C^cols, C^rows) with an HS-orthonormal basis."""

    ambient_rows: int
    ambient_cols: int
    basis: Tuple[np.ndarray, ...]
    _stacked: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self._stacked is None:
            stacked = np.array(
                [b.reshape(-1) for b in self.basis], dtype=complex
            ).reshape(len(self.basis), self.ambient_rows * self.ambient_cols)
            object.__setattr__(self, "_stacked", stacked)

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.ambient_rows, self.ambient_cols)

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        if x.shape != self.shape:
            raise ShapeMismatchError(f"expected shape {self.shape}, got {x.shape}")
        return x

    def coordinates(self, x: np.ndarray) -> np.ndarray:
        """HS coordinates of the orthogonal projection of x onto the span."""
        x = self._check(x)
        return self._stacked.conj() @ x.reshape(-1)

    def combine(self, coeffs: Sequence[complex]) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=complex)
        if self.dim == 0:
            return np.zeros(self.shape, dtype=complex)
        return (coeffs @ self._stacked).reshape(self.shape)

    def project(self, x: np.ndarray) -> np.ndarray:
        return self.combine(self.coordinates(x))

    def residual(self, x: np.ndarray) -> float:
        x = self._check(x)
        return frobenius(x - self.project(x))

    def batch_residuals(self, flat: np.ndarray) -> np.ndarray:
        """Distances from the span for a stack of row-major flattened operators."""
        flat = np.asarray(flat, dtype=complex).reshape(-1, self.ambient_rows * self.ambient_cols)
        if self.dim == 0:
            return np.linalg.norm(flat, axis=1)
        projected = (flat @ self._stacked.conj().T) @ self._stacked
        return np.linalg.norm(flat - projected, axis=1)

    def contains(self, x: np.ndarray, tol: Tolerance = DEFAULT_TOLERANCE) -> Tuple[bool, float]:
        x = self._check(x)
        res = self.residual(x)
        return tol.allows(res, 1.0 + frobenius(x)), res

    def gram_defect(self) -> float:
        """Distance of the basis Gram matrix from the identity."""
        gram = self._stacked.conj() @ self._stacked.T
        return frobenius(gram - np.eye(self.dim))

    def same_span(self, other: "OperatorSpan", tol: Tolerance = DEFAULT_TOLERANCE) -> Tuple[bool, float]:
        if other.shape != self.shape or other.dim != self.dim:
            return False, float("inf")
        worst = max([self.residual(b) for b in other.basis] + [0.0])
        return tol.allows(worst, 1.0), worst


def empty_span(rows: int, cols: int) -> OperatorSpan:
    return OperatorSpan(rows, cols, tuple())


def _span_from_columns(columns: np.ndarray, weights: np.ndarray, rows: int, cols: int) -> OperatorSpan:
    ordered = _ordered_columns(columns, weights)
    basis = tuple(ordered[:, i].reshape(rows, cols) for i in range(ordered.shape[1]))
    return OperatorSpan(rows, cols, basis)


def hs_orthonormalize(vectors: Iterable[np.ndarray], tol: Tolerance = DEFAULT_TOLERANCE,
                      shape: Optional[Tuple[int, int]] = None) -> OperatorSpan:
    """Orthonormal basis (HS pairing) of the span of same-shaped operators."""
    mats = [np.asarray(v, dtype=complex) for v in vectors]
    if not mats:
        if shape is None:
            raise ShapeMismatchError("cannot infer the ambient shape of an empty collection")
        return empty_span(*shape)
    rows, cols = mats[0].shape if mats[0].ndim == 2 else (mats[0].shape[0], 1)
    mats = [m.reshape(m.shape[0], -1) if m.ndim == 1 else m for m in mats]
    for m in mats:
        if m.shape != (rows, cols):
            raise ShapeMismatchError(f"shape mismatch: {m.shape} vs {(rows, cols)}")
    if shape is not None and tuple(shape) != (rows, cols):
        raise ShapeMismatchError(f"shape mismatch: {(rows, cols)} vs {tuple(shape)}")
    stacked = np.stack([m.reshape(-1) for m in mats], axis=1)
    u, s, _ = linalg.svd(stacked, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return empty_span(rows, cols)
    rank = int(np.sum(s > tol.cutoff(float(s[0]))))
    return _span_from_columns(u[:, :rank], s[:rank], rows, cols)


def tolerant_rank(matrix: np.ndarray, tol: Tolerance = DEFAULT_TOLERANCE) -> int:
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.size == 0:
        return 0
    s = linalg.svd(matrix, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > tol.cutoff(float(s[0]))))


def range_basis(matrix: np.ndarray, tol: Tolerance = DEFAULT_TOLERANCE) -> np.ndarray:
    """Orthonormal columns spanning the tolerant column space."""
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.size == 0:
        return np.zeros((matrix.shape[0], 0), dtype=complex)
    u, s, _ = linalg.svd(matrix, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((matrix.shape[0], 0), dtype=complex)
    rank = int(np.sum(s > tol.cutoff(float(s[0]))))
    return _ordered_columns(u[:, :rank], s[:rank])


def complement_basis(vectors: np.ndarray, tol: Tolerance = DEFAULT_TOLERANCE) -> np.ndarray:
    """Orthonormal columns spanning the orthogonal complement of the columns of ``vectors``."""
    vectors = as_cmatrix(vectors, "vectors")
    n = vectors.shape[0]
    u, s, _ = linalg.svd(vectors, full_matrices=True)
    rank = 0 if s.size == 0 or s[0] == 0.0 else int(np.sum(s > tol.cutoff(float(s[0]))))
    rest = u[:, rank:]
    return _ordered_columns(rest, np.ones(n - rank))


def kernel_basis(matrix: np.ndarray, n_cols: int, tol: Tolerance = DEFAULT_TOLERANCE) -> np.ndarray:
    """Orthonormal columns spanning the tolerant kernel."""
    if matrix.shape[0] == 0:
        return np.eye(n_cols, dtype=complex)
    _, s, vh = linalg.svd(matrix, full_matrices=True)
    if s.size == 0 or s[0] == 0.0:
        return np.eye(n_cols, dtype=complex)
    rank = int(np.sum(s > tol.cutoff(float(s[0]))))
    return vh[rank:].conj().T


def solve_intertwiners(left_ops: Sequence[np.ndarray], right_ops: Sequence[np.ndarray],
                       shape: Tuple[int, int], tol: Tolerance = DEFAULT_TOLERANCE) -> OperatorSpan:
    """Basis of {x : L_i x = x R_i for every i} for index-aligned L_i, R_i."""
    rows, cols = shape
    left_ops = [np.asarray(op, dtype=complex) for op in left_ops]
    right_ops = [np.asarray(op, dtype=complex) for op in right_ops]
    if len(left_ops) != len(right_ops):
        raise ShapeMismatchError("left and right operator collections must be index-aligned")
    blocks = []
    eye_r, eye_c = np.eye(rows), np.eye(cols)
    for lop, rop in zip(left_ops, right_ops):
        if lop.shape != (rows, rows):
            raise ShapeMismatchError(f"left operator has shape {lop.shape}, expected {(rows, rows)}")
        if rop.shape != (cols, cols):
            raise ShapeMismatchError(f"right operator has shape {rop.shape}, expected {(cols, cols)}")
        # row-major vec: vec(L X) = (L kron I) vec X, vec(X R) = (I kron R^T) vec X
        blocks.append(np.kron(lop, eye_c) - np.kron(eye_r, rop.T))
    system = np.vstack(blocks) if blocks else np.zeros((0, rows * cols), dtype=complex)
    null = kernel_basis(system, rows * cols, tol)
    logger.log_debug("intertwiners_solved", {
        "shape": [rows, cols], "equations": len(blocks), "dimension": int(null.shape[1])
    })
    return _span_from_columns(null, np.ones(null.shape[1]), rows, cols)


def gram_quotient(gram: np.ndarray, tol: Tolerance = DEFAULT_TOLERANCE) -> Tuple[int, np.ndarray]:
    """Quotient a PSD Gram matrix by its null vectors.

    Returns ``(dimension, factor)`` with ``factor`` of shape (dimension, n) such that
    ``factor* factor`` reproduces ``gram``; column j of the factor holds the coordinates
    of the class of the j-th generating vector in an orthonormal frame.
    """
    gram = np.asarray(gram, dtype=complex)
    if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
        raise ShapeMismatchError(f"Gram matrix must be square, got {gram.shape}")
    n = gram.shape[0]
    if n == 0:
        return 0, np.zeros((0, 0), dtype=complex)
    scale = frobenius(gram)
    asym = frobenius(gram - gram.conj().T)
    if not tol.allows(asym, scale):
        raise NumericError(f"Gram matrix is not Hermitian (defect {asym:.3e})")
    herm = 0.5 * (gram + gram.conj().T)
    evals, evecs = linalg.eigh(herm)
    evals, evecs = evals[::-1], evecs[:, ::-1]
    top = max(float(np.max(np.abs(evals))), 0.0)
    cutoff = tol.cutoff(top)
    if evals[-1] < -cutoff:
        raise NumericError(
            f"semi-inner product is not positive: eigenvalue {evals[-1]:.3e} below -{cutoff:.3e}"
        )
    keep = evals > cutoff
    dim = int(np.sum(keep))
    vecs = _ordered_columns(evecs[:, keep], evals[keep])
    factor = np.sqrt(evals[keep])[:, None] * vecs.conj().T
    return dim, factor


def pseudo_inverse(matrix: np.ndarray) -> np.ndarray:
    return linalg.pinv(matrix)


def random_complex(shape: Tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_unitary(dim: int, seed) -> np.ndarray:
    """Haar-random unitary from a QR decomposition with phase correction."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if dim == 0:
        return np.zeros((0, 0), dtype=complex)
    q, r = linalg.qr(random_complex((dim, dim), rng))
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases[None, :]
