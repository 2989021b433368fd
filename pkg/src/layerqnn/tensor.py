"""Dense complex linear algebra kernels shared by every other module.

Conventions
-----------
All arrays are C-ordered (row-major). A single-qubit density matrix
``|i><j|`` is vectorized to flat index ``2*i + j``, so the per-site trace
vector is ``(1, 0, 0, 1)``. Multi-qubit vectorizations interleave the
(ket, bra) pair of each qubit: ``(i1 j1)(i2 j2)...``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "SvdTruncation",
    "NumericalError",
    "TRACE_VEC",
    "svd_truncate",
    "gram_truncate",
    "include_direction",
    "matrix_exp",
    "permute",
    "inverse_permutation",
    "vectorize",
    "unvectorize",
    "superoperator",
]

TRACE_VEC = np.array([1.0, 0.0, 0.0, 1.0], dtype=complex)


class NumericalError(RuntimeError):
    """Raised when a linear-algebra kernel fails to produce a usable result."""


@dataclass(frozen=True)
class SvdTruncation:
    """Truncation policy for :func:`svd_truncate`.

    ``max_rank=None`` means unlimited. Singular values below
    ``rel_cutoff * sigma_max`` are always dropped.
    """

    max_rank: int | None = None
    rel_cutoff: float = 1e-12

    def __post_init__(self):
        if self.max_rank is not None and self.max_rank < 1:
            raise ValueError(f"max_rank must be positive, got {self.max_rank}")
        if self.rel_cutoff < 0:
            raise ValueError(f"rel_cutoff must be non-negative, got {self.rel_cutoff}")


def _svd(matrix):
    try:
        return scipy.linalg.svd(matrix, full_matrices=False, lapack_driver="gesdd", check_finite=False)
    except np.linalg.LinAlgError:
        pass
    try:
        return scipy.linalg.svd(matrix, full_matrices=False, lapack_driver="gesvd", check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge for matrix of shape {matrix.shape}") from exc


def svd_truncate(matrix, trunc: SvdTruncation | None = None):
    """Truncated SVD ``matrix ~= U @ diag(S) @ V``.

    Returns
    -------
    U, S, V, discarded_weight
        ``discarded_weight`` is the sum of dropped squared singular values
        divided by the sum of all squared singular values (0 for a zero matrix).
    """
    trunc = trunc or SvdTruncation()
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ValueError(f"svd_truncate expects a matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise NumericalError(f"non-finite entries in matrix of shape {matrix.shape}")
    u, s, v = _svd(matrix)
    total = float(np.sum(s**2))
    if total == 0.0:
        return u[:, :1], s[:1], v[:1], 0.0
    keep = int(np.count_nonzero(s >= trunc.rel_cutoff * s[0]))
    if trunc.max_rank is not None:
        keep = min(keep, trunc.max_rank)
    keep = max(keep, 1)
    discarded = float(np.sum(s[keep:] ** 2)) / total
    return u[:, :keep], s[:keep], v[:keep], discarded


def gram_truncate(matrix, trunc: SvdTruncation):
    """Rank-capped split ``matrix ~= U @ (U^dag @ matrix)`` via the Gram matrix.

    Cheaper than :func:`svd_truncate` for wide matrices but resolves singular
    values only down to ~1e-8 of the largest, so it is meant for rank-capped
    truncations. Returns ``U, U^dag @ matrix, discarded_weight``.
    """
    matrix = np.asarray(matrix)
    if not np.all(np.isfinite(matrix)):
        raise NumericalError(f"non-finite entries in matrix of shape {matrix.shape}")
    gram = matrix @ matrix.conj().T
    try:
        w, u = scipy.linalg.eigh(gram, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigh did not converge for Gram matrix of shape {gram.shape}") from exc
    w = np.clip(w[::-1], 0.0, None)
    u = u[:, ::-1]
    total = float(w.sum())
    if total == 0.0:
        return u[:, :1], u[:, :1].conj().T @ matrix, 0.0
    keep = int(np.count_nonzero(w >= (trunc.rel_cutoff**2) * w[0]))
    if trunc.max_rank is not None:
        keep = min(keep, trunc.max_rank)
    keep = max(keep, 1)
    u = u[:, :keep]
    return u, u.conj().T @ matrix, float(w[keep:].sum()) / total


def include_direction(basis, f, max_rank: int | None = None, tol: float = 1e-12):
    """Orthonormal columns spanning ``basis`` with ``f`` forced into the span.

    ``basis`` has orthonormal columns ordered by importance. If ``f`` is not
    already in its span, its orthogonal residual is appended, or replaces the
    last column when the basis is already at ``max_rank``.
    """
    f = np.asarray(f)
    norm = np.linalg.norm(f)
    if norm == 0:
        return basis
    f = f / norm
    resid = f - basis @ (basis.conj().T @ f)
    if np.linalg.norm(resid) < tol:
        return basis
    head = basis if max_rank is None or basis.shape[1] < max_rank else basis[:, :-1]
    resid = f - head @ (head.conj().T @ f)
    resid = resid - head @ (head.conj().T @ resid)  # second pass for orthogonality
    return np.hstack([head, (resid / np.linalg.norm(resid))[:, None]])


def matrix_exp(matrix, scale: complex = 1.0):
    """Return ``exp(scale * matrix)``.

    Normal inputs go through an eigendecomposition (keeps unitaries unitary to
    machine precision); everything else falls back to scaling-and-squaring.
    """
    a = np.asarray(matrix, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix_exp expects a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericalError("non-finite entries passed to matrix_exp")
    scale = complex(scale)
    if not a.any():
        return np.eye(a.shape[0], dtype=complex)
    if np.allclose(a, a.conj().T, rtol=0, atol=1e-14 * max(1.0, np.abs(a).max())):
        w, v = np.linalg.eigh((a + a.conj().T) / 2)
        out = (v * np.exp(scale * w)) @ v.conj().T
    else:
        out = scipy.linalg.expm(scale * a)
    if not np.all(np.isfinite(out)):
        raise NumericalError("overflow in matrix_exp")
    return out


def inverse_permutation(perm):
    perm = np.asarray(perm)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size)
    return inv


def permute(tensor, perm):
    """Axis permutation returning a C-contiguous copy."""
    return np.ascontiguousarray(np.transpose(tensor, perm))


def vectorize(rho, n_qubits: int):
    """Density matrix (2^n x 2^n) -> vector with interleaved per-qubit (i, j) pairs."""
    t = np.asarray(rho).reshape((2,) * (2 * n_qubits))
    order = [ax for q in range(n_qubits) for ax in (q, n_qubits + q)]
    return permute(t, order).reshape(-1)


def unvectorize(vec, n_qubits: int):
    """Inverse of :func:`vectorize`."""
    t = np.asarray(vec).reshape((2,) * (2 * n_qubits))
    order = [ax for q in range(n_qubits) for ax in (q, n_qubits + q)]
    return permute(t, inverse_permutation(order)).reshape(2**n_qubits, 2**n_qubits)


def superoperator(op, n_qubits: int):
    """Matrix of ``rho -> op @ rho @ op^dag`` in the interleaved vectorization.

    Returned with shape ``(4,)*n + (4,)*n`` (output legs first).
    """
    # row-major vec(A rho A^dag) = (A kron conj(A)) vec(rho)
    s = np.kron(op, op.conj()).reshape((2,) * (4 * n_qubits))
    n = n_qubits
    # axes: out ket (0..n-1), out bra (n..2n-1), in ket (2n..3n-1), in bra (3n..4n-1)
    order = [ax for q in range(n) for ax in (q, n + q)] + [ax for q in range(n) for ax in (2 * n + q, 3 * n + q)]
    return permute(s, order).reshape((4,) * (2 * n))
