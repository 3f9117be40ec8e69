"""Dense complex linear algebra helpers.

Matrix functions go through diagonalization only; defective matrices are
rejected. Eigenvalues are returned in a fixed deterministic order so modal
bookkeeping is reproducible run to run.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (InvalidArgumentError, NotDiagonalizableError,
                     NumericFailureError)

_EIG_COND_LIMIT = 1e8


@dataclass(frozen=True)
class EigenDecomposition:
    """Right eigenpairs with the eigenvector-matrix condition estimate."""

    values: np.ndarray
    vectors: np.ndarray
    cond: float


def _sort_order(values: np.ndarray) -> np.ndarray:
    # real part, then imaginary part, ties by original index (stable sort)
    return np.lexsort((np.arange(values.size), values.imag, values.real))


def eig(A) -> EigenDecomposition:
    """Eigendecomposition with eigenvalues sorted by (Re, Im)."""
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    if A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise InvalidArgumentError("eig needs a square matrix")
    try:
        vals, vecs = np.linalg.eig(A)
    except np.linalg.LinAlgError as exc:
        raise NumericFailureError(f"eigen iteration failed: {exc}") from exc
    order = _sort_order(vals)
    vals = vals[order]
    vecs = vecs[:, order]
    try:
        cond = float(np.linalg.cond(vecs))
    except np.linalg.LinAlgError:
        cond = float("inf")
    return EigenDecomposition(values=vals, vectors=vecs, cond=cond)


def matfun(A, f) -> np.ndarray:
    """f applied to A through diagonalization: V diag(f(lambda)) V^-1."""
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    dec = eig(A)
    if not np.isfinite(dec.cond) or dec.cond > _EIG_COND_LIMIT:
        raise NotDiagonalizableError(
            f"eigenbasis condition {dec.cond:.3e} exceeds {_EIG_COND_LIMIT:.0e}")
    fd = np.asarray([f(lam) for lam in dec.values], dtype=complex)
    return dec.vectors @ (fd[:, None] * np.linalg.inv(dec.vectors))


def principal_sqrt(A, allow_negative_real: bool = False) -> np.ndarray:
    """Matrix square root with eigenvalues mapped to Re >= 0.

    Eigenvalues on the closed negative real axis are rejected unless
    allow_negative_real is set, in which case sqrt(-x) = i sqrt(x) for x > 0
    (and 0 maps to 0).
    """
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    dec = eig(A)
    if not np.isfinite(dec.cond) or dec.cond > _EIG_COND_LIMIT:
        raise NotDiagonalizableError(
            f"eigenbasis condition {dec.cond:.3e} exceeds {_EIG_COND_LIMIT:.0e}")
    scale = max(float(np.abs(dec.values).max()), 1.0)
    if not allow_negative_real:
        bad = (dec.values.real < 0) & (np.abs(dec.values.imag) <= 1e-14 * scale)
        if np.any(bad):
            raise InvalidArgumentError(
                "eigenvalue on the closed negative real axis; "
                "pass allow_negative_real=True to take the i*sqrt branch")

    def branch(lam):
        if lam.real < 0 and abs(lam.imag) <= 1e-14 * scale:
            return 1j * np.sqrt(abs(lam))
        return np.sqrt(lam + 0j)  # numpy principal branch, Re >= 0

    fd = np.asarray([branch(lam) for lam in dec.values], dtype=complex)
    return dec.vectors @ (fd[:, None] * np.linalg.inv(dec.vectors))


def vandermonde_solve(nodes, rhs) -> np.ndarray:
    """Solve sum_j lambda_j^n w_j = rhs_n, n = 1..m, for the vectors w_j.

    nodes: m pairwise distinct complex numbers. rhs: array (m, d) whose row
    n-1 is the data at power n. Full-pivot Gaussian elimination on the
    m x m Vandermonde block system; warns when the condition exceeds 1e10.
    """
    lam = np.asarray(nodes, dtype=complex).reshape(-1)
    m = lam.size
    B = np.asarray(rhs, dtype=complex)
    if B.ndim == 1:
        B = B[:, None]
    if B.shape[0] != m:
        raise InvalidArgumentError("rhs must supply one vector per node")
    gaps = np.abs(lam[:, None] - lam[None, :]) + np.eye(m)
    if gaps.min() <= 1e-12:
        raise InvalidArgumentError("duplicate nodes: Vandermonde system singular")
    V = lam[None, :] ** np.arange(1, m + 1)[:, None]
    cond = float(np.linalg.cond(V))
    if cond > 1e10:
        warnings.warn(f"Vandermonde condition {cond:.3e} exceeds 1e10",
                      RuntimeWarning, stacklevel=2)
    return _full_pivot_solve(V, B)


def _full_pivot_solve(A, B):
    """Gaussian elimination with full pivoting; A (m,m), B (m,d)."""
    A = A.astype(complex).copy()
    B = B.astype(complex).copy()
    m = A.shape[0]
    colperm = np.arange(m)
    for k in range(m):
        sub = np.abs(A[k:, k:])
        i_rel, j_rel = np.unravel_index(np.argmax(sub), sub.shape)
        i, j = k + i_rel, k + j_rel
        if sub[i_rel, j_rel] == 0.0:
            raise NumericFailureError("singular system in full-pivot elimination")
        if i != k:
            A[[k, i]] = A[[i, k]]
            B[[k, i]] = B[[i, k]]
        if j != k:
            A[:, [k, j]] = A[:, [j, k]]
            colperm[[k, j]] = colperm[[j, k]]
        piv = A[k, k]
        for r in range(k + 1, m):
            factor = A[r, k] / piv
            if factor != 0.0:
                A[r, k:] -= factor * A[k, k:]
                B[r] -= factor * B[k]
    X = np.zeros_like(B)
    for k in range(m - 1, -1, -1):
        X[k] = (B[k] - A[k, k + 1:] @ X[k + 1:]) / A[k, k]
    out = np.zeros_like(X)
    out[colperm] = X
    return out
