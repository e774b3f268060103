"""Cyclic Jacobi eigendecomposition for real symmetric matrices."""

from __future__ import annotations

import numpy as np

from augsel.errors import DomainError, NumericError

MAX_SWEEPS = 100


def _off_norm(a: np.ndarray) -> float:
    # direct sum over the off-diagonal; subtracting the diagonal from the full
    # norm cancels catastrophically once the matrix is nearly diagonal
    off = a - np.diag(np.diag(a))
    return float(np.sqrt(np.sum(off**2)))


def sym_eig(m, tol: float = 1e-12, max_sweeps: int = MAX_SWEEPS) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors (columns) of ``m``.

    Sweeps over all (p, q) pairs in row order, zeroing each off-diagonal
    entry with a Givens rotation, until the off-diagonal Frobenius norm is
    at most ``tol * |m|_F``.
    """
    a = np.array(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError("matrix has non-finite entries")
    scale = float(np.linalg.norm(a))
    if np.max(np.abs(a - a.T), initial=0.0) > 1e-9 * max(scale, 1.0):
        raise DomainError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    target = tol * scale

    for _ in range(max_sweeps):
        if _off_norm(a) <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    a[p, q] = a[q, p] = 0.0
                    continue
                # rotation angle from the stable tangent formula
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        if _off_norm(a) > target:
            raise NumericError(f"Jacobi did not converge in {max_sweeps} sweeps")

    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def sym_sqrt(m) -> np.ndarray:
    """Principal square root of a symmetric PSD matrix; negative eigenvalues clamp to 0."""
    w, v = sym_eig(m)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T
