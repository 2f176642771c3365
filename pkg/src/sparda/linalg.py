"""Small dense linear algebra used by the relaxation solver."""

from __future__ import annotations

import numpy as np


class EigenConvergenceError(RuntimeError):
    pass


def simplex_project(values) -> np.ndarray:
    """Euclidean projection onto the probability simplex.

    Returns the minimizer of ``||w - values||^2`` over ``w >= 0, sum(w) = 1``
    using the sort-and-threshold rule: find the largest ``rho`` with
    ``u_rho - (sum_{r<=rho} u_r - 1) / rho > 0`` on the descending sort ``u``
    and shift everything by that threshold.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("cannot project an empty vector")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    rho = np.count_nonzero(u - css / ind > 0)
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def _jacobi(a: np.ndarray, tol: float, max_sweeps: int):
    a = a.copy()
    d = a.shape[0]
    v = np.eye(d)
    scale = max(1.0, np.abs(a).max(initial=0.0))
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.triu(a, 1) ** 2))
        if off <= tol * scale:
            return np.diag(a).copy(), v
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.copysign(1.0, theta) / (abs(theta) + np.hypot(theta, 1.0))
                c = 1.0 / np.hypot(t, 1.0)
                s = t * c
                # A <- J^T A J applied to columns then rows p, q
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
    off = np.sqrt(np.sum(np.triu(a, 1) ** 2))
    if off <= tol * scale:
        return np.diag(a).copy(), v
    raise EigenConvergenceError(
        f"Jacobi sweeps did not converge in {max_sweeps} sweeps "
        f"(off-diagonal norm {off:.3e})")


def symmetric_eigendecomposition(B, method: str = "jacobi", tol: float = 1e-12,
                                 max_sweeps: int = 100):
    """Eigendecomposition ``B = Q diag(w) Q^T`` of a symmetric matrix.

    Parameters
    ----------
    B : array_like, shape (d, d)
        Symmetric matrix (checked to 1e-10, relative to its largest entry).
    method : {"jacobi", "lapack"}
        ``"jacobi"`` runs cyclic Jacobi rotations until the off-diagonal
        Frobenius norm drops below ``tol * max(1, max|B|)``; ``"lapack"``
        defers to ``numpy.linalg.eigh``.
    tol, max_sweeps :
        Jacobi stopping rule and sweep cap.

    Returns
    -------
    Q : ndarray, shape (d, d)
        Orthonormal eigenvectors as columns.
    w : ndarray, shape (d,)
        Eigenvalues, sorted descending.
    """
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {B.shape}")
    scale = max(1.0, np.abs(B).max(initial=0.0))
    if np.abs(B - B.T).max(initial=0.0) > 1e-10 * scale:
        raise ValueError("matrix is not symmetric")
    B = 0.5 * (B + B.T)
    if method == "jacobi":
        w, Q = _jacobi(B, tol, max_sweeps)
    elif method == "lapack":
        w, Q = np.linalg.eigh(B)
    else:
        raise ValueError(f"unknown eigendecomposition method {method!r}")
    order = np.argsort(-w, kind="stable")
    return Q[:, order], w[order]


def soft_threshold(a, threshold: float) -> np.ndarray:
    """Entrywise ``sign(a) * max(0, |a| - threshold)``."""
    a = np.asarray(a, dtype=float)
    return np.sign(a) * np.maximum(np.abs(a) - threshold, 0.0)
