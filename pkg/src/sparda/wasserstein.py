"""Univariate squared Wasserstein distance and the projected objective.

The empirical projected divergence between two sample sets along a
direction ``beta`` is the squared L2 distance between the quantile functions
of the projected samples.  It is computed by sorting both projections and
pairing the sorted ranks with the monotone (northwest-corner) coupling, so no
dense n-by-m matching matrix is ever formed.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class QuantileCoupling:
    """Sparse monotone transport plan between sorted ranks.

    ``rows[k]`` indexes the sorted first sample, ``cols[k]`` the sorted second
    sample and ``weights[k]`` is the mass moved between them.
    """

    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray
    n: int
    m: int

    def triples(self) -> list[tuple[int, int, float]]:
        return [(int(i), int(j), float(w))
                for i, j, w in zip(self.rows, self.cols, self.weights)]

    def dense(self) -> np.ndarray:
        """Materialize the n-by-m plan (tests and diagnostics only)."""
        plan = np.zeros((self.n, self.m))
        np.add.at(plan, (self.rows, self.cols), self.weights)
        return plan


@dataclass(frozen=True)
class GaussianSpec:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise ValueError(
                f"covariance shape {cov.shape} does not match mean of "
                f"length {mean.size}")
        if np.max(np.abs(cov - cov.T), initial=0.0) > 1e-12:
            raise ValueError("covariance is not symmetric")
        if np.linalg.eigvalsh(cov).min(initial=0.0) < -1e-10:
            raise ValueError("covariance is not positive semidefinite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.mean.size


def as_samples(data, name: str = "samples") -> np.ndarray:
    """Validate and return an ``(n, d)`` float array of finite observations."""
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-d array, got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and one column")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def canonical_rows(samples: np.ndarray) -> np.ndarray:
    """Rows in lexicographic order (first column as primary key).

    Every statistic here depends only on the empirical distribution, so
    fixing the row order makes results independent of input order down to
    floating-point summation.
    """
    samples = np.asarray(samples)
    if samples.shape[0] < 2:
        return samples
    return samples[np.lexsort(samples.T[::-1])]


def canonical_sign(beta: np.ndarray) -> np.ndarray:
    """Negate ``beta`` if its first nonzero coordinate is negative."""
    beta = np.asarray(beta, dtype=float)
    nz = np.flatnonzero(beta)
    if nz.size and beta[nz[0]] < 0:
        return -beta
    return beta.copy()


def _check_dims(X: np.ndarray, Y: np.ndarray, beta: np.ndarray) -> None:
    if X.shape[1] != Y.shape[1]:
        raise ValueError(
            f"sample sets have different dimensions: {X.shape[1]} vs {Y.shape[1]}")
    if beta.shape != (X.shape[1],):
        raise ValueError(
            f"beta has shape {beta.shape}, expected ({X.shape[1]},)")


def project(samples, beta) -> np.ndarray:
    """Inner product of every row of ``samples`` with ``beta``."""
    samples = np.asarray(samples, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if samples.ndim != 2 or beta.shape != (samples.shape[1],):
        raise ValueError(
            f"cannot project samples of shape {samples.shape} onto beta of "
            f"shape {beta.shape}")
    return samples @ beta


@lru_cache(maxsize=256)
def _coupling_arrays(n: int, m: int):
    # Masses are multiples of 1/(n*m): sample i of the first set owns
    # [i*m, (i+1)*m), sample j of the second owns [j*n, (j+1)*n).
    total = n * m
    cuts = np.union1d(np.arange(0, total + 1, m), np.arange(0, total + 1, n))
    starts, lengths = cuts[:-1], np.diff(cuts)
    rows = starts // m
    cols = starts // n
    weights = lengths / total
    for a in (rows, cols, weights):
        a.flags.writeable = False
    return rows, cols, weights


def quantile_coupling(n: int, m: int) -> QuantileCoupling:
    """Northwest-corner coupling of uniform weights over sorted ranks.

    Parameters
    ----------
    n, m : int
        Sizes of the two sorted samples.

    Returns
    -------
    QuantileCoupling
        At most ``n + m - 1`` triples; row masses are ``1/n`` and column
        masses ``1/m``.  For ``n == m`` this is the identity pairing.
    """
    n, m = int(n), int(m)
    if n < 1 or m < 1:
        raise ValueError(f"sample counts must be positive, got n={n}, m={m}")
    rows, cols, weights = _coupling_arrays(n, m)
    return QuantileCoupling(rows, cols, weights, n, m)


def _sorted_pairs(px: np.ndarray, py: np.ndarray):
    ox = np.argsort(px, kind="stable")
    oy = np.argsort(py, kind="stable")
    return ox, oy


def wasserstein1d(xs, ys) -> float:
    """Squared 2-Wasserstein distance between two empirical distributions on R."""
    xs = np.asarray(xs, dtype=float).ravel()
    ys = np.asarray(ys, dtype=float).ravel()
    if xs.size == 0 or ys.size == 0:
        raise ValueError("wasserstein1d needs nonempty inputs")
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise ValueError("wasserstein1d inputs must be finite")
    cp = quantile_coupling(xs.size, ys.size)
    diff = np.sort(xs)[cp.rows] - np.sort(ys)[cp.cols]
    return float(np.dot(cp.weights, diff * diff))


def objective(X, Y, beta) -> float:
    """Projected divergence ``J(beta)`` between sample sets ``X`` and ``Y``."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    beta = np.asarray(beta, dtype=float)
    _check_dims(X, Y, beta)
    return wasserstein1d(X @ beta, Y @ beta)


def gradient_from_order(X, Y, px, py, ox, oy) -> np.ndarray:
    """Gradient of ``J`` given projections and their sorting permutations.

    ``2 * sum_k w_k (beta.z_k) z_k`` where ``z_k = x_i - y_j`` runs over the
    coupling of sorted ranks; the sum is split into X and Y parts so the
    pairwise differences are never stored.
    """
    cp = quantile_coupling(len(px), len(py))
    ix = ox[cp.rows]
    iy = oy[cp.cols]
    coef = cp.weights * (px[ix] - py[iy])
    wx = np.bincount(ix, weights=coef, minlength=len(px))
    wy = np.bincount(iy, weights=coef, minlength=len(py))
    return 2.0 * (X.T @ wx - Y.T @ wy)


def gradient(X, Y, beta) -> np.ndarray:
    """Gradient ``2 W_M(beta) beta`` of the projected divergence.

    Ties among projected values are broken by sample index (stable sort), in
    which case the result is a subgradient for that particular coupling.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    beta = np.asarray(beta, dtype=float)
    _check_dims(X, Y, beta)
    px, py = X @ beta, Y @ beta
    ox, oy = _sorted_pairs(px, py)
    return gradient_from_order(X, Y, px, py, ox, oy)


def _psd_sqrt(cov: np.ndarray) -> np.ndarray:
    w, q = np.linalg.eigh(cov)
    return (q * np.sqrt(np.clip(w, 0.0, None))) @ q.T


def gaussian_wasserstein(gx: GaussianSpec, gy: GaussianSpec) -> float:
    """``|mu_x - mu_y|^2 + |Sx^(1/2) - Sy^(1/2)|_F^2`` for two Gaussians.

    This is the exact squared Wasserstein distance only when the two
    covariances commute; for non-commuting covariances it is the
    commuting-case expression, not the Bures form.
    """
    if gx.dim != gy.dim:
        raise ValueError(f"dimension mismatch: {gx.dim} vs {gy.dim}")
    dm = gx.mean - gy.mean
    ds = _psd_sqrt(gx.covariance) - _psd_sqrt(gy.covariance)
    return float(dm @ dm + np.sum(ds * ds))
