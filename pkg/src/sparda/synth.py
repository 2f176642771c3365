"""Seeded synthetic scenarios, including the two simulation protocols.

``figure1a`` draws two mean-zero 3-d Gaussians whose covariances differ in
their off-diagonal structure; ``wishart_blocks`` concatenates blocks of three
features whose covariances are Wishart draws, with only the first block
differing between the groups.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import symmetric_eigendecomposition
from .rng import make_rng
from .wasserstein import GaussianSpec

FIG1A_COV_X = np.array([[1.0, 0.2, 0.4],
                        [0.2, 1.0, 0.0],
                        [0.4, 0.0, 1.0]])
FIG1A_COV_Y = np.array([[1.0, -0.9, 0.0],
                        [-0.9, 1.0, 0.0],
                        [0.0, 0.0, 1.0]])

KINDS = ("figure1a", "wishart_blocks", "mean_shift", "variance_shift",
         "null_identical")


@dataclass
class ScenarioSpec:
    """Parameters of a synthetic two-sample scenario.

    ``shift`` is the mean of Y for ``mean_shift``; ``factor`` multiplies the
    first feature's variance of Y for ``variance_shift``; ``noise`` is the
    isotropic variance used by ``mean_shift``, ``variance_shift`` and
    ``null_identical``.
    """

    kind: str
    n: int = 100
    m: int = 100
    d: int = 5
    ell: int = 1
    shift: list = field(default_factory=lambda: [2.0])
    factor: float = 4.0
    noise: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}; "
                             f"expected one of {KINDS}")
        if self.n < 1 or self.m < 1 or self.d < 1 or self.ell < 1:
            raise ValueError("counts must be positive")
        if self.factor <= 0 or self.noise < 0:
            raise ValueError("factor must be positive and noise nonnegative")


def psd_sqrt(cov: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix via its eigendecomposition."""
    cov = np.asarray(cov, dtype=float)
    Q, w = symmetric_eigendecomposition(cov, method="jacobi")
    if w.min(initial=0.0) < -1e-10 * max(1.0, np.abs(cov).max(initial=0.0)):
        raise ValueError("covariance is not positive semidefinite")
    return (Q * np.sqrt(np.clip(w, 0.0, None))) @ Q.T


def gaussian_sample(spec: GaussianSpec, n: int, rng: np.random.Generator
                    ) -> np.ndarray:
    """``n`` draws of ``mean + S^(1/2) z`` with standard normal ``z``."""
    root = psd_sqrt(spec.covariance)
    z = rng.standard_normal((n, spec.dim))
    return spec.mean + z @ root


def wishart_identity(df: int, p: int, rng: np.random.Generator) -> np.ndarray:
    """Wishart(I_p, df) draw by the Bartlett decomposition (``E[W] = df * I``)."""
    if df < p:
        raise ValueError("Bartlett decomposition needs df >= p")
    A = np.tril(rng.standard_normal((p, p)), -1)
    A[np.diag_indices(p)] = np.sqrt(rng.chisquare(df - np.arange(p)))
    W = A @ A.T
    return 0.5 * (W + W.T)


def figure1a_dataset(n: int = 1000, m: int = 1000, seed: int = 0):
    rng = make_rng(seed, 1)
    X = gaussian_sample(GaussianSpec(np.zeros(3), FIG1A_COV_X), n, rng)
    Y = gaussian_sample(GaussianSpec(np.zeros(3), FIG1A_COV_Y), m, rng)
    return X, Y


def wishart_blocks_dataset(ell: int, n: int = 100, m: int = 100, seed: int = 0,
                           df: int = 3):
    """Block-Wishart scenario: returns ``(X, Y, true_support)``.

    Block one gets independent covariance draws for X and Y; every later
    block shares one draw between the groups.
    """
    if ell < 1:
        raise ValueError("ell must be at least 1")
    rng = make_rng(seed, 2)
    d = 3 * ell
    cov_x = np.zeros((d, d))
    cov_y = np.zeros((d, d))
    cov_x[:3, :3] = wishart_identity(df, 3, rng)
    cov_y[:3, :3] = wishart_identity(df, 3, rng)
    for b in range(1, ell):
        W = wishart_identity(df, 3, rng)
        s = slice(3 * b, 3 * b + 3)
        cov_x[s, s] = W
        cov_y[s, s] = W
    X = gaussian_sample(GaussianSpec(np.zeros(d), cov_x), n, rng)
    Y = gaussian_sample(GaussianSpec(np.zeros(d), cov_y), m, rng)
    return X, Y, (0, 1, 2)


def scenario(spec: ScenarioSpec):
    """Generate ``(X, Y)`` for a scenario spec."""
    if spec.kind == "figure1a":
        return figure1a_dataset(spec.n, spec.m, spec.seed)
    if spec.kind == "wishart_blocks":
        X, Y, _ = wishart_blocks_dataset(spec.ell, spec.n, spec.m, spec.seed)
        return X, Y
    rng = make_rng(spec.seed, 3)
    d = spec.d
    base = GaussianSpec(np.zeros(d), spec.noise * np.eye(d))
    X = gaussian_sample(base, spec.n, rng)
    if spec.kind == "null_identical":
        return X, gaussian_sample(base, spec.m, rng)
    if spec.kind == "mean_shift":
        mu = np.zeros(d)
        shift = np.atleast_1d(np.asarray(spec.shift, dtype=float))
        if shift.size > d:
            raise ValueError("shift vector longer than d")
        mu[:shift.size] = shift
        return X, gaussian_sample(GaussianSpec(mu, base.covariance), spec.m, rng)
    scale = np.ones(d)
    scale[0] = spec.factor
    cov = base.covariance * scale
    return X, gaussian_sample(GaussianSpec(np.zeros(d), cov), spec.m, rng)
