"""Semidefinite relaxation of the projected-divergence problem.

The relaxation replaces ``beta beta^T`` by a trace-one PSD matrix ``B`` and
maximizes ``min_M tr(W_M B) - lam * ||B||_1``.  The inner matching problem is
dualized with potentials ``u`` (rows) and ``v`` (columns):

    (1/m) sum_ij min(0, c_ij - u_i - v_j) + mean(u) + mean(v) - lam ||B||_1

with pair costs ``c_ij = (x_i - y_j)^T B (x_i - y_j)``.  For ``n >= m`` the
``1/m`` weight is an exact penalty, so maximizing over ``(u, v)`` recovers the
matching value.  The solver takes projected supergradient steps in all three
blocks.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog

from .linalg import simplex_project, soft_threshold, symmetric_eigendecomposition
from .rng import make_rng
from .wasserstein import as_samples, canonical_sign, objective

logger = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Raised when an iterative solver diverges or produces non-finite values."""


@dataclass
class RelaxConfig:
    """Parameters of the relaxation solver.

    ``eta=None`` selects the dual step scale automatically from the data;
    see ``auto_eta``.  ``dual_init="auto"`` starts the potentials at their
    optimum for the initial matrix (``"sorted"``) for full steps and at zero
    for incremental steps, whose noisy dual updates would otherwise never
    catch up with the exact starting value.
    """

    lam: float = 0.0
    gamma: float = 0.1
    eta: float | None = None
    patience: int = 50
    max_iter: int = 2000
    dual_steps_per_B: int = 5
    incremental_batch: int | None = None
    seed: int = 0
    eig_method: str = "lapack"
    dual_init: str = "auto"
    gamma_schedule: str = "fixed"
    polish: bool = True
    log_every: int = 10

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lam must be nonnegative, got {self.lam}")
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.eta is not None and self.eta <= 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        for name in ("patience", "max_iter", "dual_steps_per_B", "log_every"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.incremental_batch is not None and self.incremental_batch < 1:
            raise ValueError("incremental_batch must be a positive integer")
        if self.gamma_schedule not in ("fixed", "sqrt"):
            raise ValueError(f"gamma_schedule must be 'fixed' or 'sqrt', "
                             f"got {self.gamma_schedule!r}")
        if self.dual_init not in ("auto", "sorted", "zero"):
            raise ValueError(f"dual_init must be 'auto', 'sorted' or 'zero', "
                             f"got {self.dual_init!r}")


@dataclass
class RelaxState:
    B: np.ndarray
    u: np.ndarray
    v: np.ndarray
    t: int = 0  # number of dual updates taken so far


@dataclass
class RelaxResult:
    B: np.ndarray
    beta: np.ndarray
    objective: float
    n_iter: int
    trace: list = field(default_factory=list)


def _check_pair(X, Y):
    X = as_samples(X, "X")
    Y = as_samples(Y, "Y")
    if X.shape[1] != Y.shape[1]:
        raise ValueError(
            f"sample sets have different dimensions: {X.shape[1]} vs {Y.shape[1]}")
    return X, Y


def pair_costs(B: np.ndarray, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """``c_ij = (x_i - y_j)^T B (x_i - y_j)`` for all pairs, shape (n, m).

    Only the symmetric part of ``B`` matters, so one cross product suffices.
    """
    B = 0.5 * (B + B.T)
    XB = X @ B
    qx = np.einsum("ij,ij->i", XB, X)
    qy = np.einsum("ij,ij->i", Y @ B, Y)
    return qx[:, None] + qy[None, :] - 2.0 * (XB @ Y.T)


def dual_value(B, u, v, X, Y, lam: float = 0.0, costs=None) -> float:
    """Penalized dual objective at ``(B, u, v)``."""
    X, Y = _check_pair(X, Y)
    B = np.asarray(B, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    n, m, d = X.shape[0], Y.shape[0], X.shape[1]
    if B.shape != (d, d) or u.shape != (n,) or v.shape != (m,):
        raise ValueError("inconsistent dimensions among B, u, v and the samples")
    if costs is None:
        costs = pair_costs(B, X, Y)
    slack = np.minimum(costs - u[:, None] - v[None, :], 0.0)
    return float(slack.sum() / m + u.mean() + v.mean() - lam * np.abs(B).sum())


def transport_value(costs) -> float:
    """Exact optimal transport cost between uniform weights for a cost matrix.

    Equal sizes reduce to an assignment problem; otherwise the transport LP
    is solved directly.
    """
    costs = np.asarray(costs, dtype=float)
    n, m = costs.shape
    if n == m:
        r, c = linear_sum_assignment(costs)
        return float(costs[r, c].sum() / n)
    A_eq = np.zeros((n + m, n * m))
    for i in range(n):
        A_eq[i, i * m:(i + 1) * m] = 1.0
    for j in range(m):
        A_eq[n + j, j::m] = 1.0
    b_eq = np.concatenate([np.full(n, 1.0 / n), np.full(m, 1.0 / m)])
    res = linprog(costs.ravel(), A_eq=A_eq, b_eq=b_eq, bounds=(0, None),
                  method="highs")
    if not res.success:
        raise SolverError(f"transport LP failed: {res.message}")
    return float(res.fun)


def matching_value(B, X, Y) -> float:
    """``min_M tr(W_M B)`` over matching matrices.

    Rank-one ``B`` uses the sorting shortcut; anything else solves the
    transport problem on the pair-cost matrix (desk-scale sizes only).
    """
    X, Y = _check_pair(X, Y)
    B = np.asarray(B, dtype=float)
    d = X.shape[1]
    if B.shape != (d, d):
        raise ValueError(f"B has shape {B.shape}, expected ({d}, {d})")
    Bs = 0.5 * (B + B.T)
    w, Q = np.linalg.eigh(Bs)
    top = np.argmax(np.abs(w))
    if w[top] >= 0 and np.allclose(Bs, w[top] * np.outer(Q[:, top], Q[:, top]),
                                   rtol=0.0, atol=1e-14 * max(1.0, abs(w[top]))):
        return objective(X, Y, math.sqrt(w[top]) * Q[:, top])
    return transport_value(pair_costs(Bs, X, Y))


def _active_statistics(active: np.ndarray, X, Y, weight: float):
    # sum over active pairs of z z^T, with z = x_i - y_j, times ``weight``
    a = active.sum(axis=1, dtype=float)
    b = active.sum(axis=0, dtype=float)
    cross = X.T @ (active.astype(float) @ Y)
    dB = (X.T * a) @ X + (Y.T * b) @ Y - cross - cross.T
    return a, b, weight * dB


def supergradient(B, u, v, X, Y, costs=None):
    """Supergradient ``(du, dv, dB)`` of the unpenalized dual at ``(B, u, v)``.

    Starts from ``du = 1/n``, ``dv = 1/m``, ``dB = 0`` and, for every pair
    with ``c_ij - u_i - v_j < 0``, subtracts ``1/m`` from ``du_i`` and
    ``dv_j`` and adds ``z_ij z_ij^T / m`` to ``dB``.
    """
    n, m = X.shape[0], Y.shape[0]
    if costs is None:
        costs = pair_costs(B, X, Y)
    active = costs - u[:, None] - v[None, :] < 0
    a, b, dB = _active_statistics(active, X, Y, 1.0 / m)
    du = 1.0 / n - a / m
    dv = 1.0 / m - b / m
    return du, dv, dB


def draw_pairs(rng: np.random.Generator, n: int, m: int, batch: int):
    """Uniform random (i, j) pairs, with replacement."""
    return rng.integers(0, n, size=batch), rng.integers(0, m, size=batch)


def incremental_supergradient(B, u, v, X, Y, pairs):
    """Unbiased estimate of ``supergradient`` from sampled pairs.

    Each sampled active pair contributes with weight ``n*m/batch`` so that the
    expectation over uniform sampling equals the full double loop.
    """
    n, m = X.shape[0], Y.shape[0]
    rows, cols = (np.asarray(p, dtype=np.intp) for p in pairs)
    batch = rows.size
    if batch == 0:
        raise ValueError("no pairs supplied")
    scale = n * m / batch
    Z = X[rows] - Y[cols]
    c = np.einsum("kd,de,ke->k", Z, B, Z)
    act = c - u[rows] - v[cols] < 0
    du = np.full(n, 1.0 / n)
    dv = np.full(m, 1.0 / m)
    np.subtract.at(du, rows[act], scale / m)
    np.subtract.at(dv, cols[act], scale / m)
    Za = Z[act]
    dB = (scale / m) * (Za.T @ Za)
    return du, dv, dB


def project_to_feasible(B, lam: float = 0.0, delta: float = 0.0,
                        eig_method: str = "lapack") -> np.ndarray:
    """Project onto trace-one PSD matrices, then soft-threshold by ``delta*lam``.

    The eigenvalues are replaced by their Euclidean projection onto the
    simplex.  The soft-threshold step may move the result slightly off the
    trace-one PSD set; only symmetry is restored afterwards.
    """
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {B.shape}")
    scale = max(1.0, np.abs(B).max(initial=0.0))
    if np.abs(B - B.T).max(initial=0.0) > 1e-8 * scale:
        raise ValueError("matrix is not symmetric")
    B = 0.5 * (B + B.T)
    Q, w = symmetric_eigendecomposition(B, method=eig_method)
    w = simplex_project(w)
    out = (Q * w) @ Q.T
    out = 0.5 * (out + out.T)
    if lam > 0 and delta > 0:
        out = soft_threshold(out, delta * lam)
    return out


def dominant_eigenvector(B, eig_method: str = "lapack") -> np.ndarray:
    """Unit eigenvector of the largest-magnitude eigenvalue, canonical sign."""
    Q, w = symmetric_eigendecomposition(0.5 * (B + B.T), method=eig_method)
    return canonical_sign(Q[:, np.argmax(np.abs(w))])


def auto_eta(B, X, Y) -> float:
    """Default dual step scale: the mean pair cost at ``B``.

    Adjacent sorted costs differ by about this scale over ``n``, which is the
    resolution the potentials need once they start near the optimum.
    """
    return max(float(pair_costs(B, X, Y).mean()), 1e-12)


def _staircase(n: int, m: int):
    # northwest-corner walk over an n-by-m grid; row masses m, column masses
    # n (units of 1/(nm)); a simultaneous exhaustion steps down, giving a
    # degenerate basic cell so the walk stays connected
    i = j = 0
    row, col = m, n
    cells = [(0, 0)]
    while (i, j) != (n - 1, m - 1):
        moved = min(row, col)
        row -= moved
        col -= moved
        if row == 0 and i < n - 1:
            i, row = i + 1, m
        else:
            j, col = j + 1, n
        cells.append((i, j))
    return cells


def sorted_duals(beta, X, Y):
    """Optimal dual potentials for the rank-one matrix ``beta beta^T``.

    With ``n >= m`` the projected costs form a Monge array over sorted ranks,
    so the potentials solved along the northwest-corner staircase basis
    (``u_i + v_j = c_ij`` on basic cells, ``u`` of the smallest x set to 0)
    are dual feasible and close the duality gap.
    """
    p, q = X @ beta, Y @ beta
    n, m = p.size, q.size
    ox = np.argsort(p, kind="stable")
    oy = np.argsort(q, kind="stable")
    ps, qs = p[ox], q[oy]
    us = np.empty(n)
    vs = np.empty(m)
    seen_u = np.zeros(n, dtype=bool)
    seen_v = np.zeros(m, dtype=bool)
    us[0], seen_u[0] = 0.0, True
    for i, j in _staircase(n, m):
        c = (ps[i] - qs[j]) ** 2
        if not seen_v[j]:
            vs[j], seen_v[j] = c - us[i], True
        elif not seen_u[i]:
            us[i], seen_u[i] = c - vs[j], True
    u = np.empty(n)
    v = np.empty(m)
    u[ox] = us
    v[oy] = vs
    return u, v


def initial_state(X, Y, dual_init: str = "sorted") -> RelaxState:
    """Start at the uniform direction; duals zero or solved by sorting."""
    d = X.shape[1]
    beta0 = np.full(d, math.sqrt(d) / d)
    if dual_init == "sorted" and X.shape[0] >= Y.shape[0]:
        u, v = sorted_duals(beta0, X, Y)
    else:
        u, v = np.zeros(X.shape[0]), np.zeros(Y.shape[0])
    return RelaxState(np.outer(beta0, beta0), u, v, 0)


def _apply(state: RelaxState, du, dv, dB, eta: float, config: RelaxConfig,
           update_B: bool = True, b_iter: int = 1) -> RelaxState:
    t = state.t + 1
    step = eta / math.sqrt(t)
    u = state.u + step * du
    v = state.v + step * dv
    B = state.B
    if update_B:
        norm = float(np.linalg.norm(dB))
        if norm > 0:
            gamma = config.gamma
            if config.gamma_schedule == "sqrt":
                gamma /= math.sqrt(b_iter)
            delta = gamma / norm
            B = project_to_feasible(B + delta * dB, config.lam, delta,
                                    config.eig_method)
    return RelaxState(B, u, v, t)


def dual_step(state: RelaxState, X, Y, eta: float, costs=None) -> RelaxState:
    """Supergradient step in ``(u, v)`` only, keeping ``B`` fixed."""
    n, m = X.shape[0], Y.shape[0]
    if costs is None:
        costs = pair_costs(state.B, X, Y)
    active = costs - state.u[:, None] - state.v[None, :] < 0
    du = 1.0 / n - active.sum(axis=1) / m
    dv = 1.0 / m - active.sum(axis=0) / m
    t = state.t + 1
    step = eta / math.sqrt(t)
    return RelaxState(state.B, state.u + step * du, state.v + step * dv, t)


def dual_ascent(B, X, Y, steps: int = 10_000, eta: float | None = None,
                u=None, v=None):
    """Maximize the dual over ``(u, v)`` with ``B`` held fixed.

    Returns the best ``(u, v)`` visited and its dual value (unpenalized).
    For ``n >= m`` the value approaches ``matching_value(B)``.
    """
    X, Y = _check_pair(X, Y)
    B = np.asarray(B, dtype=float)
    costs = pair_costs(B, X, Y)
    if eta is None:
        eta = max(float(costs.mean()), 1e-12)
    u = np.zeros(X.shape[0]) if u is None else np.asarray(u, dtype=float)
    v = np.zeros(Y.shape[0]) if v is None else np.asarray(v, dtype=float)
    state = RelaxState(B, u, v, 0)
    best = dual_value(B, u, v, X, Y, 0.0, costs)
    best_uv = (u, v)
    for _ in range(steps):
        state = dual_step(state, X, Y, eta, costs)
        val = dual_value(B, state.u, state.v, X, Y, 0.0, costs)
        if val > best:
            best, best_uv = val, (state.u, state.v)
    return best_uv[0], best_uv[1], best


def c_transform(costs, u, v):
    """Exact maximization of the dual in ``v`` given ``u``, then in ``u`` given ``v``.

    For ``n >= m`` the maximizers are ``v_j = min_i (c_ij - u_i)`` and
    ``u_i = min_j (c_ij - v_j)``; neither update can lower the dual value.
    """
    v = np.min(costs - u[:, None], axis=0)
    u = np.min(costs - v[None, :], axis=1)
    return u, v


def supergradient_step(state: RelaxState, X, Y, config: RelaxConfig,
                       eta: float | None = None, b_iter: int = 1,
                       costs=None) -> RelaxState:
    """One full step: dual ascent in ``(u, v)`` and a projected step in ``B``.

    The B-step has Frobenius length ``gamma`` before projection and is
    skipped when the B-supergradient vanishes.
    """
    if eta is None:
        eta = config.eta if config.eta is not None else auto_eta(state.B, X, Y)
    du, dv, dB = supergradient(state.B, state.u, state.v, X, Y, costs)
    return _apply(state, du, dv, dB, eta, config, b_iter=b_iter)


def incremental_step(state: RelaxState, X, Y, config: RelaxConfig,
                     rng: np.random.Generator, eta: float | None = None,
                     b_iter: int = 1) -> RelaxState:
    """As ``supergradient_step`` but from ``config.incremental_batch`` random pairs."""
    if config.incremental_batch is None:
        raise ValueError("incremental_step requires config.incremental_batch")
    if eta is None:
        eta = config.eta if config.eta is not None else auto_eta(state.B, X, Y)
    pairs = draw_pairs(rng, X.shape[0], Y.shape[0], config.incremental_batch)
    du, dv, dB = incremental_supergradient(state.B, state.u, state.v, X, Y, pairs)
    return _apply(state, du, dv, dB, eta, config, b_iter=b_iter)


def relax_solve(X, Y, config: RelaxConfig | None = None) -> RelaxResult:
    """Projected supergradient ascent on the dualized relaxation.

    Each iteration takes ``dual_steps_per_B - 1`` dual-only steps followed by
    one joint step.  Iteration stops once ``patience`` consecutive iterations
    fail to improve the penalized dual value, or after ``max_iter``.

    Returns
    -------
    RelaxResult
        The best matrix seen, its dominant eigenvector (by eigenvalue
        magnitude, canonical sign), the best dual value and a log with one
        entry every ``log_every`` iterations.
    """
    config = config or RelaxConfig()
    X, Y = _check_pair(X, Y)
    if X.shape[0] < Y.shape[0]:
        X, Y = Y, X
    init = config.dual_init
    if init == "auto":
        init = "zero" if config.incremental_batch else "sorted"
    state = initial_state(X, Y, init)
    eta = config.eta if config.eta is not None else auto_eta(state.B, X, Y)
    rng = make_rng(config.seed) if config.incremental_batch else None

    costs = pair_costs(state.B, X, Y)
    best = dual_value(state.B, state.u, state.v, X, Y, config.lam, costs)
    best_B = state.B
    since = 0
    trace = [{"iter": 0, "dual": best, "best": best}]
    it = 0
    for it in range(1, config.max_iter + 1):
        if config.incremental_batch:
            for _ in range(config.dual_steps_per_B - 1):
                pairs = draw_pairs(rng, X.shape[0], Y.shape[0],
                                   config.incremental_batch)
                du, dv, dB = incremental_supergradient(
                    state.B, state.u, state.v, X, Y, pairs)
                state = _apply(state, du, dv, dB, eta, config, update_B=False)
            state = incremental_step(state, X, Y, config, rng, eta, it)
        else:
            for _ in range(config.dual_steps_per_B - 1):
                state = dual_step(state, X, Y, eta, costs)
            state = supergradient_step(state, X, Y, config, eta, it, costs)
        costs = pair_costs(state.B, X, Y)
        u, v = state.u, state.v
        if config.polish:
            u, v = c_transform(costs, u, v)
        val = dual_value(state.B, u, v, X, Y, config.lam, costs)
        if not math.isfinite(val):
            raise SolverError(
                f"non-finite dual value at iteration {it}; reduce gamma/eta")
        if val > best:
            best, best_B, since = val, state.B, 0
        else:
            since += 1
        if it % config.log_every == 0:
            trace.append({"iter": it, "dual": val, "best": best})
        if since >= config.patience:
            break

    logger.debug("relax_solve stopped after %d iterations, best dual %.6g",
                 it, best)
    beta = dominant_eigenvector(best_B, config.eig_method)
    return RelaxResult(best_B.copy(), beta, best, it, trace)


def with_overrides(config: RelaxConfig, **kw) -> RelaxConfig:
    return replace(config, **{k: v for k, v in kw.items() if v is not None})
