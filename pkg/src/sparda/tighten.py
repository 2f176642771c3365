"""Projected gradient ascent on the nonconvex projected divergence.

Starting from the relaxation's direction, iterate

    beta <- topk(half_ball(beta + s_t * grad J(beta)))

with ``s_t = step0 / sqrt(t)``, keeping the best iterate.  Sorting of the
projected samples is warm-started from the previous iteration's order with
insertion sort, which is close to linear for small steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .relax import SolverError
from .wasserstein import (_check_dims, as_samples, canonical_sign,
                          gradient_from_order, wasserstein1d)


@dataclass
class TightenConfig:
    k: int | None = None  # None means no sparsity constraint (k = d)
    step0: float = 0.5
    max_iter: int = 5000
    tol: float = 1e-9
    stall: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.k is not None and self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k}")
        if self.step0 <= 0 or self.tol <= 0:
            raise ValueError("step0 and tol must be positive")
        if self.max_iter < 1 or self.stall < 1:
            raise ValueError("max_iter and stall must be positive integers")


@dataclass
class SortCache:
    """Sorting permutations of the projected X and Y samples."""

    x: np.ndarray
    y: np.ndarray
    swaps: int = 0


@dataclass
class TightenResult:
    beta: np.ndarray
    objective: float
    n_iter: int
    history: list = field(default_factory=list)


def project_half_ball(beta) -> np.ndarray:
    """Rescale onto the unit ball if needed, then apply the canonical sign.

    A zero vector is returned unchanged (degenerate; callers decide).
    """
    beta = np.asarray(beta, dtype=float)
    if not np.all(np.isfinite(beta)):
        raise ValueError("beta contains non-finite values")
    norm = np.linalg.norm(beta)
    if norm > 1.0:
        beta = beta / norm
    return canonical_sign(beta)


def truncate_topk(beta, k: int) -> np.ndarray:
    """Zero all but the ``k`` largest-magnitude entries (ties: lowest index)."""
    beta = np.asarray(beta, dtype=float)
    d = beta.size
    if not 1 <= k <= d:
        raise ValueError(f"k must lie in [1, {d}], got {k}")
    if k == d:
        return beta.copy()
    keep = np.argsort(-np.abs(beta), kind="stable")[:k]
    out = np.zeros_like(beta)
    out[keep] = beta[keep]
    return out


def insertion_sort(values: np.ndarray, order, budget: int | None = None
                   ) -> tuple[np.ndarray, int]:
    """Sort indices by ``(values[i], i)`` starting from a previous ``order``.

    Produces exactly the stable argsort of ``values``.  Returns the new order
    and the number of element moves; an already sorted order costs one
    vectorized pass.  Once the moves exceed ``budget`` (default ``n``)
    the input is far from sorted and a full stable sort finishes the job;
    the move count then reports the budget reached.
    """
    order = np.asarray(order, dtype=np.intp)
    vals = values[order]
    desc = (vals[1:] < vals[:-1]) | ((vals[1:] == vals[:-1])
                                     & (order[1:] < order[:-1]))
    if not desc.any():
        return order.copy(), 0
    start = int(np.argmax(desc)) + 1
    ordl = order.tolist()
    v = values.tolist()
    swaps = 0
    if budget is None:
        budget = len(ordl)
    for k in range(start, len(ordl)):
        if swaps > budget:
            return np.argsort(values, kind="stable"), swaps
        cur = ordl[k]
        cv = v[cur]
        p = k - 1
        while p >= 0:
            prev = ordl[p]
            pv = v[prev]
            if pv > cv or (pv == cv and prev > cur):
                ordl[p + 1] = prev
                p -= 1
                swaps += 1
            else:
                break
        ordl[p + 1] = cur
    return np.asarray(ordl, dtype=np.intp), swaps


def sorted_gradient_pass(X, Y, beta, prev: SortCache | None = None):
    """Gradient of the projected divergence with an optional warm-started sort.

    Returns ``(gradient, cache)``; the gradient is identical to
    ``wasserstein.gradient`` because both sorts order by (value, index).
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    beta = np.asarray(beta, dtype=float)
    _check_dims(X, Y, beta)
    px, py = X @ beta, Y @ beta
    if prev is None:
        ox = np.argsort(px, kind="stable")
        oy = np.argsort(py, kind="stable")
        swaps = 0
    else:
        ox, sx = insertion_sort(px, prev.x)
        oy, sy = insertion_sort(py, prev.y)
        swaps = sx + sy
    g = gradient_from_order(X, Y, px, py, ox, oy)
    return g, SortCache(ox, oy, swaps)


def _value(X, Y, beta):
    return wasserstein1d(X @ beta, Y @ beta)


def tighten(X, Y, beta0, config: TightenConfig | None = None) -> TightenResult:
    """Projected gradient ascent from ``beta0`` over the sparse unit half-ball.

    The returned direction is the best iterate visited (objective evaluated
    after projection), so its value is never below that of the projected
    starting point.  Iterates are tracked without sign canonicalization, which
    leaves the objective and the trajectory unchanged since the objective is
    even and its gradient odd in ``beta``; only the returned vector is
    canonicalized.
    """
    config = config or TightenConfig()
    X = as_samples(X, "X")
    Y = as_samples(Y, "Y")
    beta0 = np.asarray(beta0, dtype=float)
    _check_dims(X, Y, beta0)
    d = X.shape[1]
    k = d if config.k is None else min(config.k, d)
    if not np.any(beta0):
        raise SolverError("tighten needs a nonzero starting direction")

    beta = truncate_topk(_shrink(beta0), k)
    best_beta, best = beta, _value(X, Y, beta)
    history = [best]
    cache = None
    stalled = 0
    t = 0
    for t in range(1, config.max_iter + 1):
        g, cache = sorted_gradient_pass(X, Y, beta, cache)
        cand = truncate_topk(_shrink(beta + (config.step0 / math.sqrt(t)) * g), k)
        if not np.any(cand):
            raise SolverError(f"tightening iterate collapsed to zero at step {t}")
        val = _value(X, Y, cand)
        if val > best + config.tol:
            stalled = 0
        else:
            stalled += 1
        if val > best:
            best, best_beta = val, cand
        history.append(val)
        beta = cand
        if stalled >= config.stall:
            break
    return TightenResult(canonical_sign(best_beta), best, t, history)


def _shrink(beta: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(beta)
    return beta / norm if norm > 1.0 else beta
