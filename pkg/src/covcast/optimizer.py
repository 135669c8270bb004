"""Long-only minimum-variance weights on the unit simplex.

The objective is ``w @ sigma @ w + cost_rate * sum(|w - prev|)``; the L1
term charges proportional commissions on turnover away from the previous
weights. Minimization runs projected (sub)gradient descent with Euclidean
projection onto the simplex, diminishing steps, and best-point tracking,
which stays correct on the kinks the L1 term introduces (the subgradient of
``|x|`` at 0 is taken as 0).
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from .errors import OptimizationError

DEFAULT_COST_RATE = 0.005


def mean_historical_returns(returns: np.ndarray) -> np.ndarray:
    """Column means of a returns window; the expected-return proxy."""
    r = np.asarray(returns, dtype=float)
    if r.ndim != 2 or r.shape[0] < 1:
        raise ValueError("returns window must be a non-empty 2-d array")
    return r.mean(axis=0)


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {w : w >= 0, sum(w) = 1}.

    Sort-based O(n log n) algorithm; exact up to float rounding.
    """
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, v.size + 1)
    cond = u + (1.0 - css) / k > 0
    rho = np.nonzero(cond)[0][-1]
    theta = (1.0 - css[rho]) / (rho + 1.0)
    return np.maximum(v + theta, 0.0)


def min_variance(
    sigma: np.ndarray,
    prev: Optional[np.ndarray] = None,
    cost_rate: Optional[float] = None,
    max_iter: int = 10_000,
    stall_iters: int = 50,
    stall_tol: float = 1e-12,
) -> np.ndarray:
    """Minimum-variance weights, optionally penalizing turnover from ``prev``.

    ``cost_rate`` defaults to 0.005 when ``prev`` is given and 0 otherwise.
    Iteration stops at ``max_iter`` or once the best objective has not
    improved by ``stall_tol`` for ``stall_iters`` consecutive steps; the best
    point visited is returned.
    """
    s = np.asarray(sigma, dtype=float)
    n = s.shape[0]
    if s.shape != (n, n) or not np.all(np.isfinite(s)):
        raise OptimizationError("covariance matrix must be square and finite")
    if prev is not None:
        prev = np.asarray(prev, dtype=float)
        if prev.shape != (n,):
            raise OptimizationError("prev weights have the wrong length")
    if cost_rate is None:
        cost_rate = DEFAULT_COST_RATE if prev is not None else 0.0
    if cost_rate < 0:
        raise OptimizationError("cost_rate must be non-negative")

    def objective(w: np.ndarray) -> float:
        val = float(w @ s @ w)
        if cost_rate > 0 and prev is not None:
            val += cost_rate * float(np.abs(w - prev).sum())
        return val

    # Lipschitz constant of the smooth part sets the base step.
    lam_max = float(np.max(np.abs(np.linalg.eigvalsh((s + s.T) / 2.0))))
    base_step = 1.0 / (2.0 * lam_max + 1e-12)

    w = np.full(n, 1.0 / n)
    best_w, best_obj = w.copy(), objective(w)
    if prev is not None:
        w_prev = project_to_simplex(prev)
        obj_prev = objective(w_prev)
        if obj_prev < best_obj:
            best_w, best_obj = w_prev, obj_prev

    stall = 0
    for k in range(max_iter):
        grad = 2.0 * (s @ w)
        if cost_rate > 0 and prev is not None:
            grad = grad + cost_rate * np.sign(w - prev)
        step = base_step / np.sqrt(1.0 + k / 200.0)
        w = project_to_simplex(w - step * grad)
        obj = objective(w)
        if obj < best_obj - stall_tol:
            best_w, best_obj = w.copy(), obj
            stall = 0
        else:
            stall += 1
            if stall >= stall_iters:
                break

    if abs(best_w.sum() - 1.0) > 1e-9 or np.any(best_w < -1e-12):
        raise OptimizationError("projection failed to produce simplex weights")
    return np.maximum(best_w, 0.0)
