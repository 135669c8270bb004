"""Two-stage greedy conversion of target weights into integer share counts.

Stage one buys ``floor(weight * capital / price)`` shares of every asset.
Stage two repeatedly buys one share of the affordable asset whose portfolio
share falls furthest below target, until no under-weighted asset is
affordable. The loop never buys assets already at or above target, so all
remaining cash stays in the account.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Allocation:
    """Integer share counts plus the cash that could not be invested."""

    shares: np.ndarray  # non-negative ints, one per asset
    leftover_cash: float


def greedy_allocate(
    weights: np.ndarray, prices: np.ndarray, capital: float
) -> Allocation:
    """Allocate ``capital`` across assets at ``prices`` toward ``weights``.

    Accounting identity: ``shares @ prices + leftover_cash == capital`` up to
    float rounding. Deficit ties are broken by lower asset index.
    """
    w = np.asarray(weights, dtype=float)
    p = np.asarray(prices, dtype=float)
    if w.shape != p.shape or w.ndim != 1:
        raise ValueError("weights and prices must be 1-d and the same length")
    if np.any(p <= 0) or not np.all(np.isfinite(p)):
        raise ValueError("prices must be positive and finite")
    if capital < 0:
        raise ValueError("capital must be non-negative")

    shares = np.array([math.floor(wi * capital / pi) for wi, pi in zip(w, p)], dtype=np.int64)
    leftover = capital - float(shares @ p)
    # Float noise in the floor argument can overshoot by one share; undo it.
    while leftover < 0 and shares.sum() > 0:
        idx = int(np.argmax(np.where(shares > 0, p, -np.inf)))
        shares[idx] -= 1
        leftover = capital - float(shares @ p)

    if capital > 0:
        while True:
            deficits = w - (shares * p) / capital
            buyable = (p <= leftover) & (deficits > 0)
            if not np.any(buyable):
                break
            idx = int(np.argmax(np.where(buyable, deficits, -np.inf)))
            shares[idx] += 1
            leftover -= p[idx]

    return Allocation(shares=shares, leftover_cash=capital - float(shares @ p))
