"""Synthetic stock/crypto market generator for tests and demos.

Returns follow a two-state volatility regime with sticky transitions (the
regime persists for weeks at a time), a market-wide factor, and one factor
per asset class, so rolling covariance matrices drift slowly enough to be
forecastable. Stocks skip weekend quotes to exercise the fill-forward path;
market caps are price times a fixed share count and quoted every day so any
calendar day can host a rebalance.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

REGIME_PERSISTENCE = 0.97
HIGH_VOL_MULTIPLIER = 2.4


@dataclass(frozen=True)
class SyntheticMarket:
    prices: pd.DataFrame  # with weekend gaps for stocks
    caps: pd.DataFrame
    classes: pd.DataFrame  # columns: ticker, class


def generate_synthetic_market(
    n_stock: int = 3,
    n_crypto: int = 3,
    n_days: int = 600,
    seed: int = 0,
    start: str = "2021-01-01",
) -> SyntheticMarket:
    rng = np.random.default_rng(seed)
    dates = pd.date_range(start, periods=n_days, freq="D")
    n = n_stock + n_crypto
    tickers = [f"ST{i + 1}" for i in range(n_stock)] + [
        f"CR{i + 1}" for i in range(n_crypto)
    ]
    classes = ["stock"] * n_stock + ["crypto"] * n_crypto

    base_vol = np.concatenate(
        [
            0.009 + 0.004 * np.arange(n_stock),
            0.035 + 0.012 * np.arange(n_crypto),
        ]
    )
    drift = np.concatenate(
        [np.full(n_stock, 4e-4), np.full(n_crypto, 8e-4)]
    )
    market_beta = rng.uniform(0.3, 0.7, size=n)
    class_beta = rng.uniform(0.3, 0.8, size=n)

    regime = np.empty(n_days, dtype=int)
    regime[0] = 0
    flips = rng.uniform(size=n_days)
    for t in range(1, n_days):
        regime[t] = regime[t - 1] if flips[t] < REGIME_PERSISTENCE else 1 - regime[t - 1]
    vol_mult = np.where(regime == 1, HIGH_VOL_MULTIPLIER, 1.0)

    market = rng.standard_normal(n_days)
    class_factor = {
        "stock": rng.standard_normal(n_days),
        "crypto": rng.standard_normal(n_days),
    }
    idio = rng.standard_normal((n_days, n))

    log_returns = np.empty((n_days, n))
    for j in range(n):
        shock = (
            market_beta[j] * market
            + class_beta[j] * class_factor[classes[j]]
            + np.sqrt(max(1.0 - market_beta[j] ** 2 - class_beta[j] ** 2, 0.05))
            * idio[:, j]
        )
        log_returns[:, j] = drift[j] + base_vol[j] * vol_mult * shock

    start_prices = np.concatenate(
        [
            rng.uniform(40, 400, size=n_stock),
            np.exp(rng.uniform(np.log(0.5), np.log(30_000), size=n_crypto)),
        ]
    )
    prices = start_prices * np.exp(np.cumsum(log_returns, axis=0))
    price_frame = pd.DataFrame(prices, index=dates, columns=tickers)

    share_count = rng.uniform(1e6, 5e7, size=n)
    caps_frame = price_frame * share_count

    weekend = price_frame.index.dayofweek >= 5
    for j in range(n_stock):
        price_frame.iloc[weekend, j] = np.nan

    classes_frame = pd.DataFrame({"ticker": tickers, "class": classes})
    return SyntheticMarket(prices=price_frame, caps=caps_frame, classes=classes_frame)


def write_synthetic_dataset(
    out_dir,
    n_stock: int = 3,
    n_crypto: int = 3,
    n_days: int = 600,
    seed: int = 0,
    start: str = "2021-01-01",
) -> dict[str, Path]:
    """Write prices.csv, caps.csv, classes.csv; returns the paths."""
    market = generate_synthetic_market(n_stock, n_crypto, n_days, seed, start)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "prices": out / "prices.csv",
        "caps": out / "caps.csv",
        "classes": out / "classes.csv",
    }
    market.prices.to_csv(paths["prices"], index_label="date", date_format="%Y-%m-%d")
    market.caps.to_csv(paths["caps"], index_label="date", date_format="%Y-%m-%d")
    market.classes.to_csv(paths["classes"], index=False)
    return paths
