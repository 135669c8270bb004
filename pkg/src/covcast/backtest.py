"""Rebalanced minimum-variance strategy simulation with commissions.

At every rebalance date the engine re-selects the asset universe by market
cap (restricted to assets with full lookback history), estimates or
forecasts the covariance matrix, optimizes long-only weights with a
turnover penalty, liquidates positions leaving the universe, and converts
weights into integer share orders. Between rebalances the portfolio is
marked to market daily. A fixed proportional commission is charged on
every share traded; affordability checks gross prices up by the commission
rate (and haircut held positions by it) so cash can never go negative.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np
import pandas as pd

from .allocator import greedy_allocate
from .cholpipe import build_factor_series, reconstruct
from .errors import InsufficientHistoryError
from .estimators import EstimatorKind, EstimatorSpec, estimate
from .forecasters import ForecasterSpec, fit_and_forecast
from .market_data import CapPanel, PricePanel, compute_returns, select_universe
from .metrics import MetricsBlock, compute_metrics
from .optimizer import mean_historical_returns, min_variance

ModelSpec = Union[EstimatorSpec, ForecasterSpec]


@dataclass(frozen=True)
class StrategySpec:
    """One backtest configuration.

    ``window`` counts trailing daily returns feeding the covariance
    estimate; ``rebalance`` is the calendar-day step between weight
    re-optimizations. For classical estimators the strategy window
    overrides the estimator's own; neural models hold out ``2 * window``
    validation targets per training run.
    """

    window: int
    rebalance: int
    model: ModelSpec
    initial_capital: float = 100_000.0
    commission: float = 0.005
    n_stock: int = 10
    n_crypto: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.window < 2:
            raise ValueError("window must be at least 2")
        if self.rebalance < 1:
            raise ValueError("rebalance period must be at least 1")
        if self.commission < 0:
            raise ValueError("commission must be non-negative")

    @property
    def family(self) -> str:
        return self.model.family


@dataclass(frozen=True)
class Trade:
    date: pd.Timestamp
    asset: str
    delta_shares: int
    price: float
    commission: float


@dataclass(frozen=True)
class RebalanceRecord:
    date: pd.Timestamp
    universe: tuple[str, ...]
    expected_returns: np.ndarray
    weights: np.ndarray


@dataclass
class BacktestReport:
    """Equity curve, trade log, metrics, and per-rebalance details."""

    spec: StrategySpec
    equity: pd.Series
    trades: list[Trade]
    metrics: MetricsBlock
    rebalances: list[RebalanceRecord]
    validation: Optional[pd.DataFrame] = None  # rebalance date x epoch losses

    @property
    def total_commission(self) -> float:
        return float(sum(t.commission for t in self.trades))


def required_returns(spec: StrategySpec) -> int:
    """Return observations needed before the first feasible rebalance."""
    if isinstance(spec.model, EstimatorSpec):
        extra = 1 if spec.model.kind == EstimatorKind.EWMA else 0
        return spec.window + extra
    if spec.model.kind == "Persistence":
        return spec.window + 1
    # factor series must hold seq_len inputs, 2*window validation targets,
    # and at least one training target
    return 3 * spec.window + spec.model.seq_len


def _portfolio_value(holdings: dict[str, int], price_row: pd.Series) -> float:
    return float(sum(q * price_row[a] for a, q in sorted(holdings.items()) if q))


def _covariance_forecast(
    spec: StrategySpec, returns: np.ndarray, seed: int
) -> tuple[np.ndarray, Optional[tuple[list[float], list[float]]]]:
    if isinstance(spec.model, EstimatorSpec):
        model = replace(spec.model, window=spec.window)
        return estimate(returns, model), None
    series = build_factor_series(returns, spec.window)
    forecast, train_losses, val_losses = fit_and_forecast(
        spec.model, series.values, seed=seed, validation_len=2 * spec.window
    )
    return reconstruct(forecast, series.n_assets), (train_losses, val_losses)


def run_backtest(panel: PricePanel, caps: CapPanel, spec: StrategySpec) -> BacktestReport:
    """Simulate the strategy over the full panel; see the module docstring."""
    dates = panel.dates
    req = required_returns(spec)
    if len(dates) <= req:
        raise InsufficientHistoryError(
            f"panel has {len(dates)} days, needs more than {req}"
        )
    prices = panel.prices
    marking_prices = prices.ffill()
    seed_root = np.random.SeedSequence(spec.seed)

    cash = float(spec.initial_capital)
    holdings: dict[str, int] = {}
    trades: list[Trade] = []
    rebalances: list[RebalanceRecord] = []
    validation_rows: list[dict] = []
    equity_dates: list[pd.Timestamp] = []
    equity_values: list[float] = []

    rebalance_indices = list(range(req, len(dates), spec.rebalance))
    for count, idx in enumerate(rebalance_indices):
        date = dates[idx]
        price_row = prices.iloc[idx]

        lookback = prices.iloc[idx - req : idx + 1]
        eligible = [a for a in panel.assets if not lookback[a].isna().any()]
        universe = select_universe(
            caps, date, spec.n_stock, spec.n_crypto, panel.asset_class, eligible
        )

        # Sell whatever no longer belongs to the universe.
        for asset in sorted(holdings):
            qty = holdings[asset]
            if qty and asset not in universe:
                px = float(marking_prices.iloc[idx][asset])
                fee = spec.commission * qty * px
                cash = cash - (-qty) * px - fee
                trades.append(Trade(date, asset, -qty, px, fee))
                holdings[asset] = 0

        # Common available history across the universe, up to this date.
        first_ok = max(prices[a].first_valid_index() for a in universe)
        history = compute_returns(panel, universe, start=first_ok, end=date)
        if isinstance(spec.model, EstimatorSpec) and spec.model.kind != EstimatorKind.EWMA:
            history = history.iloc[-spec.window :]
        child_seed = int(np.random.SeedSequence([spec.seed, count]).generate_state(1)[0])
        sigma, losses = _covariance_forecast(spec, history.to_numpy(), child_seed)
        if losses is not None:
            train_losses, val_losses = losses
            for epoch, (tr, vl) in enumerate(
                zip(train_losses, val_losses if val_losses else [np.nan] * len(train_losses))
            ):
                validation_rows.append(
                    {"rebalance_date": date, "epoch": epoch, "train_loss": tr, "val_loss": vl}
                )

        mu = mean_historical_returns(history.to_numpy()[-spec.window :])
        univ_prices = np.array([float(price_row[a]) for a in universe])
        current = np.array([float(holdings.get(a, 0)) for a in universe])
        held_value = current * univ_prices
        prev = held_value / held_value.sum() if held_value.sum() > 0 else None
        cost_rate = spec.commission if prev is not None else 0.0
        weights = min_variance(sigma, prev=prev, cost_rate=cost_rate)
        rebalances.append(RebalanceRecord(date, tuple(universe), mu, weights))

        capital = cash + float(held_value.sum()) * (1.0 - spec.commission)
        allocation = greedy_allocate(
            weights, univ_prices * (1.0 + spec.commission), capital
        )
        for j, asset in enumerate(universe):
            delta = int(allocation.shares[j]) - int(current[j])
            if delta:
                px = univ_prices[j]
                fee = spec.commission * abs(delta) * px
                cash = cash - delta * px - fee
                trades.append(Trade(date, asset, delta, px, fee))
                holdings[asset] = holdings.get(asset, 0) + delta
        if cash < -1e-6 * spec.initial_capital:
            raise RuntimeError(f"cash went negative at {date.date()}: {cash}")

        # Mark to market daily until the next rebalance (or the panel end).
        stop = rebalance_indices[count + 1] if count + 1 < len(rebalance_indices) else len(dates)
        for day in range(idx, stop):
            equity_dates.append(dates[day])
            equity_values.append(cash + _portfolio_value(holdings, marking_prices.iloc[day]))

    equity = pd.Series(equity_values, index=pd.DatetimeIndex(equity_dates), name="value")
    day_offsets = (equity.index - equity.index[0]).days.to_numpy(dtype=float)
    block = compute_metrics(equity.to_numpy(), day_offsets)
    validation = pd.DataFrame(validation_rows) if validation_rows else None
    return BacktestReport(
        spec=spec,
        equity=equity,
        trades=trades,
        metrics=block,
        rebalances=rebalances,
        validation=validation,
    )


def replay_trades(
    trades: list[Trade], initial_capital: float
) -> tuple[float, dict[str, int]]:
    """Re-run the trade log's cash arithmetic; returns (cash, holdings)."""
    cash = float(initial_capital)
    holdings: dict[str, int] = {}
    for t in trades:
        cash = cash - t.delta_shares * t.price - t.commission
        holdings[t.asset] = holdings.get(t.asset, 0) + t.delta_shares
    return cash, holdings
