import numpy as np
import pandas as pd
import pytest

from covcast.backtest import (
    StrategySpec,
    replay_trades,
    required_returns,
    run_backtest,
)
from covcast.errors import InsufficientHistoryError
from covcast.estimators import EstimatorKind, EstimatorSpec
from covcast.forecasters import ForecasterSpec
from covcast.market_data import CapPanel, PricePanel


def flat_panel(n_assets=2, n_days=120, price=10.0):
    dates = pd.date_range("2021-01-01", periods=n_days, freq="D")
    tickers = [f"A{i}" for i in range(n_assets)]
    prices = pd.DataFrame(price, index=dates, columns=tickers)
    caps = pd.DataFrame(
        np.tile(np.arange(n_assets, 0, -1, dtype=float) * 1e6, (n_days, 1)),
        index=dates,
        columns=tickers,
    )
    classes = {t: "stock" for t in tickers}
    return PricePanel(prices=prices, asset_class=classes), CapPanel(caps=caps)


def sample_spec(**kw):
    defaults = dict(
        window=10,
        rebalance=30,
        model=EstimatorSpec(EstimatorKind.SAMPLE, 10),
        n_stock=2,
        n_crypto=0,
        seed=0,
    )
    defaults.update(kw)
    return StrategySpec(**defaults)


class TestFlatMarket:
    def test_constant_prices_zero_commission_constant_equity(self):
        panel, caps = flat_panel()
        report = run_backtest(panel, caps, sample_spec(commission=0.0))
        assert report.equity.to_numpy() == pytest.approx(
            report.spec.initial_capital, abs=1e-9
        )

    def test_commission_affordability_hand_trace(self):
        # one asset, price 10, capital 1000, 50 bps: 99 shares cost 990
        # plus 4.95 commission, leaving 5.05 cash
        panel, caps = flat_panel(n_assets=1, n_days=40)
        spec = sample_spec(
            window=10, rebalance=60, n_stock=1, initial_capital=1000.0, commission=0.005
        )
        report = run_backtest(panel, caps, spec)
        assert len(report.trades) == 1
        trade = report.trades[0]
        assert trade.delta_shares == 99
        assert trade.commission == pytest.approx(4.95)
        assert report.equity.iloc[-1] == pytest.approx(1000.0 - 4.95, abs=1e-9)
        cash, holdings = replay_trades(report.trades, 1000.0)
        assert cash == pytest.approx(5.05, abs=1e-9)
        assert holdings["A0"] == 99


@pytest.fixture(scope="module")
def synth_report(synth_panel, synth_caps):
    spec = StrategySpec(
        window=30,
        rebalance=30,
        model=EstimatorSpec(EstimatorKind.SAMPLE, 30),
        n_stock=3,
        n_crypto=3,
        seed=7,
    )
    return run_backtest(synth_panel, synth_caps, spec)


class TestAccounting:
    def test_daily_identity(self, synth_report, synth_panel):
        spec = synth_report.spec
        marking = synth_panel.prices.ffill()
        holdings: dict[str, int] = {}
        cash = spec.initial_capital
        trades_by_date: dict = {}
        for t in synth_report.trades:
            trades_by_date.setdefault(t.date, []).append(t)
        for date, value in synth_report.equity.items():
            for t in trades_by_date.get(date, []):
                cash = cash - t.delta_shares * t.price - t.commission
                holdings[t.asset] = holdings.get(t.asset, 0) + t.delta_shares
            row = marking.loc[date]
            mark = cash + sum(q * row[a] for a, q in sorted(holdings.items()) if q)
            assert abs(mark - value) <= 1e-9 * spec.initial_capital
            assert cash >= -1e-9 * spec.initial_capital

    def test_commission_ledger_exact(self, synth_report):
        for t in synth_report.trades:
            assert t.commission == 0.005 * abs(t.delta_shares) * t.price
        total = sum(0.005 * abs(t.delta_shares) * t.price for t in synth_report.trades)
        assert synth_report.total_commission == total

    def test_replay_reproduces_final_equity(self, synth_report, synth_panel):
        cash, holdings = replay_trades(synth_report.trades, synth_report.spec.initial_capital)
        last = synth_panel.prices.ffill().iloc[-1]
        value = cash + sum(q * last[a] for a, q in sorted(holdings.items()) if q)
        assert value == synth_report.equity.iloc[-1]

    def test_equity_positive_and_metrics_populated(self, synth_report):
        assert (synth_report.equity > 0).all()
        row = synth_report.metrics.as_row()
        assert np.isfinite(row["aRC"]) and np.isfinite(row["aSD"])

    def test_rebalance_calendar_step(self, synth_report, synth_panel):
        spec = synth_report.spec
        dates = [r.date for r in synth_report.rebalances]
        anchor = synth_panel.dates[required_returns(spec)]
        assert dates[0] == anchor
        steps = np.diff([d.value for d in dates]) / 86_400_000_000_000
        assert set(steps.astype(int)) == {spec.rebalance}


class TestNoLeakage:
    def test_buy_and_hold_between_rebalances(self, synth_panel, synth_caps):
        spec = StrategySpec(
            window=20,
            rebalance=40,
            model=ForecasterSpec(kind="Persistence"),
            n_stock=3,
            n_crypto=3,
            commission=0.0,
            seed=3,
        )
        report = run_backtest(synth_panel, synth_caps, spec)
        marking = synth_panel.prices.ffill()
        trades_by_date: dict = {}
        for t in report.trades:
            trades_by_date.setdefault(t.date, []).append(t)
        cash = spec.initial_capital
        holdings: dict[str, int] = {}
        previous_mark = None
        for date, value in report.equity.items():
            if date in trades_by_date:
                if previous_mark is not None:
                    # equity just before trading equals the marked b&h value
                    row = marking.loc[date]
                    pre = cash + sum(q * row[a] for a, q in sorted(holdings.items()) if q)
                    assert abs(pre - value) <= 1e-9 * spec.initial_capital
                for t in trades_by_date[date]:
                    cash = cash - t.delta_shares * t.price - t.commission
                    holdings[t.asset] = holdings.get(t.asset, 0) + t.delta_shares
            previous_mark = value


class TestDeterminismAndErrors:
    def test_same_seed_identical_reports(self, synth_panel, synth_caps):
        spec = StrategySpec(
            window=30,
            rebalance=60,
            model=EstimatorSpec(EstimatorKind.EWMA, 30),
            n_stock=3,
            n_crypto=3,
            seed=11,
        )
        a = run_backtest(synth_panel, synth_caps, spec)
        b = run_backtest(synth_panel, synth_caps, spec)
        assert a.equity.equals(b.equity)
        assert a.trades == b.trades

    def test_neural_run_records_validation(self, synth_panel, synth_caps):
        spec = StrategySpec(
            window=30,
            rebalance=200,
            model=ForecasterSpec(kind="Lstm", hidden=(4,), seq_len=15, epochs=5, batch_size=8),
            n_stock=3,
            n_crypto=3,
            seed=5,
        )
        report = run_backtest(synth_panel, synth_caps, spec)
        assert report.validation is not None
        assert set(report.validation.columns) == {
            "rebalance_date", "epoch", "train_loss", "val_loss"
        }
        per_date = report.validation.groupby("rebalance_date").size()
        assert (per_date == 5).all()

    def test_insufficient_history_raises(self):
        panel, caps = flat_panel(n_days=9)
        with pytest.raises(InsufficientHistoryError):
            run_backtest(panel, caps, sample_spec(window=10))

    def test_required_returns_by_model(self):
        classical = sample_spec(window=30)
        assert required_returns(classical) == 30
        ewma = sample_spec(window=30, model=EstimatorSpec(EstimatorKind.EWMA, 30))
        assert required_returns(ewma) == 31
        lstm = sample_spec(
            window=30, model=ForecasterSpec(kind="Lstm", seq_len=15, epochs=1)
        )
        assert required_returns(lstm) == 105
        persist = sample_spec(window=30, model=ForecasterSpec(kind="Persistence"))
        assert required_returns(persist) == 31
