"""Covariance-matrix forecasting and minimum-variance portfolio backtesting.

The pipeline: load price/cap panels -> estimate or forecast the
variance-covariance matrix (classical estimators, or neural forecasts of
its Cholesky-factor series) -> optimize long-only minimum-variance weights
with transaction costs -> allocate integer shares greedily -> mark to
market and score with annualized-return / drawdown / information-ratio
measures.
"""

from .allocator import Allocation, greedy_allocate
from .backtest import (
    BacktestReport,
    RebalanceRecord,
    StrategySpec,
    Trade,
    replay_trades,
    required_returns,
    run_backtest,
)
from .cholpipe import (
    FactorSeries,
    build_factor_series,
    cholesky_factor,
    flatten_factor,
    lower_triangular_index_map,
    reconstruct,
)
from .errors import (
    CovcastError,
    DataError,
    IndefiniteMatrixError,
    InsufficientAssetsError,
    InsufficientHistoryError,
    OptimizationError,
    TrainingDivergedError,
)
from .estimators import (
    EstimatorKind,
    EstimatorSpec,
    estimate,
    ewma_cov,
    is_psd,
    oracle_approx,
    psd_repair,
    sample_cov,
    semi_cov,
    shrink,
)
from .forecasters import (
    DeepVarForecaster,
    ForecasterSpec,
    GpVarForecaster,
    LstmForecaster,
    ProbConfig,
    TrainConfig,
    fit_and_forecast,
    lstm_forward,
    persistence_forecast,
)
from .market_data import (
    CapPanel,
    PricePanel,
    compute_returns,
    fill_forward,
    load_cap_panel,
    load_class_map,
    load_price_panel,
    select_universe,
)
from .metrics import (
    MetricsBlock,
    annualized_return,
    annualized_stdev,
    compute_metrics,
    information_ratios,
    max_drawdown,
    max_loss_duration,
)
from .optimizer import mean_historical_returns, min_variance, project_to_simplex
from .synth import generate_synthetic_market, write_synthetic_dataset

__version__ = "0.1.0"
