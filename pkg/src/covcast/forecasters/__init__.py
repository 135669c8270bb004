"""One-step-ahead forecasting backends for Cholesky-factor series.

Three trainable backends (plain LSTM on squared error, LSTM with Gaussian
heads, and a low-rank Gaussian copula process) plus a persistence baseline.
``ForecasterSpec`` is the flat config record used by backtests and the CLI.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nn import (
    Adam,
    ProbConfig,
    TrainConfig,
    fit_network,
    init_stack_weights,
    linear_head_weights,
    load_weights,
    save_weights,
    sliding_windows,
    stack_backward,
    stack_forward,
)
from .lstm import LstmForecaster, LstmParams, init_lstm_params, lstm_forward, lstm_train
from .deepvar import DeepVarForecaster, deepvar_forecast, deepvar_train
from .gpvar import (
    EmpiricalNormalTransform,
    GpVarForecaster,
    gpvar_forecast,
    gpvar_train,
)

FORECASTER_KINDS = ("Lstm", "DeepVar", "GpVar", "Persistence")
_FAMILIES = {"Lstm": "LSTM", "DeepVar": "VAR", "GpVar": "GPVAR", "Persistence": "Persistence"}


def persistence_forecast(values: np.ndarray) -> np.ndarray:
    """Baseline: the next step equals the last observed row."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 2 or v.shape[0] < 1:
        raise ValueError("series must be a non-empty 2-d array")
    return v[-1].copy()


@dataclass(frozen=True)
class ForecasterSpec:
    """Config record for one forecasting backend.

    ``hidden`` lists LSTM layer sizes; the probabilistic backends follow the
    two-equal-layers convention, so give them e.g. ``(10, 10)``. Flags
    ``scaling``/``copula``/``low_rank`` only apply where they make sense.
    """

    kind: str
    hidden: tuple[int, ...] = (5,)
    seq_len: int = 15
    batch_size: int = 8
    epochs: int = 150
    learning_rate: float = 0.01
    scaling: bool = True
    copula: bool = True
    low_rank: bool = True
    rank: int = 2
    mc_samples: int = 100

    def __post_init__(self):
        if self.kind not in FORECASTER_KINDS:
            raise ValueError(f"unknown forecaster kind {self.kind!r}")

    @property
    def family(self) -> str:
        return _FAMILIES[self.kind]

    def train_config(self, seed: int, validation_len: int) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            seq_len=self.seq_len,
            hidden=tuple(self.hidden),
            seed=seed,
            validation_len=validation_len,
        )

    def prob_config(self) -> ProbConfig:
        return ProbConfig(
            scaling=self.scaling,
            copula=self.copula,
            low_rank=self.low_rank,
            rank=self.rank,
            mc_samples=self.mc_samples,
        )


def fit_and_forecast(
    spec: ForecasterSpec, values: np.ndarray, seed: int, validation_len: int
) -> tuple[np.ndarray, list[float], list[float]]:
    """Train a fresh model on ``values`` and forecast one step.

    Returns (forecast, train losses, validation losses); the persistence
    baseline trains nothing and has empty curves.
    """
    if spec.kind == "Persistence":
        return persistence_forecast(values), [], []
    cfg = spec.train_config(seed=seed, validation_len=validation_len)
    if spec.kind == "Lstm":
        model = LstmForecaster(cfg).fit(values)
    elif spec.kind == "DeepVar":
        model = DeepVarForecaster(cfg, spec.prob_config()).fit(values)
    else:
        model = GpVarForecaster(cfg, spec.prob_config()).fit(values)
    return model.forecast(), model.train_losses, model.val_losses
