"""One-step-ahead LSTM forecaster trained on mean squared error."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .nn import (
    TrainConfig,
    fit_network,
    init_stack_weights,
    linear_head_weights,
    sliding_windows,
    stack_forward,
)


@dataclass
class LstmParams:
    """A trained stack plus its linear output map, keyed by name."""

    layers: tuple[int, ...]
    input_dim: int
    weights: dict[str, np.ndarray]


def init_lstm_params(
    layers: tuple[int, ...], input_dim: int, output_dim: int, seed: int = 0
) -> LstmParams:
    """Fresh parameters: gates then the output head, one seeded stream."""
    rng = np.random.default_rng(seed)
    weights = init_stack_weights(rng, input_dim, tuple(layers))
    v, b = linear_head_weights(rng, layers[-1], output_dim)
    weights["head.V"] = v
    weights["head.b"] = b
    return LstmParams(layers=tuple(layers), input_dim=input_dim, weights=weights)


def lstm_forward(params: LstmParams, sequence: np.ndarray) -> np.ndarray:
    """Map one (seq_len, input_dim) window to the next-step vector."""
    seq = np.asarray(sequence, dtype=float)
    if seq.ndim != 2 or seq.shape[1] != params.input_dim:
        raise ValueError(f"expected a (steps, {params.input_dim}) sequence")
    h_last, _ = stack_forward(params.weights, params.layers, seq[None])
    out = h_last @ params.weights["head.V"] + params.weights["head.b"]
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite forecaster output")
    return out[0]


def _mse_loss(weights, h_last, y, want_grads):
    pred = h_last @ weights["head.V"] + weights["head.b"]
    err = pred - y
    loss = float(np.mean(err * err))
    if not want_grads:
        return loss, None, None
    d_pred = 2.0 * err / err.size
    head_grads = {
        "head.V": h_last.T @ d_pred,
        "head.b": d_pred.sum(axis=0),
    }
    return loss, d_pred @ weights["head.V"].T, head_grads


class LstmForecaster:
    """Trains a fresh network per fit; forecasts one step from the tail.

    Deterministic for a given (seed, data, config): weight init, batch
    shuffling and the ADAM trajectory all come from one seeded generator.
    """

    def __init__(self, cfg: TrainConfig):
        self.cfg = cfg
        self.params: Optional[LstmParams] = None
        self.train_losses: list[float] = []
        self.val_losses: list[float] = []
        self._tail: Optional[np.ndarray] = None

    def fit(self, values: np.ndarray) -> "LstmForecaster":
        values = np.asarray(values, dtype=float)
        cfg = self.cfg
        rng = np.random.default_rng(cfg.seed)
        m = values.shape[1]
        weights = init_stack_weights(rng, m, cfg.hidden)
        v, b = linear_head_weights(rng, cfg.hidden[-1], m)
        weights["head.V"] = v
        weights["head.b"] = b
        x, y = sliding_windows(values, cfg.seq_len)
        self.train_losses, self.val_losses = fit_network(
            weights, cfg.hidden, x, y, cfg, rng, _mse_loss
        )
        self.params = LstmParams(layers=cfg.hidden, input_dim=m, weights=weights)
        self._tail = values[-cfg.seq_len :]
        return self

    def forecast(self, values: Optional[np.ndarray] = None) -> np.ndarray:
        if self.params is None:
            raise RuntimeError("fit() must run before forecast()")
        tail = (
            np.asarray(values, dtype=float)[-self.cfg.seq_len :]
            if values is not None
            else self._tail
        )
        return lstm_forward(self.params, tail)


def lstm_train(values: np.ndarray, cfg: TrainConfig) -> LstmForecaster:
    """Convenience wrapper: fit a forecaster on a factor series."""
    return LstmForecaster(cfg).fit(values)
