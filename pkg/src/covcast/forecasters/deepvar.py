"""Probabilistic LSTM forecaster with per-series Gaussian heads.

The trunk is the shared LSTM stack; two linear heads emit a mean and a
softplus standard deviation per series (floored at 1e-6), trained by
Gaussian negative log-likelihood of the next observation. Forecasts are
per-entry medians over Monte Carlo draws from the predictive distribution.
Optional mean scaling divides each series by (1 + mean |value|) over the
training range and rescales the forecast.
"""
from __future__ import annotations

from typing import Optional

import numpy as np
from scipy.special import expit as sigmoid

from .nn import (
    ProbConfig,
    TrainConfig,
    fit_network,
    init_stack_weights,
    linear_head_weights,
    sliding_windows,
    stack_forward,
)

SIGMA_FLOOR = 1e-6
LOG_2PI = float(np.log(2.0 * np.pi))


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def mean_scale(train_rows: np.ndarray) -> np.ndarray:
    """Per-series divisor 1 + mean |value| over the training range."""
    return 1.0 + np.mean(np.abs(train_rows), axis=0)


def _gaussian_heads(weights, h_last):
    mu = h_last @ weights["head.V_mu"] + weights["head.b_mu"]
    raw = h_last @ weights["head.V_sigma"] + weights["head.b_sigma"]
    return mu, softplus(raw) + SIGMA_FLOOR, raw


def _nll_loss(weights, h_last, y, want_grads):
    mu, sig, raw = _gaussian_heads(weights, h_last)
    err = y - mu
    nll = 0.5 * LOG_2PI + np.log(sig) + 0.5 * err * err / (sig * sig)
    loss = float(np.mean(nll.sum(axis=1)))
    if not want_grads:
        return loss, None, None
    b = y.shape[0]
    d_mu = -err / (sig * sig) / b
    d_sig = (1.0 / sig - err * err / sig**3) / b
    d_raw = d_sig * sigmoid(raw)
    head_grads = {
        "head.V_mu": h_last.T @ d_mu,
        "head.b_mu": d_mu.sum(axis=0),
        "head.V_sigma": h_last.T @ d_raw,
        "head.b_sigma": d_raw.sum(axis=0),
    }
    d_h = d_mu @ weights["head.V_mu"].T + d_raw @ weights["head.V_sigma"].T
    return loss, d_h, head_grads


class DeepVarForecaster:
    """Joint multivariate input, independent Gaussian output per series."""

    def __init__(self, cfg: TrainConfig, prob: ProbConfig):
        self.cfg = cfg
        self.prob = prob
        self.weights: Optional[dict[str, np.ndarray]] = None
        self.train_losses: list[float] = []
        self.val_losses: list[float] = []
        self._scale: Optional[np.ndarray] = None
        self._tail: Optional[np.ndarray] = None
        self._rng: Optional[np.random.Generator] = None

    def fit(self, values: np.ndarray) -> "DeepVarForecaster":
        values = np.asarray(values, dtype=float)
        cfg = self.cfg
        m = values.shape[1]
        train_rows = values[: values.shape[0] - cfg.validation_len]
        self._scale = mean_scale(train_rows) if self.prob.scaling else np.ones(m)
        scaled = values / self._scale

        rng = np.random.default_rng(cfg.seed)
        weights = init_stack_weights(rng, m, cfg.hidden)
        for head in ("mu", "sigma"):
            v, b = linear_head_weights(rng, cfg.hidden[-1], m)
            weights[f"head.V_{head}"] = v
            weights[f"head.b_{head}"] = b
        x, y = sliding_windows(scaled, cfg.seq_len)
        self.train_losses, self.val_losses = fit_network(
            weights, cfg.hidden, x, y, cfg, rng, _nll_loss
        )
        self.weights = weights
        self._tail = scaled[-cfg.seq_len :]
        self._rng = rng
        return self

    def predictive_params(
        self, values: Optional[np.ndarray] = None
    ) -> tuple[np.ndarray, np.ndarray]:
        """Mean and stdev of the one-step distribution, in scaled space."""
        if self.weights is None:
            raise RuntimeError("fit() must run before forecasting")
        tail = (
            np.asarray(values, dtype=float)[-self.cfg.seq_len :] / self._scale
            if values is not None
            else self._tail
        )
        h_last, _ = stack_forward(self.weights, self.cfg.hidden, tail[None])
        mu, sig, _ = _gaussian_heads(self.weights, h_last)
        return mu[0], sig[0]

    def forecast(self, values: Optional[np.ndarray] = None) -> np.ndarray:
        mu, sig = self.predictive_params(values)
        draws = mu + sig * self._rng.standard_normal((self.prob.mc_samples, mu.size))
        return np.median(draws, axis=0) * self._scale


def deepvar_train(
    values: np.ndarray, cfg: TrainConfig, prob: ProbConfig
) -> DeepVarForecaster:
    return DeepVarForecaster(cfg, prob).fit(values)


def deepvar_forecast(model: DeepVarForecaster) -> np.ndarray:
    return model.forecast()
