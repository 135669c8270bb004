"""Copula-process forecaster with a shared LSTM unrolled per series.

Each series is optionally transformed to standard-normal marginals via the
empirical CDF composed with the inverse normal CDF (mid-ranks mapped to
(rank - 0.5) / n). One LSTM, shared across series, unrolls over each
series' own window to produce per-series states; linear heads on those
states parametrize a joint Gaussian over the next step with covariance
``diag(D) + V @ V.T`` (D via softplus, V an M x r head) or diagonal-only
when the low-rank head is disabled. Training minimizes the joint negative
log-likelihood; forecasting samples the joint Gaussian, inverts the copula
per series by empirical quantile interpolation, and takes per-entry
medians.
"""
from __future__ import annotations

import warnings
from typing import Optional

import numpy as np
from scipy.special import expit as sigmoid, ndtr, ndtri

from .deepvar import SIGMA_FLOOR, LOG_2PI, mean_scale, softplus
from .nn import (
    ProbConfig,
    TrainConfig,
    fit_network,
    init_stack_weights,
    linear_head_weights,
    sliding_windows,
    stack_forward,
)


class EmpiricalNormalTransform:
    """Per-series map to standard-normal marginals and back.

    Mid-rank probabilities are clipped to [0.5/n, 1 - 0.5/n] so values
    outside the fitted range stay finite; a constant series cannot define
    an empirical CDF, so its transform is bypassed with a warning.
    """

    def __init__(self, train_rows: np.ndarray):
        rows = np.asarray(train_rows, dtype=float)
        self.n = rows.shape[0]
        self._sorted: list[Optional[np.ndarray]] = []
        self._grid: list[Optional[tuple[np.ndarray, np.ndarray]]] = []
        for j in range(rows.shape[1]):
            col = np.sort(rows[:, j])
            if col[0] == col[-1]:
                warnings.warn(
                    f"series {j} is constant over the training range; "
                    "copula transform bypassed"
                )
                self._sorted.append(None)
                self._grid.append(None)
                continue
            uniq, counts = np.unique(col, return_counts=True)
            cum_less = np.concatenate(([0], np.cumsum(counts)[:-1]))
            mid_p = (cum_less + 0.5 * counts) / self.n
            self._sorted.append(col)
            self._grid.append((mid_p, uniq))

    @property
    def p_bounds(self) -> tuple[float, float]:
        return 0.5 / self.n, 1.0 - 0.5 / self.n

    def transform(self, values: np.ndarray) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        out = v.copy()
        lo, hi = self.p_bounds
        for j, col in enumerate(self._sorted):
            if col is None:
                continue
            x = v[..., j]
            less = np.searchsorted(col, x, side="left")
            leq = np.searchsorted(col, x, side="right")
            p = np.clip((less + 0.5 * (leq - less)) / self.n, lo, hi)
            out[..., j] = ndtri(p)
        return out

    def inverse(self, values: np.ndarray) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        out = v.copy()
        lo, hi = self.p_bounds
        for j, grid in enumerate(self._grid):
            if grid is None:
                continue
            mid_p, uniq = grid
            p = np.clip(ndtr(v[..., j]), lo, hi)
            out[..., j] = np.interp(p, mid_p, uniq)
        return out


def _per_series_batch(x: np.ndarray) -> np.ndarray:
    """(B, T, M) windows to (B*M, T, 1): each series unrolls on its own."""
    b, t, m = x.shape
    return np.transpose(x, (0, 2, 1)).reshape(b * m, t, 1)


def _joint_heads(weights, states):
    """Per-series heads on (B, M, H) states: mean, diag, low-rank factor."""
    mu = states @ weights["head.w_mu"][:, 0] + weights["head.b_mu"][0]
    d_raw = states @ weights["head.w_d"][:, 0] + weights["head.b_d"][0]
    diag = softplus(d_raw) + SIGMA_FLOOR
    if "head.W_v" in weights:
        factor = states @ weights["head.W_v"] + weights["head.b_v"]
    else:
        factor = np.zeros(states.shape[:2] + (0,))
    return mu, diag, d_raw, factor


def _joint_nll_loss(weights, h_last, y, want_grads):
    b, m = y.shape
    states = h_last.reshape(b, m, -1)
    mu, diag, d_raw, factor = _joint_heads(weights, states)
    cov = np.einsum("bir,bjr->bij", factor, factor)
    cov[:, np.arange(m), np.arange(m)] += diag
    chol = np.linalg.cholesky(cov)
    log_det = 2.0 * np.sum(np.log(np.diagonal(chol, axis1=1, axis2=2)), axis=1)
    err = y - mu
    alpha = np.linalg.solve(cov, err[..., None])[..., 0]
    nll = 0.5 * (m * LOG_2PI + log_det + np.sum(err * alpha, axis=1))
    loss = float(np.mean(nll))
    if not want_grads:
        return loss, None, None

    inv = np.linalg.inv(cov)
    g_cov = 0.5 * (inv - np.einsum("bi,bj->bij", alpha, alpha)) / b
    d_mu = -alpha / b
    d_raw_grad = np.diagonal(g_cov, axis1=1, axis2=2) * sigmoid(d_raw)
    d_factor = 2.0 * np.einsum("bij,bjr->bir", g_cov, factor)

    d_states = (
        d_mu[..., None] * weights["head.w_mu"][:, 0]
        + d_raw_grad[..., None] * weights["head.w_d"][:, 0]
    )
    head_grads = {
        "head.w_mu": np.einsum("bmh,bm->h", states, d_mu)[:, None],
        "head.b_mu": np.array([d_mu.sum()]),
        "head.w_d": np.einsum("bmh,bm->h", states, d_raw_grad)[:, None],
        "head.b_d": np.array([d_raw_grad.sum()]),
    }
    if "head.W_v" in weights:
        d_states = d_states + d_factor @ weights["head.W_v"].T
        head_grads["head.W_v"] = np.einsum("bmh,bmr->hr", states, d_factor)
        head_grads["head.b_v"] = d_factor.sum(axis=(0, 1))
    return loss, d_states.reshape(b * m, -1), head_grads


class GpVarForecaster:
    """Joint Gaussian over copula-transformed series, shared-trunk LSTM."""

    def __init__(self, cfg: TrainConfig, prob: ProbConfig):
        self.cfg = cfg
        self.prob = prob
        self.weights: Optional[dict[str, np.ndarray]] = None
        self.train_losses: list[float] = []
        self.val_losses: list[float] = []
        self._scale: Optional[np.ndarray] = None
        self._copula: Optional[EmpiricalNormalTransform] = None
        self._tail: Optional[np.ndarray] = None
        self._rng: Optional[np.random.Generator] = None

    @property
    def effective_rank(self) -> int:
        return self.prob.rank if self.prob.low_rank else 0

    def _encode(self, values: np.ndarray) -> np.ndarray:
        scaled = values / self._scale
        return self._copula.transform(scaled) if self._copula is not None else scaled

    def fit(self, values: np.ndarray) -> "GpVarForecaster":
        values = np.asarray(values, dtype=float)
        cfg = self.cfg
        m = values.shape[1]
        train_rows = values[: values.shape[0] - cfg.validation_len]
        self._scale = mean_scale(train_rows) if self.prob.scaling else np.ones(m)
        self._copula = (
            EmpiricalNormalTransform(train_rows / self._scale)
            if self.prob.copula
            else None
        )
        encoded = self._encode(values)

        rng = np.random.default_rng(cfg.seed)
        weights = init_stack_weights(rng, 1, cfg.hidden)
        h_top = cfg.hidden[-1]
        weights["head.w_mu"], weights["head.b_mu"] = linear_head_weights(rng, h_top, 1)
        weights["head.w_d"], weights["head.b_d"] = linear_head_weights(rng, h_top, 1)
        if self.effective_rank > 0:
            v, b = linear_head_weights(rng, h_top, self.effective_rank)
            weights["head.W_v"] = v
            weights["head.b_v"] = b

        x, y = sliding_windows(encoded, cfg.seq_len)
        self.train_losses, self.val_losses = fit_network(
            weights, cfg.hidden, x, y, cfg, rng, _joint_nll_loss,
            prepare=_per_series_batch,
        )
        self.weights = weights
        self._tail = encoded[-cfg.seq_len :]
        self._rng = rng
        return self

    def predictive_params(self) -> tuple[np.ndarray, np.ndarray]:
        """Mean and covariance of the next step in transformed space."""
        if self.weights is None:
            raise RuntimeError("fit() must run before forecasting")
        h_last, _ = stack_forward(
            self.weights, self.cfg.hidden, _per_series_batch(self._tail[None])
        )
        m = self._tail.shape[1]
        states = h_last.reshape(1, m, -1)
        mu, diag, _, factor = _joint_heads(self.weights, states)
        cov = factor[0] @ factor[0].T + np.diag(diag[0])
        return mu[0], cov

    def forecast(self, values: Optional[np.ndarray] = None) -> np.ndarray:
        if values is not None:
            self._tail = self._encode(np.asarray(values, dtype=float))[
                -self.cfg.seq_len :
            ]
        mu, cov = self.predictive_params()
        chol = np.linalg.cholesky(cov)
        eps = self._rng.standard_normal((self.prob.mc_samples, mu.size))
        draws = mu + eps @ chol.T
        if self._copula is not None:
            draws = self._copula.inverse(draws)
        return np.median(draws, axis=0) * self._scale


def gpvar_train(
    values: np.ndarray, cfg: TrainConfig, prob: ProbConfig
) -> GpVarForecaster:
    return GpVarForecaster(cfg, prob).fit(values)


def gpvar_forecast(model: GpVarForecaster) -> np.ndarray:
    return model.forecast()
