"""Rolling covariance matrices as forecastable Cholesky-factor series.

A symmetric PSD matrix factors as ``L @ L.T`` with L lower triangular.
Flattening the N(N+1)/2 lower-triangle entries of L per timestamp turns a
rolling sequence of covariance matrices into plain multivariate series that
any forecaster can handle; rebuilding ``L @ L.T`` from a forecast vector is
a Gram product, so the reconstructed matrix is PSD for every real input.

Series columns follow lower-triangular row-major order:
(0,0), (1,0), (1,1), (2,0), ... and are named ``L_i_j``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .errors import IndefiniteMatrixError, InsufficientHistoryError
from .estimators import sample_cov


def lower_triangular_index_map(n_assets: int) -> list[tuple[int, int]]:
    """Column order of the factor series: row-major lower triangle of L."""
    return [(i, j) for i in range(n_assets) for j in range(i + 1)]


def _semidefinite_cholesky(sigma: np.ndarray) -> np.ndarray:
    """Lower Cholesky tolerant of exact semidefiniteness (zero pivots)."""
    n = sigma.shape[0]
    scale = max(float(np.max(np.abs(np.diag(sigma)))), 1.0)
    lower = np.zeros_like(sigma)
    for j in range(n):
        d = sigma[j, j] - lower[j, :j] @ lower[j, :j]
        if d < -1e-8 * scale:
            raise IndefiniteMatrixError("matrix is not positive semidefinite")
        lower[j, j] = np.sqrt(max(d, 0.0))
        if lower[j, j] > 0:
            for i in range(j + 1, n):
                lower[i, j] = (sigma[i, j] - lower[i, :j] @ lower[j, :j]) / lower[j, j]
    return lower


def cholesky_factor(sigma: np.ndarray) -> np.ndarray:
    """Lower-triangular L with ``L @ L.T == sigma``.

    Falls back to a jittered retry and then a semidefinite-tolerant sweep,
    so exactly singular covariance matrices (including the zero matrix)
    factor cleanly; materially indefinite input raises.
    """
    s = np.asarray(sigma, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError("covariance matrix must be square")
    try:
        return np.linalg.cholesky(s)
    except np.linalg.LinAlgError:
        pass
    jitter = 1e-10 * float(np.max(np.diag(s)))
    if jitter > 0:
        try:
            lower = np.linalg.cholesky(s + jitter * np.eye(s.shape[0]))
        except np.linalg.LinAlgError:
            lower = None
        # keep the jittered factor only if it still reproduces the input
        if lower is not None and np.linalg.norm(
            lower @ lower.T - s
        ) <= 1e-10 * np.linalg.norm(s):
            return lower
    return _semidefinite_cholesky(s)


def flatten_factor(lower: np.ndarray) -> np.ndarray:
    """Lower-triangle entries of L in the series column order."""
    idx = lower_triangular_index_map(lower.shape[0])
    return np.array([lower[i, j] for i, j in idx])


def reconstruct(factors: np.ndarray, n_assets: int) -> np.ndarray:
    """Rebuild ``L @ L.T`` from a factor vector; PSD for any real input.

    Diagonal entries are clamped at zero first, matching the sign convention
    of the Cholesky diagonal (forecasts are otherwise unconstrained).
    """
    idx = lower_triangular_index_map(n_assets)
    f = np.asarray(factors, dtype=float)
    if f.shape != (len(idx),):
        raise ValueError(f"expected {len(idx)} factor entries, got {f.shape}")
    lower = np.zeros((n_assets, n_assets))
    for value, (i, j) in zip(f, idx):
        lower[i, j] = max(value, 0.0) if i == j else value
    return lower @ lower.T


@dataclass(frozen=True)
class FactorSeries:
    """Time-indexed Cholesky-factor entries for one asset universe."""

    values: np.ndarray  # T_s x M
    n_assets: int
    dates: Optional[pd.DatetimeIndex] = None

    def __post_init__(self):
        m = self.n_assets * (self.n_assets + 1) // 2
        if self.values.ndim != 2 or self.values.shape[1] != m:
            raise ValueError(f"expected {m} columns for {self.n_assets} assets")
        if self.dates is not None and len(self.dates) != self.values.shape[0]:
            raise ValueError("dates length must match the number of rows")

    @property
    def index_map(self) -> list[tuple[int, int]]:
        return lower_triangular_index_map(self.n_assets)

    @property
    def column_names(self) -> list[str]:
        return [f"L_{i}_{j}" for i, j in self.index_map]

    def __len__(self) -> int:
        return self.values.shape[0]

    def reconstruct_row(self, row: int) -> np.ndarray:
        return reconstruct(self.values[row], self.n_assets)

    def to_frame(self) -> pd.DataFrame:
        index = self.dates if self.dates is not None else pd.RangeIndex(len(self))
        return pd.DataFrame(self.values, index=index, columns=self.column_names)

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index_label="date")

    @classmethod
    def from_csv(cls, path) -> "FactorSeries":
        frame = pd.read_csv(path, index_col="date")
        m = frame.shape[1]
        n = int((np.sqrt(8 * m + 1) - 1) / 2)
        if n * (n + 1) // 2 != m:
            raise ValueError(f"{m} columns is not a triangular number")
        try:
            dates = pd.DatetimeIndex(pd.to_datetime(frame.index))
        except (ValueError, TypeError):
            dates = None
        return cls(values=frame.to_numpy(dtype=float), n_assets=n, dates=dates)


def build_factor_series(
    returns: np.ndarray,
    window: int,
    dates: Optional[Sequence] = None,
    estimator=None,
) -> FactorSeries:
    """Factor series of rolling covariance matrices over ``returns``.

    For every trailing window of ``window`` rows the covariance is estimated
    (sample estimator unless another callable is given), factorized, and its
    lower triangle stored as one row. Row r corresponds to the window ending
    at return row ``window - 1 + r``.
    """
    r = np.asarray(returns, dtype=float)
    if r.ndim != 2:
        raise ValueError("returns must be 2-d")
    t, n = r.shape
    if t < window + 1:
        raise InsufficientHistoryError(
            f"need more than {window} return rows, got {t}"
        )
    cov_fn = estimator if estimator is not None else sample_cov
    rows = []
    for end in range(window, t + 1):
        lower = cholesky_factor(cov_fn(r[end - window : end]))
        rows.append(flatten_factor(lower))
    series_dates = None
    if dates is not None:
        series_dates = pd.DatetimeIndex(dates[window - 1 :])
    return FactorSeries(values=np.array(rows), n_assets=n, dates=series_dates)
