"""Classical variance-covariance estimators.

Seven estimators map a window of daily returns to an N x N covariance
matrix: the sample estimator, semi-covariance below a return threshold,
exponentially weighted moving average (RiskMetrics-style decay 0.94),
three Ledoit-Wolf shrinkage variants (constant variance, single factor,
constant correlation), and the iterative oracle-approximating shrinkage.

Every estimator returns a symmetric matrix; outputs that pick up a tiny
negative eigenvalue from float rounding are repaired by adding jitter on
the diagonal so downstream Cholesky factorization and quadratic
programming stay feasible.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InsufficientHistoryError

DEFAULT_EWMA_DECAY = 0.94
DEFAULT_SEMI_THRESHOLD = 0.02


class EstimatorKind(str, enum.Enum):
    SAMPLE = "Sample"
    SEMI_COV = "SemiCov"
    EWMA = "Ewma"
    SHRINK_CONST_VAR = "ShrinkConstVar"
    SHRINK_SINGLE_FACTOR = "ShrinkSingleFactor"
    SHRINK_CONST_CORR = "ShrinkConstCorr"
    ORACLE_APPROX = "OracleApprox"


@dataclass(frozen=True)
class EstimatorSpec:
    """Which estimator to run and with what parameters.

    ``window`` is the number of trailing return observations; ``decay``
    applies to EWMA only and ``threshold`` to the semi-covariance only.
    ``shrink_delta`` pins the shrinkage coefficient; ``None`` means the
    Ledoit-Wolf optimal coefficient is estimated from the window.
    """

    kind: EstimatorKind
    window: int
    decay: float = DEFAULT_EWMA_DECAY
    threshold: float = DEFAULT_SEMI_THRESHOLD
    shrink_delta: Optional[float] = None

    def __post_init__(self):
        if self.window < 2:
            raise ValueError("window must be at least 2")
        if not 0.0 < self.decay < 1.0:
            raise ValueError("decay must lie strictly between 0 and 1")

    @property
    def family(self) -> str:
        return "Classical"


def _validate_window(returns: np.ndarray, min_rows: int) -> np.ndarray:
    r = np.atleast_2d(np.asarray(returns, dtype=float))
    if r.shape[0] < min_rows:
        raise InsufficientHistoryError(
            f"window has {r.shape[0]} rows, needs at least {min_rows}"
        )
    return r


def is_psd(matrix: np.ndarray, rel_tol: float = 1e-10) -> bool:
    """True when the smallest eigenvalue is above ``-rel_tol * largest``."""
    eig = np.linalg.eigvalsh((matrix + matrix.T) / 2.0)
    scale = max(float(eig[-1]), 0.0)
    return bool(eig[0] >= -rel_tol * max(scale, 1e-300))


def psd_repair(matrix: np.ndarray, rel_tol: float = 1e-10) -> np.ndarray:
    """Symmetrize; add diagonal jitter if materially indefinite."""
    sym = (matrix + matrix.T) / 2.0
    eig = np.linalg.eigvalsh(sym)
    if eig[0] < -rel_tol * max(float(eig[-1]), 0.0):
        sym = sym + (abs(float(eig[0])) + 1e-12) * np.eye(sym.shape[0])
    return sym


def sample_cov(returns: np.ndarray, window: Optional[int] = None) -> np.ndarray:
    """Unbiased sample covariance over the last ``window`` rows (divisor k-1)."""
    r = _validate_window(returns, 2)
    if window is not None:
        r = _validate_window(r[-window:], window)
    k = r.shape[0]
    dev = r - r.mean(axis=0)
    return psd_repair(dev.T @ dev / (k - 1))


def semi_cov(
    returns: np.ndarray,
    window: Optional[int] = None,
    threshold: float = DEFAULT_SEMI_THRESHOLD,
) -> np.ndarray:
    """Semi-covariance: only returns below ``threshold`` contribute.

    Entry (i, j) is ``mean over the window of min(r_i - B, 0) * min(r_j - B, 0)``
    with divisor k, so the result is a Gram matrix and PSD by construction.
    """
    r = _validate_window(returns, 1)
    if window is not None:
        r = _validate_window(r[-window:], window)
    k = r.shape[0]
    clipped = np.minimum(r - threshold, 0.0)
    return psd_repair(clipped.T @ clipped / k)


def ewma_cov(
    history: np.ndarray,
    decay: float = DEFAULT_EWMA_DECAY,
    seed_window: int = 30,
) -> np.ndarray:
    """Exponentially weighted covariance seeded with a sample estimate.

    The recursion ``S <- decay * S + (1 - decay) * outer(r - mu)`` starts
    from the sample covariance of the first ``seed_window`` rows, with ``mu``
    the mean of those rows held fixed, and runs once per subsequent row.
    """
    r = _validate_window(history, seed_window + 1)
    seed = r[:seed_window]
    mu = seed.mean(axis=0)
    dev = seed - mu
    cov = dev.T @ dev / (seed_window - 1)
    for t in range(seed_window, r.shape[0]):
        d = r[t] - mu
        cov = decay * cov + (1.0 - decay) * np.outer(d, d)
    return psd_repair(cov)


def _target_constant_variance(sample: np.ndarray) -> np.ndarray:
    return np.mean(np.diag(sample)) * np.eye(sample.shape[0])


def _target_single_factor(sample: np.ndarray, returns: np.ndarray) -> np.ndarray:
    """Single-index target: market proxy is the equal-weighted mean return."""
    dev = returns - returns.mean(axis=0)
    mkt = dev.mean(axis=1)
    var_mkt = float(mkt @ mkt) / (returns.shape[0] - 1.0)
    betas_cov = dev.T @ mkt / (returns.shape[0] - 1)
    f = np.outer(betas_cov, betas_cov) / var_mkt
    np.fill_diagonal(f, np.diag(sample))
    return f


def _target_constant_correlation(sample: np.ndarray) -> np.ndarray:
    n = sample.shape[0]
    std = np.sqrt(np.diag(sample))
    outer_std = np.outer(std, std)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.where(outer_std > 0, sample / outer_std, 0.0)
    mean_corr = (corr.sum() - n) / (n * (n - 1)) if n > 1 else 0.0
    f = mean_corr * outer_std
    np.fill_diagonal(f, np.diag(sample))
    return f


def _lw_delta_constant_variance(returns: np.ndarray) -> float:
    # Ledoit-Wolf (2004) optimal intensity toward mu * I.
    x = returns - returns.mean(axis=0)
    t, n = x.shape
    emp = x.T @ x / t
    mu = np.trace(emp) / n
    d2 = np.sum((emp - mu * np.eye(n)) ** 2) / n
    if d2 <= 0:
        return 0.0
    x2 = x**2
    beta = np.sum(x2.T @ x2 / t - emp**2) / (n * t)
    return float(np.clip(min(beta, d2) / d2, 0.0, 1.0))


def _lw_delta_single_factor(returns: np.ndarray) -> float:
    # Ledoit-Wolf (2001) intensity toward the single-index target.
    x = returns - returns.mean(axis=0)
    t, n = x.shape
    mkt = x.mean(axis=1).reshape(t, 1)
    sample = (x.T @ x) / t
    betas = (x.T @ mkt / t).reshape(n, 1)
    var_mkt = float(mkt.ravel() @ mkt.ravel()) / t
    f = betas @ betas.T / var_mkt
    f[np.eye(n) == 1] = np.diag(sample)

    gamma = np.linalg.norm(sample - f, "fro") ** 2
    if gamma <= 0:
        return 0.0
    y = x**2
    pi_hat = np.sum(y.T @ y) / t - np.sum(sample**2)
    r_diag = np.sum(y**2) / t - np.sum(np.diag(sample) ** 2)
    z = x * np.tile(mkt, (n,))
    v1 = y.T @ z / t - np.tile(betas, (n,)) * sample
    r_off1 = (
        np.sum(v1 * np.tile(betas, (n,)).T) / var_mkt
        - np.sum(np.diag(v1) * betas.ravel()) / var_mkt
    )
    v3 = z.T @ z / t - var_mkt * sample
    r_off3 = (
        np.sum(v3 * (betas @ betas.T)) / var_mkt**2
        - np.sum(np.diag(v3) * betas.ravel() ** 2) / var_mkt**2
    )
    rho = r_diag + 2 * r_off1 - r_off3
    return float(np.clip((pi_hat - rho) / gamma / t, 0.0, 1.0))


def _lw_delta_constant_correlation(returns: np.ndarray) -> float:
    # Ledoit-Wolf (2003) intensity toward the constant-correlation target.
    x = returns - returns.mean(axis=0)
    t, n = x.shape
    sample = x.T @ x / t
    var = np.diag(sample)
    std = np.sqrt(var)
    outer_std = np.outer(std, std)
    mean_corr = (np.sum(sample / outer_std) - n) / (n * (n - 1)) if n > 1 else 0.0
    f = mean_corr * outer_std
    np.fill_diagonal(f, var)

    gamma = np.linalg.norm(sample - f, "fro") ** 2
    if gamma <= 0:
        return 0.0
    y = x**2
    pi_mat = y.T @ y / t - sample**2
    pi_hat = np.sum(pi_mat)
    term1 = (x**3).T @ x / t
    term2 = np.tile(var.reshape(-1, 1), (1, n)) * sample
    theta_mat = term1 - term2
    np.fill_diagonal(theta_mat, 0.0)
    rho = np.sum(np.diag(pi_mat)) + mean_corr * np.sum(
        np.outer(1.0 / std, std) * theta_mat
    )
    return float(np.clip((pi_hat - rho) / gamma / t, 0.0, 1.0))


_SHRINK_TARGETS = {
    EstimatorKind.SHRINK_CONST_VAR: (
        lambda s, r: _target_constant_variance(s),
        _lw_delta_constant_variance,
    ),
    EstimatorKind.SHRINK_SINGLE_FACTOR: (
        _target_single_factor,
        _lw_delta_single_factor,
    ),
    EstimatorKind.SHRINK_CONST_CORR: (
        lambda s, r: _target_constant_correlation(s),
        _lw_delta_constant_correlation,
    ),
}


def shrink(
    sample: np.ndarray,
    target_kind: EstimatorKind,
    delta: Optional[float] = None,
    returns: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Convex combination ``delta * F + (1 - delta) * S`` toward a target F.

    ``delta=None`` estimates the Ledoit-Wolf optimal coefficient from
    ``returns`` (required in that case); the coefficient is clipped to
    [0, 1] either way.
    """
    if target_kind not in _SHRINK_TARGETS:
        raise ValueError(f"unknown shrinkage target {target_kind!r}")
    if delta is not None and not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    target_fn, delta_fn = _SHRINK_TARGETS[target_kind]
    if target_kind == EstimatorKind.SHRINK_SINGLE_FACTOR or delta is None:
        if returns is None:
            raise ValueError("returns window required for this shrinkage call")
        returns = np.asarray(returns, dtype=float)
    f = target_fn(sample, returns)
    if delta is None:
        delta = delta_fn(returns)
    return psd_repair(delta * f + (1.0 - delta) * sample)


def oracle_approx(
    sample: np.ndarray,
    n_obs: int,
    max_iter: int = 100,
    tol: float = 1e-8,
) -> tuple[np.ndarray, float, int]:
    """Iterative oracle-approximating shrinkage toward ``(tr(S)/p) * I``.

    Starting from the sample matrix, the shrinkage coefficient rho is
    recomputed from the current iterate until it moves less than ``tol``
    or ``max_iter`` is hit; rho is clipped to [0, 1] at every step.
    Returns ``(covariance, rho, iterations_used)``.
    """
    s = np.asarray(sample, dtype=float)
    p = s.shape[0]
    if n_obs < 1:
        raise ValueError("sample size must be at least 1")
    trace_s = float(np.trace(s))
    if not np.isfinite(trace_s):
        raise ValueError("sample matrix has a non-finite trace")
    f = (trace_s / p) * np.eye(p)

    sigma = s.copy()
    rho = 0.0
    iterations = 0
    for iterations in range(1, max_iter + 1):
        tr_ss = float(np.trace(sigma @ s))
        tr_sq = float(np.trace(sigma)) ** 2
        num = (1.0 - 2.0 / p) * tr_ss + tr_sq
        den = (n_obs + 1.0 - 2.0 / p) * tr_ss + (1.0 - n_obs / p) * tr_sq
        rho_next = float(np.clip(num / den, 0.0, 1.0)) if den != 0 else 1.0
        sigma = (1.0 - rho_next) * s + rho_next * f
        if abs(rho_next - rho) < tol:
            rho = rho_next
            break
        rho = rho_next
    return psd_repair(sigma), rho, iterations


def estimate(history: np.ndarray, spec: EstimatorSpec) -> np.ndarray:
    """Run the estimator described by ``spec`` on a return history.

    All estimators except EWMA look at the trailing ``spec.window`` rows;
    EWMA seeds on the first ``spec.window`` rows and then recurses through
    the entire history.
    """
    r = np.asarray(history, dtype=float)
    if spec.kind == EstimatorKind.EWMA:
        return ewma_cov(r, decay=spec.decay, seed_window=spec.window)
    window = _validate_window(r, spec.window)[-spec.window :]
    if spec.kind == EstimatorKind.SAMPLE:
        return sample_cov(window)
    if spec.kind == EstimatorKind.SEMI_COV:
        return semi_cov(window, threshold=spec.threshold)
    if spec.kind in _SHRINK_TARGETS:
        return shrink(sample_cov(window), spec.kind, spec.shrink_delta, window)
    if spec.kind == EstimatorKind.ORACLE_APPROX:
        cov, _, _ = oracle_approx(sample_cov(window), n_obs=window.shape[0])
        return cov
    raise ValueError(f"unknown estimator kind {spec.kind!r}")
