"""Compare the seven covariance estimators on one synthetic return window.

Generates correlated returns with a known covariance, runs every estimator
on a short window, and prints how far each lands from the truth. Shrinkage
beats the raw sample matrix when the window is short relative to the number
of assets, which is exactly the regime portfolio backtests live in.
"""
import numpy as np

from covcast.estimators import EstimatorKind, EstimatorSpec, estimate

rng = np.random.default_rng(0)

n_assets, window, history = 8, 40, 80
a = rng.standard_normal((n_assets, n_assets)) * 0.01
truth = a @ a.T + 0.01**2 * np.eye(n_assets)
chol = np.linalg.cholesky(truth)
returns = rng.standard_normal((history, n_assets)) @ chol.T

print(f"{n_assets} assets, window {window} of {history} observations, "
      "Frobenius error vs truth:\n")
for kind in EstimatorKind:
    spec = EstimatorSpec(kind=kind, window=window)
    cov = estimate(returns, spec)
    err = np.linalg.norm(cov - truth) / np.linalg.norm(truth)
    eig_min = np.linalg.eigvalsh(cov)[0]
    print(f"  {kind.value:20s} error {err:7.4f}   min eigenvalue {eig_min: .2e}")

print("\nEvery output is symmetric PSD, so it can feed the Cholesky pipeline")
print("and the minimum-variance optimizer directly.")
