"""From a covariance matrix to integer share orders.

Runs the minimum-variance optimizer with and without a turnover penalty,
then converts the weights to integer shares with the two-stage greedy
allocator and shows the cash accounting line by line.
"""
import numpy as np

from covcast.allocator import greedy_allocate
from covcast.optimizer import min_variance

sigma = np.array(
    [
        [0.040, 0.012, 0.006, 0.004],
        [0.012, 0.090, 0.010, 0.008],
        [0.006, 0.010, 0.020, 0.005],
        [0.004, 0.008, 0.005, 0.060],
    ]
)
prev = np.array([0.40, 0.10, 0.40, 0.10])

free = min_variance(sigma)
sticky = min_variance(sigma, prev=prev, cost_rate=0.005)
print("minimum-variance weights")
print("  unconstrained :", np.round(free, 4))
print("  with 50 bps turnover penalty from", prev, ":", np.round(sticky, 4))
turnover = lambda w: float(np.abs(w - prev).sum())
print(f"  turnover drops from {turnover(free):.3f} to {turnover(sticky):.3f}\n")

prices = np.array([153.20, 27.45, 9.81, 310.00])
capital = 100_000.0
alloc = greedy_allocate(sticky, prices, capital)
print(f"greedy allocation of {capital:,.0f} at prices {prices}:")
for i, (shares, price) in enumerate(zip(alloc.shares, prices)):
    print(f"  asset {i}: {shares:5d} shares x {price:8.2f} = {shares * price:12,.2f}")
invested = float(alloc.shares @ prices)
print(f"  invested {invested:,.2f} + leftover {alloc.leftover_cash:,.2f} = {invested + alloc.leftover_cash:,.2f}")
