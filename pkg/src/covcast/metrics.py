"""Performance measures for portfolio equity curves.

All measures work on daily equity values with a 365-day year convention,
so calendar-day curves (crypto trades on weekends too) annualize
consistently. Ratio metrics with a zero denominator are reported as
``None`` rather than infinity; the CSV writers serialize ``None`` as an
empty cell.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

DAYS_PER_YEAR = 365.0


@dataclass(frozen=True)
class MetricsBlock:
    """The seven performance measures of one equity curve.

    ``mld`` is expressed in years; everything else is dimensionless.
    ``ir``, ``ir2`` and ``ir3`` are ``None`` when a denominator is zero.
    """

    arc: float
    asd: float
    mdd: float
    mld: float
    ir: Optional[float]
    ir2: Optional[float]
    ir3: Optional[float]

    def as_row(self) -> dict:
        """Row dict using the report column spellings."""
        return {
            "aRC": self.arc,
            "aSD": self.asd,
            "MD": self.mdd,
            "MLD": self.mld,
            "IR": self.ir,
            "IR2": self.ir2,
            "IR3": self.ir3,
        }


def _as_positive_values(values: Sequence[float]) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise ValueError("equity series needs at least two values")
    if not np.all(np.isfinite(v)) or np.any(v <= 0):
        raise ValueError("equity series must be positive and finite")
    return v


def annualized_return(values: Sequence[float], days: Optional[float] = None) -> float:
    """Annualized rate of return (P_T / P_0) ** (365 / T) - 1.

    ``days`` is the elapsed calendar time T; defaults to ``len(values) - 1``
    for a daily series.
    """
    v = _as_positive_values(values)
    t = float(days) if days is not None else float(v.size - 1)
    if t <= 0:
        raise ValueError("elapsed days must be positive")
    return float((v[-1] / v[0]) ** (DAYS_PER_YEAR / t) - 1.0)


def annualized_stdev(values: Sequence[float], days: Optional[float] = None) -> float:
    """Annualized standard deviation sqrt((365 / T) * sum((r_t - rbar)^2)).

    Daily simple returns r_t = P_t / P_{t-1} - 1 enter with their squared
    deviation from the mean return.
    """
    v = _as_positive_values(values)
    if v.size < 3:
        raise ValueError("need at least three values for a return deviation")
    t = float(days) if days is not None else float(v.size - 1)
    if t <= 0:
        raise ValueError("elapsed days must be positive")
    r = v[1:] / v[:-1] - 1.0
    dev = r - r.mean()
    return float(np.sqrt((DAYS_PER_YEAR / t) * np.sum(dev * dev)))


def max_drawdown(values: Sequence[float]) -> float:
    """Largest relative drop from a running maximum, in [0, 1]."""
    v = _as_positive_values(values)
    peaks = np.maximum.accumulate(v)
    return float(np.max((peaks - v) / peaks))


def max_loss_duration(
    values: Sequence[float], days: Optional[Sequence[float]] = None
) -> float:
    """Longest time-under-water interval in years.

    An interval runs from the day a running maximum was last attained to the
    day the curve reaches that level again; an unrecovered trailing interval
    counts up to the final day. ``days`` are day offsets matching ``values``
    (default 0, 1, 2, ...).
    """
    v = _as_positive_values(values)
    d = np.asarray(days, dtype=float) if days is not None else np.arange(v.size, dtype=float)
    if d.shape != v.shape:
        raise ValueError("days must match values")
    run_max = v[0]
    peak_day = d[0]
    longest = 0.0
    underwater = False
    for t in range(1, v.size):
        if v[t] >= run_max:
            if underwater:
                longest = max(longest, d[t] - peak_day)
                underwater = False
            run_max = v[t]
            peak_day = d[t]
        else:
            underwater = True
    if underwater:
        longest = max(longest, d[-1] - peak_day)
    return float(longest / DAYS_PER_YEAR)


def information_ratios(
    arc: float, asd: float, mdd: float, mld: float
) -> tuple[Optional[float], Optional[float], Optional[float]]:
    """IR = aRC/aSD, IR2 = IR*sign(aRC)*aRC/MDD, IR3 = aRC^3/(aSD*MDD*MLD).

    Any zero denominator makes the affected ratio ``None``.
    """
    ir = arc / asd if asd > 0 else None
    ir2 = ir * np.sign(arc) * arc / mdd if ir is not None and mdd > 0 else None
    ir3 = arc**3 / (asd * mdd * mld) if asd > 0 and mdd > 0 and mld > 0 else None
    return ir, (None if ir2 is None else float(ir2)), ir3


def compute_metrics(
    values: Sequence[float], days: Optional[Sequence[float]] = None
) -> MetricsBlock:
    """All seven measures of an equity curve in one block."""
    v = _as_positive_values(values)
    d = np.asarray(days, dtype=float) if days is not None else np.arange(v.size, dtype=float)
    elapsed = d[-1] - d[0]
    arc = annualized_return(v, elapsed)
    asd = annualized_stdev(v, elapsed)
    mdd = max_drawdown(v)
    mld = max_loss_duration(v, d)
    ir, ir2, ir3 = information_ratios(arc, asd, mdd, mld)
    return MetricsBlock(arc=arc, asd=asd, mdd=mdd, mld=mld, ir=ir, ir2=ir2, ir3=ir3)
