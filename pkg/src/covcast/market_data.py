"""Price and market-cap panel loading, alignment, and universe selection.

Input CSVs are wide: a ``date`` column with ISO-8601 dates, one column per
ticker, empty cells for missing quotes. Panels are aligned to a contiguous
daily calendar (365-day convention); within each asset's first..last quoted
date, gaps are filled with the last available price. Cells before the first
quote stay missing. Stablecoins are dropped via a configurable blocklist.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

import pandas as pd

from .errors import DataError, InsufficientAssetsError

STOCK = "stock"
CRYPTO = "crypto"

DEFAULT_STABLECOINS = frozenset(
    {
        "USDT", "USDC", "BUSD", "DAI", "TUSD", "USDP", "PAX", "GUSD",
        "HUSD", "UST", "USTC", "USDN", "FRAX", "LUSD", "SUSD", "EURS",
        "USDD", "FDUSD", "USDS", "NUSD",
    }
)


@dataclass(frozen=True)
class PricePanel:
    """Close prices on a gap-free daily calendar with per-asset class tags."""

    prices: pd.DataFrame  # DatetimeIndex x tickers
    asset_class: Mapping[str, str] = field(default_factory=dict)

    @property
    def dates(self) -> pd.DatetimeIndex:
        return self.prices.index

    @property
    def assets(self) -> list[str]:
        return list(self.prices.columns)


@dataclass(frozen=True)
class CapPanel:
    """Market capitalizations on the same calendar; missing cells allowed."""

    caps: pd.DataFrame

    @property
    def dates(self) -> pd.DatetimeIndex:
        return self.caps.index

    @property
    def assets(self) -> list[str]:
        return list(self.caps.columns)


def _read_wide_csv(path) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f"malformed CSV {path}: {exc}") from exc
    if frame.shape[1] < 2:
        raise DataError(f"{path}: need a date column plus at least one ticker")
    date_col = frame.columns[0]
    try:
        dates = pd.to_datetime(frame[date_col], format="ISO8601")
    except (ValueError, TypeError) as exc:
        raise DataError(f"{path}: unparseable dates in column {date_col!r}") from exc
    if dates.duplicated().any():
        dupes = dates[dates.duplicated()].dt.date.unique()
        raise DataError(f"{path}: duplicate date rows {list(dupes)[:5]}")
    body = frame.drop(columns=[date_col]).apply(pd.to_numeric, errors="raise")
    body.index = pd.DatetimeIndex(dates)
    return body.sort_index()


def _align_daily(frame: pd.DataFrame) -> pd.DataFrame:
    calendar = pd.date_range(frame.index.min(), frame.index.max(), freq="D")
    return frame.reindex(calendar)


def fill_forward(prices: pd.DataFrame) -> pd.DataFrame:
    """Fill gaps with the last available price within each asset's range.

    Idempotent: cells before the first quote (and after the last) stay
    missing, so re-applying the fill changes nothing.
    """
    filled = prices.copy()
    for col in filled.columns:
        s = filled[col]
        first, last = s.first_valid_index(), s.last_valid_index()
        if first is None:
            continue
        filled.loc[first:last, col] = s.loc[first:last].ffill()
    return filled


def load_class_map(path) -> dict[str, str]:
    """Read the ``ticker,class`` CSV; class must be ``stock`` or ``crypto``."""
    frame = pd.read_csv(path)
    cols = [c.strip().lower() for c in frame.columns]
    if cols[:2] != ["ticker", "class"]:
        raise DataError(f"{path}: expected header 'ticker,class'")
    mapping = {}
    for ticker, cls in zip(frame.iloc[:, 0], frame.iloc[:, 1]):
        cls = str(cls).strip().lower()
        if cls not in (STOCK, CRYPTO):
            raise DataError(f"{path}: unknown asset class {cls!r} for {ticker}")
        mapping[str(ticker).strip()] = cls
    return mapping


def load_price_panel(
    path,
    class_map: Mapping[str, str],
    stablecoins: Iterable[str] = DEFAULT_STABLECOINS,
) -> PricePanel:
    """Load, align, and forward-fill a wide close-price CSV."""
    raw = _read_wide_csv(path)
    blocked = {t.upper() for t in stablecoins}
    keep = [c for c in raw.columns if c.upper() not in blocked]
    raw = raw[keep]
    missing = [c for c in raw.columns if c not in class_map]
    if missing:
        raise DataError(f"tickers without an asset class: {missing[:8]}")
    if (raw <= 0).any().any():
        bad = raw.columns[(raw <= 0).any()].tolist()
        raise DataError(f"non-positive prices in {bad[:8]}")
    filled = fill_forward(_align_daily(raw))
    classes = {c: class_map[c] for c in filled.columns}
    return PricePanel(prices=filled, asset_class=classes)


def load_cap_panel(path) -> CapPanel:
    """Load and align a wide market-cap CSV (no filling; gaps allowed)."""
    raw = _read_wide_csv(path)
    if (raw < 0).any().any():
        bad = raw.columns[(raw < 0).any()].tolist()
        raise DataError(f"negative market caps in {bad[:8]}")
    return CapPanel(caps=_align_daily(raw))


def compute_returns(
    panel: PricePanel,
    assets: Optional[Iterable[str]] = None,
    start=None,
    end=None,
) -> pd.DataFrame:
    """Simple returns ``P_t / P_{t-1} - 1`` for fully available assets.

    Raises if any selected asset has a missing price inside the range.
    """
    cols = list(assets) if assets is not None else panel.assets
    prices = panel.prices.loc[slice(start, end), cols]
    if prices.shape[0] < 2:
        raise DataError("need at least two price rows to compute returns")
    if prices.isna().any().any():
        unavailable = prices.columns[prices.isna().any()].tolist()
        raise DataError(f"assets unavailable in range: {unavailable[:8]}")
    values = prices.to_numpy(dtype=float)
    rets = values[1:] / values[:-1] - 1.0
    return pd.DataFrame(rets, index=prices.index[1:], columns=cols)


def select_universe(
    caps: CapPanel,
    date,
    n_stock: int,
    n_crypto: int,
    asset_class: Mapping[str, str],
    eligible: Optional[Iterable[str]] = None,
) -> list[str]:
    """Top-cap stocks followed by top-cap cryptos at ``date``.

    Each group is sorted by descending cap with ties broken by ticker.
    Assets with a missing cap on the date are excluded; ``eligible``
    restricts candidates further (e.g. to assets with full lookback).
    """
    date = pd.Timestamp(date)
    if date not in caps.caps.index:
        raise DataError(f"date {date.date()} not present in the cap panel")
    row = caps.caps.loc[date].dropna()
    if eligible is not None:
        row = row[row.index.intersection(list(eligible))]

    def top(cls: str, count: int) -> list[str]:
        members = [(t, float(v)) for t, v in row.items() if asset_class.get(t) == cls]
        if len(members) < count:
            raise InsufficientAssetsError(
                f"{len(members)} {cls} assets with caps on {date.date()}, need {count}"
            )
        members.sort(key=lambda kv: (-kv[1], kv[0]))
        return [t for t, _ in members[:count]]

    return top(STOCK, n_stock) + top(CRYPTO, n_crypto)
