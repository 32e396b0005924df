"""Read CRSP-style daily stock files into the regression panel."""
from __future__ import annotations

import logging

import numpy as np
import pandas as pd

from .dgp import PANEL_COLUMNS

logger = logging.getLogger(__name__)

REQUIRED = ("stock_id", "date", "bid", "ask", "price", "volume", "mktcap", "mmcnt")
NUMERIC = ("bid", "ask", "price", "volume", "mktcap", "mmcnt", "ret", "volatility")
VOL_WINDOW = 20
DEFAULT_EVENT_DATE = "2002-08-29"


class PanelFormatError(ValueError):
    pass


def _numeric(df, col):
    values = pd.to_numeric(df[col], errors="coerce")
    bad = values.isna() & df[col].notna() & (df[col].astype(str).str.strip() != "")
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise PanelFormatError(f"non-numeric value {df[col].iloc[row]!r} in column {col!r} (data row {row + 1})")
    return values


def ingest_csv(path, event_date=DEFAULT_EVENT_DATE) -> tuple[pd.DataFrame, dict]:
    """Build panel rows from a daily quote file.

    Spread is ``(ask - bid) / midpoint * 100``. Volatility is taken from a
    ``volatility`` column when present, otherwise it is the standard deviation
    of the last 20 daily returns (current day included); rows without a full
    window are dropped. ``mmcnt_bar`` is each stock's mean maker count over
    all of its rows. ``date`` may be calendar dates or integer trading-day
    indices; ``event_date`` must be of the same kind.

    Returns the panel and a mapping of drop reason to row count.
    """
    df = pd.read_csv(path, encoding="utf-8")
    df.columns = [c.strip().lower() for c in df.columns]
    missing = [c for c in REQUIRED if c not in df.columns]
    if "ret" not in df.columns and "volatility" not in df.columns:
        missing.append("ret or volatility")
    if missing:
        raise PanelFormatError(f"missing required columns: {missing}")
    for col in NUMERIC:
        if col in df.columns:
            df[col] = _numeric(df, col)

    if pd.api.types.is_numeric_dtype(df["date"]):
        dates = df["date"].astype(float)
        event = float(event_date)
    else:
        try:
            dates = pd.to_datetime(df["date"])
        except (ValueError, TypeError) as exc:
            raise PanelFormatError(f"unparseable date column: {exc}") from exc
        event = pd.Timestamp(event_date)
    df["date"] = dates
    df = df.sort_values(["stock_id", "date"], kind="mergesort").reset_index(drop=True)

    df["mmcnt_bar"] = df.groupby("stock_id")["mmcnt"].transform("mean")
    if "volatility" not in df.columns:
        df["volatility"] = df.groupby("stock_id")["ret"].transform(
            lambda r: r.rolling(VOL_WINDOW, min_periods=VOL_WINDOW).std()
        )

    counts = {}

    def drop(mask, reason):
        nonlocal df
        mask = mask.fillna(False).to_numpy(dtype=bool)
        counts[reason] = int(mask.sum())
        if mask.any():
            logger.warning("dropping %d rows: %s", mask.sum(), reason)
        df = df.loc[~mask].reset_index(drop=True)

    drop(df[["bid", "ask", "price"]].isna().any(axis=1), "missing_quote")
    drop(df["bid"] > df["ask"], "crossed_quote")
    mid = (df["bid"] + df["ask"]) / 2
    df["spread"] = (df["ask"] - df["bid"]) / mid * 100
    drop(~(df["spread"] > 0), "nonpositive_spread")
    drop(~(df["price"].abs() > 0), "invalid_price")
    drop(~(df["volume"] > 0), "nonpositive_volume")
    drop(~(df["mktcap"] > 0), "nonpositive_mktcap")
    drop(df["volatility"].isna(), "missing_volatility")
    drop(~(df["mmcnt_bar"] >= 1), "mmcnt_below_one")

    # CRSP marks bid/ask-average prices with a negative sign
    df["inv_price"] = 1.0 / df["price"].abs()
    df["post"] = (df["date"] >= event).astype(int)
    df["date_index"] = pd.factorize(df["date"], sort=True)[0]
    return df[list(PANEL_COLUMNS)], counts
