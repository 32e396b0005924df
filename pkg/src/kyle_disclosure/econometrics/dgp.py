"""Synthetic stock-day panels with a planted difference-in-differences structure."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd

from .effects import model_implied_effect

PANEL_COLUMNS = (
    "stock_id",
    "date_index",
    "post",
    "spread",
    "mmcnt_bar",
    "mktcap",
    "volume",
    "volatility",
    "inv_price",
)

# Table-3-sized defaults: intercept, then log mktcap, log volume, volatility, 1/price
DEFAULT_INTERCEPT = 1.929
DEFAULT_CONTROLS = (-0.449, -0.047, 4.989, 0.086)


@dataclass(frozen=True)
class MmcntMixture:
    """Two lognormal modes for the stock-level average maker count."""

    low_share: float = 0.115
    low_median: float = 3.0
    high_median: float = 18.0
    log_sd: float = 0.45

    def sample(self, rng, n):
        low = rng.random(n) < self.low_share
        med = np.where(low, self.low_median, self.high_median)
        return np.maximum(med * np.exp(self.log_sd * rng.standard_normal(n)), 1.0)


@dataclass(frozen=True)
class DgpConfig:
    n_stocks: int = 500
    n_days: int = 200
    event_day: int = 100
    beta1: float = -0.374
    beta2: float = -0.378
    beta3: float = 0.105
    intercept: float = DEFAULT_INTERCEPT
    controls_gamma: tuple = DEFAULT_CONTROLS
    noise_sd: float = 0.4
    cluster_rho: float = 0.3
    error_structure: str = "equicorrelated"  # or "ar1"
    effect_mode: str = "linear"  # or "model_implied"
    mmcnt_distribution: MmcntMixture = field(default_factory=MmcntMixture)

    def __post_init__(self):
        if self.n_stocks < 2 or self.n_days < 2:
            raise ValueError("need at least two stocks and two days")
        if not 0 < self.event_day < self.n_days:
            raise ValueError("event_day must fall strictly inside the sample")
        if not 0 <= self.cluster_rho < 1:
            raise ValueError("cluster_rho must lie in [0, 1)")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be nonnegative")
        if len(self.controls_gamma) != 4:
            raise ValueError("controls_gamma needs four entries")
        if self.error_structure not in ("equicorrelated", "ar1"):
            raise ValueError(f"unknown error_structure {self.error_structure!r}")
        if self.effect_mode not in ("linear", "model_implied"):
            raise ValueError(f"unknown effect_mode {self.effect_mode!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["controls_gamma"] = list(self.controls_gamma)
        return d


def _errors(cfg: DgpConfig, rng) -> np.ndarray:
    S, T, rho = cfg.n_stocks, cfg.n_days, cfg.cluster_rho
    if cfg.error_structure == "equicorrelated":
        common = rng.standard_normal((S, 1))
        idio = rng.standard_normal((S, T))
        e = np.sqrt(rho) * common + np.sqrt(1 - rho) * idio
    else:
        shocks = rng.standard_normal((S, T))
        e = np.empty((S, T))
        e[:, 0] = shocks[:, 0]
        scale = np.sqrt(1 - rho**2)
        for t in range(1, T):
            e[:, t] = rho * e[:, t - 1] + scale * shocks[:, t]
    return cfg.noise_sd * e


def generate_panel(cfg: DgpConfig, seed: int = 0) -> pd.DataFrame:
    """Draw a panel whose log spread follows the regression equation exactly.

    Stock characteristics (market cap, volume, price levels) are persistent
    stock effects plus daily noise. With ``effect_mode="model_implied"`` the
    event effect of each stock is the log impact ratio at its average maker
    count (floored at 3) instead of ``beta1 + beta3 log(1 + mmcnt)``.
    """
    rng = np.random.default_rng(seed)
    S, T = cfg.n_stocks, cfg.n_days
    mmcnt_bar = cfg.mmcnt_distribution.sample(rng, S)

    log_mktcap = rng.normal(np.log(124.0), 1.8, (S, 1)) + rng.normal(0.0, 0.08, (S, T))
    log_volume = (
        np.log(44_525.0)
        + 0.8 * (log_mktcap - np.log(124.0))
        + rng.normal(0.0, 1.0, (S, 1))
        + rng.normal(0.0, 0.6, (S, T))
    )
    volatility = np.abs(rng.normal(0.04, 0.015, (S, 1)) + rng.normal(0.0, 0.01, (S, T)))
    log_price = rng.normal(np.log(15.0), 1.0, (S, 1)) + rng.normal(0.0, 0.03, (S, T))
    inv_price = np.exp(-log_price)

    post = (np.arange(T) >= cfg.event_day).astype(float)[None, :]
    log_mm = np.log1p(mmcnt_bar)[:, None]
    if cfg.effect_mode == "linear":
        event = cfg.beta1 + cfg.beta3 * log_mm
    else:
        event = np.array([model_implied_effect(max(m, 3.0)) for m in mmcnt_bar])[:, None]
    g = cfg.controls_gamma
    log_spread = (
        cfg.intercept
        + post * event
        + cfg.beta2 * log_mm
        + g[0] * log_mktcap
        + g[1] * log_volume
        + g[2] * volatility
        + g[3] * inv_price
        + _errors(cfg, rng)
    )

    stock = np.repeat(np.arange(S), T)
    return pd.DataFrame(
        {
            "stock_id": stock,
            "date_index": np.tile(np.arange(T), S),
            "post": np.broadcast_to(post, (S, T)).ravel().astype(int),
            "spread": np.exp(log_spread).ravel(),
            "mmcnt_bar": mmcnt_bar[stock],
            "mktcap": np.exp(log_mktcap).ravel(),
            "volume": np.exp(log_volume).ravel(),
            "volatility": volatility.ravel(),
            "inv_price": inv_price.ravel(),
        },
        columns=list(PANEL_COLUMNS),
    )
