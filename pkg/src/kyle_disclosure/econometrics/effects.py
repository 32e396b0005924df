import math

import numpy as np

from ..exceptions import ModelDomainError


def model_implied_effect(m: float) -> float:
    """Log change in price impact when disclosure is introduced with ``m`` makers.

    Ratio of the disclosure impact ``sqrt(m) / (2 sqrt(m - 2))`` to the
    no-disclosure impact ``(m - 1) / (m - 2)``; ``m`` may be fractional.
    """
    if not m >= 3:
        raise ModelDomainError(f"m={m}: the oligopoly impact ratio needs m >= 3")
    return 0.5 * math.log(m * (m - 2)) - math.log(2.0 * (m - 1))


def total_effect(result, mmcnt: float) -> tuple[float, float]:
    """``(log effect, percent change)`` of the event at an average maker count.

    ``result`` is anything exposing ``coefficients`` with ``post`` and
    ``post_x_log_mm`` entries. The percent change is a fraction,
    ``exp(effect) - 1``.
    """
    coefs = result.coefficients
    effect = coefs["post"] + coefs["post_x_log_mm"] * math.log1p(mmcnt)
    return effect, math.expm1(effect)


def effect_curve(result, mmcnt_grid, level: float = 0.95):
    """Event effect and its pointwise confidence band over a grid of maker counts.

    Returns an array with columns ``mmcnt, effect, lower, upper``.
    """
    from scipy import stats

    names = list(result.coefficients)
    i, j = names.index("post"), names.index("post_x_log_mm")
    cov = np.asarray(result.cov)
    crit = stats.t.ppf(0.5 + level / 2, result.df_resid)
    grid = np.asarray(mmcnt_grid, dtype=float)
    L = np.log1p(grid)
    eff = result.coefficients["post"] + result.coefficients["post_x_log_mm"] * L
    se = np.sqrt(cov[i, i] + 2 * L * cov[i, j] + L**2 * cov[j, j])
    return np.column_stack([grid, eff, eff - crit * se, eff + crit * se])
