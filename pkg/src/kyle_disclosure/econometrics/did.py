from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .estimators import ClusteredOLS, DidDesign

__all__ = ["RegressionResult", "fit_did", "did_target"]

LABELS = {
    "intercept": "Intercept",
    "post": "Post (beta1)",
    "log_mm": "log(1+MMCNT) (beta2)",
    "post_x_log_mm": "Post x log(1+MMCNT) (beta3)",
    "log_mktcap": "log(MktCap)",
    "log_volume": "log(Volume)",
    "volatility": "Volatility (20d)",
    "inv_price": "1/Price",
}


@dataclass(frozen=True)
class RegressionResult:
    coefficients: dict
    cluster_se: dict
    t_stats: dict
    p_values: dict
    r2: float
    n_obs: int
    n_clusters: int
    cov: np.ndarray
    df_resid: int

    def conf_int(self, level: float = 0.95) -> dict:
        from scipy import stats

        crit = stats.t.ppf(0.5 + level / 2, self.df_resid)
        return {k: (b - crit * self.cluster_se[k], b + crit * self.cluster_se[k]) for k, b in self.coefficients.items()}

    def to_dict(self) -> dict:
        return {
            "coefficients": self.coefficients,
            "cluster_se": self.cluster_se,
            "t": self.t_stats,
            "p": self.p_values,
            "r2": self.r2,
            "n_obs": self.n_obs,
            "n_clusters": self.n_clusters,
        }

    def to_json(self, indent=2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    def format_table(self) -> str:
        head = f"{'':<30}{'Coefficient':>12}{'Std. Error':>12}{'t-statistic':>13}{'p-value':>10}"
        lines = [head, "-" * len(head)]
        for k, b in self.coefficients.items():
            p = self.p_values[k]
            ptxt = "<0.001" if p < 0.001 else f"{p:.3f}"
            lines.append(
                f"{LABELS.get(k, k):<30}{b:>12.3f}{self.cluster_se[k]:>12.3f}{self.t_stats[k]:>13.2f}{ptxt:>10}"
            )
        lines += [
            "-" * len(head),
            f"{'Observations':<30}{self.n_obs:>12,d}",
            f"{'Clusters (stocks)':<30}{self.n_clusters:>12,d}",
            f"{'R^2':<30}{self.r2:>12.3f}",
        ]
        return "\n".join(lines)


def did_target(panel: pd.DataFrame) -> np.ndarray:
    spread = panel["spread"].to_numpy(dtype=float)
    if np.any(spread <= 0):
        raise ValueError("spreads must be positive before taking logs")
    return np.log(spread)


def fit_did(panel: pd.DataFrame, controls: bool = True, cov_type: str = "cluster") -> RegressionResult:
    """Regress log spread on the event dummy, competition and their interaction.

    Standard errors are clustered by ``stock_id``.
    """
    design = DidDesign(controls=controls).fit(panel)
    X = design.transform(panel)
    model = ClusteredOLS(cov_type=cov_type, feature_names=design.get_feature_names_out())
    model.fit(X, did_target(panel), groups=panel["stock_id"].to_numpy())
    names = model.param_names_

    def named(values):
        return {k: float(v) for k, v in zip(names, values)}

    return RegressionResult(
        coefficients=named(model.params_),
        cluster_se=named(model.bse_),
        t_stats=named(model.tvalues_),
        p_values=named(model.pvalues_),
        r2=float(model.rsquared_),
        n_obs=int(model.nobs_),
        n_clusters=int(model.n_clusters_),
        cov=model.cov_,
        df_resid=int(model.df_resid_),
    )
