"""Difference-in-differences tooling for the disclosure-by-competition prediction."""
from .dgp import PANEL_COLUMNS, DgpConfig, MmcntMixture, generate_panel
from .did import RegressionResult, did_target, fit_did
from .effects import effect_curve, model_implied_effect, total_effect
from .estimators import ClusteredOLS, CollinearityError, DidDesign, cluster_robust_cov
from .ingest import PanelFormatError, ingest_csv

__all__ = [
    "PANEL_COLUMNS",
    "DgpConfig",
    "MmcntMixture",
    "generate_panel",
    "RegressionResult",
    "did_target",
    "fit_did",
    "effect_curve",
    "model_implied_effect",
    "total_effect",
    "ClusteredOLS",
    "CollinearityError",
    "DidDesign",
    "cluster_robust_cov",
    "PanelFormatError",
    "ingest_csv",
]
