"""scikit-learn compatible pieces of the difference-in-differences pipeline."""
from __future__ import annotations

import numpy as np
import pandas as pd
from scipy import stats
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

__all__ = ["CollinearityError", "DidDesign", "ClusteredOLS", "cluster_robust_cov"]

DESIGN_COLUMNS = (
    "post",
    "log_mm",
    "post_x_log_mm",
    "log_mktcap",
    "log_volume",
    "volatility",
    "inv_price",
)


class CollinearityError(np.linalg.LinAlgError):
    """The design matrix is rank deficient."""


class DidDesign(TransformerMixin, BaseEstimator):
    """Turn a stock-day panel frame into the regression design.

    Columns are ``post, log(1 + mmcnt_bar), post * log(1 + mmcnt_bar),
    log(mktcap), log(volume), volatility, inv_price``; the intercept is left
    to the regressor.
    """

    def __init__(self, controls=True):
        self.controls = controls

    def fit(self, X, y=None):
        self._check_frame(X)
        self.feature_names_out_ = np.array(self._names(), dtype=object)
        self.n_features_in_ = len(self._required())
        return self

    def transform(self, X):
        check_is_fitted(self, "feature_names_out_")
        self._check_frame(X)
        post = X["post"].to_numpy(dtype=float)
        log_mm = np.log1p(X["mmcnt_bar"].to_numpy(dtype=float))
        cols = [post, log_mm, post * log_mm]
        if self.controls:
            cols += [
                np.log(X["mktcap"].to_numpy(dtype=float)),
                np.log(X["volume"].to_numpy(dtype=float)),
                X["volatility"].to_numpy(dtype=float),
                X["inv_price"].to_numpy(dtype=float),
            ]
        return np.column_stack(cols)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "feature_names_out_")
        return self.feature_names_out_

    def _names(self):
        return list(DESIGN_COLUMNS if self.controls else DESIGN_COLUMNS[:3])

    def _required(self):
        base = ["post", "mmcnt_bar"]
        return base + (["mktcap", "volume", "volatility", "inv_price"] if self.controls else [])

    def _check_frame(self, X):
        if not isinstance(X, pd.DataFrame):
            raise TypeError("DidDesign expects a pandas DataFrame of panel rows")
        missing = [c for c in self._required() if c not in X.columns]
        if missing:
            raise KeyError(f"panel is missing columns: {missing}")


def cluster_robust_cov(X, resid, groups, correction=True):
    """Liang-Zeger sandwich ``(X'X)^-1 (sum_g X_g' u_g u_g' X_g) (X'X)^-1``.

    With ``correction`` the CR1 factor ``G/(G-1) * (n-1)/(n-k)`` is applied.
    """
    X = np.asarray(X, dtype=float)
    resid = np.asarray(resid, dtype=float)
    n, k = X.shape
    codes, _ = pd.factorize(np.asarray(groups))
    G = codes.max() + 1
    if G < 2:
        raise ValueError("cluster-robust covariance needs at least two clusters")
    scores = np.zeros((G, k))
    np.add.at(scores, codes, X * resid[:, None])
    bread = np.linalg.inv(X.T @ X)
    cov = bread @ (scores.T @ scores) @ bread
    if correction:
        cov *= G / (G - 1) * (n - 1) / (n - k)
    return 0.5 * (cov + cov.T), G


def _collinear_columns(X, names, rtol=1e-10):
    """Names of columns that add nothing to the span of the columns before them."""
    scale = np.linalg.norm(X, axis=0)
    scale[scale == 0] = 1.0
    Xs = X / scale
    dropped, kept = [], []
    for j, name in enumerate(names):
        trial = Xs[:, kept + [j]]
        s = np.linalg.svd(trial, compute_uv=False)
        if s[-1] <= rtol * s[0]:
            dropped.append(name)
        else:
            kept.append(j)
    return dropped


class ClusteredOLS(RegressorMixin, BaseEstimator):
    """Pooled OLS with cluster-robust (or classical) inference.

    Parameters
    ----------
    fit_intercept : bool
        Prepend a constant column.
    cov_type : {"cluster", "classical"}
        ``"cluster"`` needs ``groups`` in :meth:`fit` and uses CR1 scaling
        with ``G - 1`` degrees of freedom for t tests.
    feature_names : sequence of str, optional
        Used in rank-deficiency errors and result tables.
    """

    def __init__(self, fit_intercept=True, cov_type="cluster", feature_names=None):
        self.fit_intercept = fit_intercept
        self.cov_type = cov_type
        self.feature_names = feature_names

    def _design(self, X):
        if self.fit_intercept:
            return np.column_stack([np.ones(X.shape[0]), X])
        return X

    def _names(self, k):
        names = list(self.feature_names) if self.feature_names is not None else [f"x{j}" for j in range(k)]
        return (["intercept"] + names) if self.fit_intercept else names

    def fit(self, X, y, groups=None):
        if self.cov_type not in ("cluster", "classical"):
            raise ValueError(f"unknown cov_type {self.cov_type!r}")
        X, y = check_X_y(X, y, y_numeric=True)
        self.n_features_in_ = X.shape[1]
        Z = self._design(X)
        n, k = Z.shape
        names = self._names(X.shape[1])
        if np.linalg.matrix_rank(Z) < k:
            bad = _collinear_columns(Z, names)
            raise CollinearityError(f"design matrix is rank deficient; collinear columns: {bad}")

        params, *_ = np.linalg.lstsq(Z, y, rcond=None)
        resid = y - Z @ params
        if self.cov_type == "cluster":
            if groups is None:
                raise ValueError("cov_type='cluster' requires groups")
            groups = np.asarray(groups)
            if groups.shape[0] != n:
                raise ValueError("groups must have one entry per observation")
            cov, G = cluster_robust_cov(Z, resid, groups)
            df = G - 1
        else:
            sigma2 = resid @ resid / (n - k)
            cov = sigma2 * np.linalg.inv(Z.T @ Z)
            G = len(np.unique(groups)) if groups is not None else n
            df = n - k

        bse = np.sqrt(np.diag(cov))
        tvalues = params / bse
        centered = y - y.mean()
        tss = centered @ centered
        self.params_ = params
        self.coef_ = params[1:] if self.fit_intercept else params
        self.intercept_ = params[0] if self.fit_intercept else 0.0
        self.cov_ = cov
        self.bse_ = bse
        self.tvalues_ = tvalues
        self.pvalues_ = 2 * stats.t.sf(np.abs(tvalues), df)
        self.df_resid_ = df
        self.rsquared_ = 1.0 - (resid @ resid) / tss if tss > 0 else 1.0
        self.nobs_ = n
        self.n_clusters_ = G
        self.param_names_ = names
        return self

    def predict(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X)
        return self._design(X) @ self.params_

    def conf_int(self, level=0.95):
        check_is_fitted(self, "params_")
        crit = stats.t.ppf(0.5 + level / 2, self.df_resid_)
        return np.column_stack([self.params_ - crit * self.bse_, self.params_ + crit * self.bse_])
