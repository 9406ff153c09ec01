"""Scikit-learn style wrappers around the samplers.

SsvsSelector and BayesianLassoSelector are feature selectors (fit on a
binary response, then transform to the selected columns);
ProbitMixedClassifier refits a fixed support and predicts. A categorical
`groups` argument to fit() introduces the random effect; without it the
model is a plain probit regression.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .blasso import LassoConfig, LassoHyper, run_lasso_chain
from .model import Dataset, RidgeHyper
from .postprocess import final_selection, full_rank_submatrix, lasso_select
from .ssvs import SsvsConfig, run_ssvs_chain


def _encode_response(y):
    classes = np.unique(y)
    if classes.size != 2:
        raise ValueError(f"expected a binary response, got {classes.size} classes")
    return classes, (y == classes[1]).astype(np.int64)


def _build_dataset(X, y01, groups):
    if groups is None:
        Z = np.zeros((X.shape[0], 0))
        block = []
        levels = None
    else:
        groups = np.asarray(groups)
        if groups.shape[0] != X.shape[0]:
            raise ValueError("groups must have one entry per row of X")
        levels, inverse = np.unique(groups, return_inverse=True)
        Z = np.zeros((X.shape[0], levels.size))
        Z[np.arange(X.shape[0]), inverse] = 1.0
        block = [levels.size]
    return Dataset(X=X, Z=Z, Y=y01, block_sizes=block), levels


class SsvsSelector(SelectorMixin, BaseEstimator):
    """Stochastic-search variable selector for binary responses.

    Runs one SSVS chain on the training data and keeps the variables chosen
    by the requested post-processing rule ("gap" by default).
    """

    def __init__(self, tau0=50.0, expected_model_size=5.0, epsilon=0.0,
                 ig_shape=1.0, ig_scale=1.0, burn_in=1000, post_burn_in=4000,
                 mh_inner_iters=500, flip_count=1, init_model_size=5,
                 selection_mode="gap", threshold=None, random_state=0):
        self.tau0 = tau0
        self.expected_model_size = expected_model_size
        self.epsilon = epsilon
        self.ig_shape = ig_shape
        self.ig_scale = ig_scale
        self.burn_in = burn_in
        self.post_burn_in = post_burn_in
        self.mh_inner_iters = mh_inner_iters
        self.flip_count = flip_count
        self.init_model_size = init_model_size
        self.selection_mode = selection_mode
        self.threshold = threshold
        self.random_state = random_state

    def fit(self, X, y, groups=None):
        X, y = check_X_y(X, y)
        classes, y01 = _encode_response(y)
        data, _ = _build_dataset(X, y01, groups)
        hyper = RidgeHyper.calibrated(
            data,
            tau0=self.tau0,
            expected_model_size=self.expected_model_size,
            epsilon=self.epsilon,
            ig_shape=self.ig_shape,
            ig_scale=self.ig_scale,
        )
        config = SsvsConfig(
            hyper=hyper,
            burn_in=self.burn_in,
            post_burn_in=self.post_burn_in,
            mh_inner_iters=self.mh_inner_iters,
            flip_count=self.flip_count,
            init_model_size=min(self.init_model_size, data.p),
            seed=int(self.random_state or 0),
        )
        output = run_ssvs_chain(data, config)
        result = final_selection(
            output.selection_counts, mode=self.selection_mode,
            threshold=self.threshold,
        )
        self.classes_ = classes
        self.n_features_in_ = data.p
        self.selection_counts_ = output.selection_counts
        self.acceptance_rate_ = output.acceptance_rate
        self.chain_output_ = output
        self.selection_ = result
        mask = np.zeros(data.p, dtype=bool)
        mask[sorted(result.selected)] = True
        self.support_mask_ = mask
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "support_mask_")
        return self.support_mask_


class BayesianLassoSelector(SelectorMixin, BaseEstimator):
    """Bayesian Lasso variable selector (shrinkage baseline)."""

    def __init__(self, e=1.0, f=1.0, ig_shape=1.0, ig_scale=1.0,
                 burn_in=5000, post_burn_in=15000, rule="beta_magnitude",
                 threshold=0.85, ci_level=0.95, random_state=0):
        self.e = e
        self.f = f
        self.ig_shape = ig_shape
        self.ig_scale = ig_scale
        self.burn_in = burn_in
        self.post_burn_in = post_burn_in
        self.rule = rule
        self.threshold = threshold
        self.ci_level = ci_level
        self.random_state = random_state

    def fit(self, X, y, groups=None):
        X, y = check_X_y(X, y)
        classes, y01 = _encode_response(y)
        data, _ = _build_dataset(X, y01, groups)
        config = LassoConfig(
            hyper=LassoHyper(e=self.e, f=self.f, ig_shape=self.ig_shape,
                             ig_scale=self.ig_scale),
            burn_in=self.burn_in,
            post_burn_in=self.post_burn_in,
            ci_level=self.ci_level,
            seed=int(self.random_state or 0),
        )
        output = run_lasso_chain(data, config)
        threshold = None if self.rule == "credible_interval" else self.threshold
        result = lasso_select(output, self.rule, threshold)
        self.classes_ = classes
        self.n_features_in_ = data.p
        self.beta_mean_ = output.beta_mean
        self.lambda_mean_ = output.lambda_mean
        self.chain_output_ = output
        self.selection_ = result
        mask = np.zeros(data.p, dtype=bool)
        mask[sorted(result.selected)] = True
        self.support_mask_ = mask
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "support_mask_")
        return self.support_mask_


class ProbitMixedClassifier(ClassifierMixin, BaseEstimator):
    """Fixed-support Bayesian probit (mixed) classifier.

    Reduces the given columns to a full-rank subset, runs the Gibbs
    machinery with the support frozen, and predicts with posterior-mean
    coefficients: yhat = 1{Phi(x beta + z U) > 0.5}. Pass the same kind of
    `groups` labels to fit and predict; unseen groups predict with a zero
    random effect.
    """

    def __init__(self, tau0=50.0, epsilon=0.0, ig_shape=1.0, ig_scale=1.0,
                 burn_in=500, post_burn_in=2000, random_state=0):
        self.tau0 = tau0
        self.epsilon = epsilon
        self.ig_shape = ig_shape
        self.ig_scale = ig_scale
        self.burn_in = burn_in
        self.post_burn_in = post_burn_in
        self.random_state = random_state

    def fit(self, X, y, groups=None):
        X, y = check_X_y(X, y)
        classes, y01 = _encode_response(y)
        kept = full_rank_submatrix(X)
        if not kept:
            raise ValueError("X has no nonzero column to fit on")
        data, levels = _build_dataset(X[:, kept], y01, groups)
        hyper = RidgeHyper.calibrated(
            data, tau0=self.tau0, expected_model_size=len(kept) / 2.0,
            epsilon=self.epsilon, ig_shape=self.ig_shape, ig_scale=self.ig_scale,
        )
        config = SsvsConfig(
            hyper=hyper,
            burn_in=self.burn_in,
            post_burn_in=self.post_burn_in,
            mh_inner_iters=1,
            flip_count=0,
            init_gamma=np.arange(data.p),
            seed=int(self.random_state or 0),
        )
        output = run_ssvs_chain(data, config)
        self.classes_ = classes
        self.n_features_in_ = X.shape[1]
        self.kept_columns_ = np.asarray(kept, dtype=int)
        self.coef_ = output.beta_mean
        self.group_levels_ = levels
        self.group_effects_ = (
            output.u_trace.mean(axis=0) if data.q else np.zeros(0)
        )
        return self

    def decision_function(self, X, groups=None):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        scores = X[:, self.kept_columns_] @ self.coef_
        if groups is not None and self.group_levels_ is not None:
            groups = np.asarray(groups)
            for level, effect in zip(self.group_levels_, self.group_effects_):
                scores = scores + np.where(groups == level, effect, 0.0)
        return scores

    def predict_proba(self, X, groups=None):
        prob1 = ndtr(self.decision_function(X, groups))
        return np.column_stack([1.0 - prob1, prob1])

    def predict(self, X, groups=None):
        prob1 = self.predict_proba(X, groups)[:, 1]
        return self.classes_[(prob1 > 0.5).astype(int)]
