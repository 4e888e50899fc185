"""Scikit-learn style facade over the neural frailty training loop.

FrailtySurvivalRegressor follows the usual estimator contract: all
constructor arguments are stored verbatim, fit(X, y) learns the model,
and fitted state lives in trailing-underscore attributes.  y packs the
censored target as either a (n, 2) array of [time, event] columns or a
(times, events) pair of arrays.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import model as mdl
from .errors import SpecError
from .model import TrainConfig


def unpack_survival_target(y, n_rows):
    """Normalize y into (times, events) float/int arrays of length n_rows."""
    if isinstance(y, (tuple, list)) and len(y) == 2:
        times = np.asarray(y[0], dtype=np.float64)
        events = np.asarray(y[1])
    else:
        arr = np.asarray(y)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise SpecError(
                "y must be a (times, events) pair or an (n, 2) array of [time, event]"
            )
        times = arr[:, 0].astype(np.float64)
        events = arr[:, 1]
    events = np.asarray(events)
    if times.shape[0] != n_rows or events.shape[0] != n_rows:
        raise SpecError("target length does not match X")
    if not np.all(np.isin(events, (0, 1))):
        raise SpecError("event indicators must be 0 or 1")
    return times, events.astype(np.int64)


class FrailtySurvivalRegressor(BaseEstimator):
    """Survival regressor with a neural log hazard and random frailty.

    scheme "pf" uses two networks, one over time and one over the
    covariates, whose outputs add; scheme "fn" uses a single network
    over the joint (time, covariates) input.
    """

    def __init__(
        self,
        scheme="pf",
        frailty_family="gamma",
        theta_init=0.5,
        frailty_alpha=None,
        hidden=(32,),
        epochs=100,
        batch_size=128,
        learning_rate=1e-4,
        weight_decay=0.0,
        dropout_p=0.0,
        quad_order=16,
        tau=None,
        seed=0,
    ):
        self.scheme = scheme
        self.frailty_family = frailty_family
        self.theta_init = theta_init
        self.frailty_alpha = frailty_alpha
        self.hidden = hidden
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.dropout_p = dropout_p
        self.quad_order = quad_order
        self.tau = tau
        self.seed = seed

    def _config(self):
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            dropout_p=self.dropout_p,
            quad_order=self.quad_order,
            seed=self.seed,
            theta_init=self.theta_init,
            hidden=tuple(self.hidden),
            frailty_family=self.frailty_family,
            frailty_alpha=self.frailty_alpha,
            tau=self.tau,
        )

    def fit(self, X, y):
        X = check_array(X, dtype=np.float64)
        times, events = unpack_survival_target(y, X.shape[0])
        self.model_, self.trace_ = mdl.train(self.scheme, (times, events, X), self._config())
        self.n_features_in_ = X.shape[1]
        self.tau_ = self.model_.tau
        self.theta_ = self.model_.frailty.theta
        return self

    def _validate_predict_input(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise SpecError(
                f"X has {X.shape[1]} features, fit saw {self.n_features_in_}"
            )
        return X

    def predict_survival(self, X, times):
        """Survival probabilities, shape (n_rows, len(times))."""
        X = self._validate_predict_input(X)
        return mdl.survival_matrix(self.model_, X, np.asarray(times, dtype=np.float64))

    def predict_cumulative_hazard(self, X, times):
        X = self._validate_predict_input(X)
        surv = mdl.survival_matrix(self.model_, X, np.asarray(times, dtype=np.float64))
        return -np.log(np.maximum(surv, 1e-300))

    def predict_log_hazard(self, X, times):
        """Estimated log hazard on a time grid, shape (n_rows, len(times))."""
        X = self._validate_predict_input(X)
        times = np.atleast_1d(np.asarray(times, dtype=np.float64))
        out = np.empty((X.shape[0], times.size))
        for j, t in enumerate(times):
            out[:, j] = mdl.log_hazard(self.model_, np.full(X.shape[0], t), X)
        return out

    def predict(self, X):
        """Risk score: cumulative hazard at the study horizon (higher
        means shorter predicted survival)."""
        X = self._validate_predict_input(X)
        return self.predict_cumulative_hazard(X, [self.tau_])[:, 0]

    def score(self, X, y):
        """Mean per-sample observed log-likelihood (higher is better)."""
        X = self._validate_predict_input(X)
        times, events = unpack_survival_target(y, X.shape[0])
        return mdl.oll(self.model_, times, events, X)
