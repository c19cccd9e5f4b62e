"""scikit-learn style wrappers around the RF fit and the two class detectors.

Count matrices passed to the classifiers are laid out the scikit-learn way:
one row per farm (sample) and one column per response class A..E. Predicted
labels are class codes 1..5.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_array, check_consistent_length, check_is_fitted

from .bayes import PriorMatrix, sbu_step
from .field import N_CLASSES, FrequencyTable, gateway_likelihood
from .kinetics import ACTIVE_REGION_DELTA, equilibrium_rf, fit_rf_model

CLASS_CODES = np.arange(1, N_CLASSES + 1)


class ResponseFactorRegressor(RegressorMixin, BaseEstimator):
    """Fit RF = A / (A + k_D) to (concentration, RF) pairs."""

    def __init__(self, delta: float = ACTIVE_REGION_DELTA, max_iter: int = 200, tol: float = 1e-12):
        self.delta = delta
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y):
        conc = _concentrations(X)
        y = check_array(y, ensure_2d=False, dtype=float)
        check_consistent_length(conc, y)
        fit = fit_rf_model(zip(conc, y), self.delta, self.max_iter, self.tol)
        self.k_D_ = fit.k_D_hat
        self.residual_sse_ = fit.residual_sse
        self.active_region_ = fit.active_region
        self.n_iter_ = fit.n_iter
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "k_D_")
        return equilibrium_rf(_concentrations(X), self.k_D_)


def _concentrations(X) -> np.ndarray:
    X = check_array(X, ensure_2d=False, dtype=float)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError("expected a single concentration column")
        X = X[:, 0]
    return X


def _counts(X) -> np.ndarray:
    X = check_array(X, dtype=np.int64)
    if X.shape[1] != N_CLASSES:
        raise ValueError(f"count matrices need {N_CLASSES} class columns, got {X.shape[1]}")
    if np.any(X < 0):
        raise ValueError("counts must be non-negative")
    return X


class SequentialBayesClassifier(ClassifierMixin, BaseEstimator):
    """Per-farm class posterior updated one count window at a time.

    ``partial_fit`` folds one (n_farms, 5) window into the running prior;
    ``fit`` starts from the uniform prior and folds a sequence of windows.
    ``predict_proba(X)`` reports the posterior after also observing ``X``
    without committing it.
    """

    def __init__(self, likelihood: str = "class-marginal"):
        self.likelihood = likelihood

    def _update(self, prior: PriorMatrix, X):
        table = FrequencyTable(_counts(X).T)
        return sbu_step(prior, gateway_likelihood(table, self.likelihood))

    def partial_fit(self, X, y=None):
        X = _counts(X)
        if not hasattr(self, "prior_"):
            self.prior_ = PriorMatrix.uniform(X.shape[0])
            self.classes_ = CLASS_CODES
            self.n_features_in_ = N_CLASSES
        elif X.shape[0] != self.prior_.probs.shape[1]:
            raise ValueError("number of farms changed between windows")
        posterior, self.prior_ = self._update(self.prior_, X)
        self.posterior_ = posterior.probs.T
        self.n_steps_ = self.prior_.step
        return self

    def fit(self, X, y=None):
        """``X``: array of shape (steps, n_farms, 5) or a list of windows."""
        for attr in ("prior_", "posterior_", "n_steps_"):
            self.__dict__.pop(attr, None)
        windows = list(X) if not isinstance(X, np.ndarray) or X.ndim == 3 else [X]
        if not windows:
            raise ValueError("need at least one count window")
        for window in windows:
            self.partial_fit(window)
        return self

    def predict_proba(self, X=None):
        check_is_fitted(self, "prior_")
        if X is None:
            return self.posterior_
        posterior, _ = self._update(self.prior_, X)
        return posterior.probs.T

    def predict(self, X=None):
        return self.classes_[self.predict_proba(X).argmax(axis=1)]


class CentralizedClassifier(ClassifierMixin, BaseEstimator):
    """Majority class of each farm's current window, no memory of earlier rounds."""

    def fit(self, X=None, y=None):
        self.classes_ = CLASS_CODES
        self.n_features_in_ = N_CLASSES
        return self

    def predict_proba(self, X):
        X = _counts(X).astype(float)
        total = X.sum(axis=1, keepdims=True)
        return np.divide(X, total, out=np.zeros_like(X), where=total > 0)

    def predict(self, X):
        return CLASS_CODES[_counts(X).argmax(axis=1)]
