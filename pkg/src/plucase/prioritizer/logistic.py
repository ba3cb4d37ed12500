"""Logistic regression fitted by iteratively reweighted least squares."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..errors import ConstantOutcome, SeparationWarning
from .stats import wald_p_value

_EPS = np.finfo(float).eps


def _sigmoid(eta: np.ndarray) -> np.ndarray:
    out = np.empty_like(eta, dtype=float)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _deviance(y: np.ndarray, p: np.ndarray) -> float:
    p = np.clip(p, _EPS, 1 - _EPS)
    return float(-2.0 * np.sum(y * np.log(p) + (1 - y) * np.log1p(-p)))


class LogisticIRLS(ClassifierMixin, BaseEstimator):
    """Binary logistic regression with an unpenalized intercept.

    Stops when the deviance changes by less than ``tol`` or after
    ``max_iter`` Newton steps. A fit that does not converge, or produces a
    coefficient beyond ``coef_limit`` in absolute value, is treated as
    separated: coefficients are clipped, ``separated_`` is set and a
    SeparationWarning is emitted.

    Fitted attributes: ``coef_``, ``intercept_``, ``bse_``, ``z_``,
    ``p_values_`` (the last three with the intercept first), ``deviance_``,
    ``n_iter_``, ``converged_``, ``separated_``.
    """

    def __init__(self, max_iter: int = 25, tol: float = 1e-8, coef_limit: float = 10.0):
        self.max_iter = max_iter
        self.tol = tol
        self.coef_limit = coef_limit

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float, ensure_min_features=0, y_numeric=True)
        self.classes_ = np.unique(y)
        if len(self.classes_) < 2:
            raise ConstantOutcome(f"outcome is constant ({self.classes_.tolist()})")
        if not np.all(np.isin(self.classes_, (0.0, 1.0))):
            raise ValueError("outcome must be coded 0/1")
        self.n_features_in_ = X.shape[1]
        A = np.column_stack([np.ones(len(y)), X])
        beta = np.zeros(A.shape[1])
        p = _sigmoid(A @ beta)
        dev = _deviance(y, p)
        converged = False
        n_iter = 0
        for n_iter in range(1, self.max_iter + 1):
            w = np.maximum(p * (1 - p), 1e-12)
            H = A.T @ (A * w[:, None])
            g = A.T @ (y - p)
            try:
                step = np.linalg.solve(H, g)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(H, g, rcond=None)[0]
            beta = beta + step
            p = _sigmoid(A @ beta)
            new_dev = _deviance(y, p)
            if abs(new_dev - dev) < self.tol:
                dev = new_dev
                converged = True
                break
            dev = new_dev
        separated = (not converged) or bool(np.any(np.abs(beta) > self.coef_limit))
        if separated:
            beta = np.clip(beta, -self.coef_limit, self.coef_limit)
            p = _sigmoid(A @ beta)
            dev = _deviance(y, p)
            warnings.warn("logistic fit did not converge or hit the coefficient limit; "
                          "coefficients were clipped", SeparationWarning, stacklevel=2)
        w = np.maximum(p * (1 - p), 1e-12)
        H = A.T @ (A * w[:, None])
        try:
            cov = np.linalg.inv(H)
        except np.linalg.LinAlgError:
            cov = np.linalg.pinv(H)
        bse = np.sqrt(np.maximum(np.diag(cov), 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(bse > 0, beta / bse, 0.0)
        self.intercept_ = float(beta[0])
        self.coef_ = beta[1:].copy()
        self.bse_ = bse
        self.z_ = z
        self.p_values_ = np.array([wald_p_value(float(v)) for v in z])
        self.deviance_ = dev
        self.n_iter_ = n_iter
        self.converged_ = converged and not separated
        self.separated_ = separated
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=float, ensure_min_features=0)
        return self.intercept_ + X @ self.coef_

    def predict_proba(self, X):
        p = np.clip(_sigmoid(np.asarray(self.decision_function(X), dtype=float)), _EPS, 1 - _EPS)
        return np.column_stack([1 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)

    def score_residual(self, X, y) -> np.ndarray:
        """Score equations sum_i x_i (y_i - p_i), intercept first."""
        X, y = check_X_y(X, y, dtype=float, ensure_min_features=0)
        A = np.column_stack([np.ones(len(y)), X])
        return A.T @ (y - self.predict_proba(X)[:, 1])


@dataclass
class RegressionModel:
    """Serializable summary of a fitted model (``model.json``)."""

    factors: list[str]
    intercept: float
    coefficients: dict[str, float]
    standard_errors: dict[str, float]
    wald_z: dict[str, float]
    p_values: dict[str, float]
    converged: bool
    deviance: float
    retained_factors: list[str] = field(default_factory=list)
    alpha: float | None = None

    @property
    def odds_ratios(self) -> dict[str, float]:
        return {k: math.exp(v) for k, v in self.coefficients.items()}

    @classmethod
    def from_estimator(cls, est: LogisticIRLS, factors) -> "RegressionModel":
        names = ["intercept", *factors]
        return cls(list(factors), est.intercept_, dict(zip(factors, map(float, est.coef_))),
                   dict(zip(names, map(float, est.bse_))), dict(zip(names, map(float, est.z_))),
                   dict(zip(names, map(float, est.p_values_))), bool(est.converged_), float(est.deviance_))

    def to_dict(self) -> dict:
        d = self.__dict__.copy()
        d["odds_ratios"] = self.odds_ratios
        return d


@dataclass
class FactorSelection:
    full: LogisticIRLS
    full_summary: RegressionModel
    retained: list[str]
    refit: LogisticIRLS
    refit_summary: RegressionModel


def select_significant_factors(X, y, factors, alpha: float = 0.05, **params) -> FactorSelection:
    """Fit on every factor, keep those with Wald p < alpha, refit on them.

    The intercept is always kept and never tested.
    """
    X = np.asarray(X, dtype=float)
    factors = list(factors)
    full = LogisticIRLS(**params).fit(X, y)
    full_summary = RegressionModel.from_estimator(full, factors)
    retained = [f for f, p in zip(factors, full.p_values_[1:]) if p < alpha]
    cols = [factors.index(f) for f in retained]
    refit = LogisticIRLS(**params).fit(X[:, cols], y)
    refit_summary = RegressionModel.from_estimator(refit, retained)
    for s in (full_summary, refit_summary):
        s.retained_factors = list(retained)
        s.alpha = alpha
    return FactorSelection(full, full_summary, retained, refit, refit_summary)
