"""Closed-form and gradient-descent baselines for the benchmark tables."""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import SingularSystem
from .nn.scaling import ColumnScaler


class LinearRegression(RegressorMixin, BaseEstimator):
    """Ordinary least squares with intercept via the normal equations."""

    def fit(self, X, y):
        X = check_array(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        A = np.column_stack([X, np.ones(X.shape[0])])
        if np.linalg.matrix_rank(A) < A.shape[1]:
            raise SingularSystem("design matrix is rank deficient")
        coef = np.linalg.solve(A.T @ A, A.T @ y)
        self.coef_, self.intercept_ = coef[:-1], coef[-1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        return X @ self.coef_ + self.intercept_


class RidgeRegression(RegressorMixin, BaseEstimator):
    """L2-penalised least squares; the intercept is not penalised."""

    def __init__(self, alpha=1.0):
        self.alpha = alpha

    def fit(self, X, y):
        X = check_array(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        xm, ym = X.mean(axis=0), y.mean(axis=0)
        Xc, yc = X - xm, y - ym
        G = Xc.T @ Xc + self.alpha * np.eye(X.shape[1])
        self.coef_ = np.linalg.solve(G, Xc.T @ yc)
        self.intercept_ = ym - xm @ self.coef_
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        return X @ self.coef_ + self.intercept_


class LogisticRegression(ClassifierMixin, BaseEstimator):
    """Binary logistic regression by full-batch gradient descent."""

    def __init__(self, learning_rate=0.5, n_iter=500, l2=0.0):
        self.learning_rate = learning_rate
        self.n_iter = n_iter
        self.l2 = l2

    def fit(self, X, y):
        X = check_array(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64).ravel()
        n, p = X.shape
        w = np.zeros(p)
        b = 0.0
        for _ in range(self.n_iter):
            z = X @ w + b
            prob = 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))
            g = prob - y
            w -= self.learning_rate * (X.T @ g / n + self.l2 * w)
            b -= self.learning_rate * g.mean()
        self.coef_, self.intercept_ = w, b
        self.classes_ = np.array([0.0, 1.0])
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        return check_array(X, dtype=np.float64) @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        p = 1.0 / (1.0 + np.exp(-np.clip(self.decision_function(X), -500, 500)))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(float)


def _informative(Xtr, Xte):
    keep = np.ptp(Xtr, axis=0) > 0
    sc = ColumnScaler("standardize").fit(Xtr[:, keep])
    return sc.transform(Xtr[:, keep]), sc.transform(Xte[:, keep])


def baseline_fit_predict(kind, train, test, alpha=0.5):
    """Fit a baseline on ``train = (X, y)`` and return its outputs on ``test`` features.

    Constant feature columns are dropped and the rest standardised first.
    ``logistic`` returns probabilities; ``ridge`` and ``linear`` return raw
    regression outputs (for 0/1 targets these act as scores).
    """
    Xtr, ytr = train
    Xtr, Xte = _informative(np.asarray(Xtr, float), np.asarray(test, float))
    if kind == "linear":
        est = LinearRegression()
    elif kind == "ridge":
        est = RidgeRegression(alpha)
    elif kind == "logistic":
        est = LogisticRegression()
        return est.fit(Xtr, ytr).predict_proba(Xte)[:, 1]
    else:
        raise ValueError(f"unknown baseline {kind!r}")
    return est.fit(Xtr, ytr).predict(Xte)
