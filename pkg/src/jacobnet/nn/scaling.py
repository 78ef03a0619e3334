"""Column scalers fit on the training split only."""

import warnings

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ..exceptions import DegenerateColumn


class ColumnScaler(TransformerMixin, BaseEstimator):
    """Standardise columns or min-max map them onto ``feature_range``.

    Constant columns are left untouched and flagged in ``degenerate_``.  A
    column counts as constant when its spread is at most ``rtol`` times its
    magnitude, so round-off noise around a structural constant is not
    blown up to unit scale.
    """

    def __init__(self, kind="standardize", feature_range=(-1.0, 1.0), rtol=1e-9):
        self.kind = kind
        self.feature_range = feature_range
        self.rtol = rtol

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64, ensure_all_finite=True)
        if X.shape[0] < 2:
            raise ValueError("scaler needs at least 2 rows")
        floor = self.rtol * np.maximum(1.0, np.abs(X).max(axis=0))
        if self.kind == "standardize":
            center = X.mean(axis=0)
            spread = X.std(axis=0)
            degenerate = ~(spread > floor)
            scale = np.where(degenerate, 1.0, spread)
            offset = np.where(degenerate, 0.0, center)
            self.mean_, self.std_ = center, spread
            # x' = (x - offset) / scale
            self.offset_, self.scale_, self.out_lo_ = offset, scale, np.zeros_like(center)
        elif self.kind == "minmax":
            lo, hi = map(float, self.feature_range)
            if not lo < hi:
                raise ValueError("feature_range must be increasing")
            dmin, dmax = X.min(axis=0), X.max(axis=0)
            degenerate = ~(dmax - dmin > floor)
            self.data_min_, self.data_max_ = dmin, dmax
            self.offset_ = np.where(degenerate, 0.0, dmin)
            self.scale_ = np.where(degenerate, 1.0, (dmax - dmin) / (hi - lo))
            self.out_lo_ = np.where(degenerate, 0.0, lo)
        else:
            raise ValueError(f"unknown scaler kind {self.kind!r}")
        self.degenerate_ = degenerate
        self.n_features_in_ = X.shape[1]
        if degenerate.any():
            warnings.warn(
                f"{int(degenerate.sum())} constant column(s) passed through unscaled",
                DegenerateColumn,
                stacklevel=2,
            )
        return self

    def _check(self, X):
        check_is_fitted(self, "scale_")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns, got shape {X.shape}")
        return X

    def transform(self, X):
        X = self._check(X)
        return (X - self.offset_) / self.scale_ + self.out_lo_

    def inverse_transform(self, X):
        X = self._check(X)
        return (X - self.out_lo_) * self.scale_ + self.offset_

    def get_state(self):
        return {"offset": self.offset_, "scale": self.scale_, "out_lo": self.out_lo_,
                "degenerate": self.degenerate_.astype(float)}

    @classmethod
    def from_state(cls, kind, feature_range, state):
        sc = cls(kind, tuple(feature_range))
        sc.offset_ = np.asarray(state["offset"], dtype=float)
        sc.scale_ = np.asarray(state["scale"], dtype=float)
        sc.out_lo_ = np.asarray(state["out_lo"], dtype=float)
        sc.degenerate_ = np.asarray(state["degenerate"]) > 0
        sc.n_features_in_ = sc.offset_.size
        return sc


def fit_scaler(kind, X, feature_range=(-1.0, 1.0)):
    return ColumnScaler(kind, feature_range).fit(X)
