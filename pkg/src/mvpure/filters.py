"""scikit-learn compatible wrappers around the MMSE, BLUE and MV-PURE estimators.

Observations are rows: ``Y`` has shape ``(n_samples, n)`` and ``transform``
returns the estimates ``Y @ W.T`` of shape ``(n_samples, m)``.

When both ``Rn`` and ``eps`` are given the filter is built from the exact
model and ``fit`` ignores ``Y``. Otherwise ``fit`` replaces the observation
covariance by the sample estimate ``Y.T @ Y / n_samples`` (zero-mean data
is assumed, no centering is done).

Example
-------
>>> f = MVPUREFilter(H, Rx=np.eye(m)).fit(Y_train)
>>> X_hat = f.transform(Y_test)
>>> f.rank_
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .estimators import (
    blue,
    blue_from_covariance,
    k_matrix,
    k_matrix_from_covariance,
    mmse,
    mmse_from_covariance,
    reduce_rank,
)
from .exceptions import InvalidInput
from .mimo import sample_covariance
from .model import StochasticLinearModel, validate
from .rank_analysis import rank_report_from_deltas


class _LinearEstimatorMixin(TransformerMixin, BaseEstimator):
    def _exact(self):
        return self.Rn is not None and self.eps is not None

    def _model(self):
        H = check_array(self.H, dtype=np.float64)
        Rx = np.eye(H.shape[1]) if self.Rx is None else check_array(self.Rx, dtype=np.float64)
        model = StochasticLinearModel(H, Rx, check_array(self.Rn, dtype=np.float64), self.eps)
        validate(model)
        return model

    def _observation_stats(self, Y):
        H = check_array(self.H, dtype=np.float64)
        if H.shape[0] < H.shape[1]:
            raise InvalidInput("H must have at least as many rows as columns")
        Rx = np.eye(H.shape[1]) if self.Rx is None else check_array(self.Rx, dtype=np.float64)
        if Y is None:
            raise InvalidInput("observations are required when Rn or eps is not given")
        Y = check_array(Y, dtype=np.float64)
        if Y.shape[1] != H.shape[0]:
            raise InvalidInput(f"Y has {Y.shape[1]} features, H has {H.shape[0]} rows")
        return H, Rx, sample_covariance(Y)

    def _finish(self, estimator):
        self.estimator_ = estimator
        self.coef_ = estimator.W
        self.n_features_in_ = estimator.W.shape[1]
        return self

    def transform(self, Y):
        """Return ``Y @ W.T``."""
        check_is_fitted(self, "coef_")
        Y = check_array(Y, dtype=np.float64)
        if Y.shape[1] != self.n_features_in_:
            raise InvalidInput(f"Y has {Y.shape[1]} features, expected {self.n_features_in_}")
        return Y @ self.coef_.T

    def predict(self, Y):
        return self.transform(Y)

    def score(self, Y, X):
        """Negative mean squared estimation error per sample (higher is better)."""
        X = check_array(X, dtype=np.float64)
        err = self.transform(Y) - X
        return -float(np.mean(np.sum(err * err, axis=1)))


class MMSEFilter(_LinearEstimatorMixin):
    """Wiener filter ``Rx H^t Ry^{-1}``.

    Parameters
    ----------
    H : array_like, shape (n, m)
    Rx : array_like, shape (m, m), optional
        Signal covariance; identity when omitted.
    Rn : array_like, shape (n, n), optional
    eps : float, optional
    """

    def __init__(self, H, Rx=None, Rn=None, eps=None):
        self.H = H
        self.Rx = Rx
        self.Rn = Rn
        self.eps = eps

    def fit(self, Y=None, y=None):
        if self._exact():
            return self._finish(mmse(self._model()))
        H, Rx, Ry = self._observation_stats(Y)
        return self._finish(mmse_from_covariance(H, Ry, Rx))


class BLUEFilter(_LinearEstimatorMixin):
    """Stochastic BLUE ``(H^t S^{-1} H)^{-1} H^t S^{-1}`` with ``S`` = ``Rn`` or ``Ry``.

    ``form`` picks the weighting on exact models; fitted from data the
    observation form is the only one available.
    """

    def __init__(self, H, Rx=None, Rn=None, eps=None, form="noise"):
        self.H = H
        self.Rx = Rx
        self.Rn = Rn
        self.eps = eps
        self.form = form

    def fit(self, Y=None, y=None):
        if self._exact():
            return self._finish(blue(self._model(), self.form))
        H, _, Ry = self._observation_stats(Y)
        return self._finish(blue_from_covariance(H, Ry))


class MVPUREFilter(_LinearEstimatorMixin):
    """Reduced-rank stochastic MV-PURE estimator.

    Parameters
    ----------
    H, Rx, Rn, eps
        As for :class:`MMSEFilter`.
    rank : int or 'auto'
        Fixed rank in ``1..m``, or ``'auto'`` for the largest index whose
        eigenvalue of ``K`` is negative (0 gives the zero estimator).
    form : {'noise', 'observation'}
        Expression of ``K`` used on exact models.

    Attributes
    ----------
    rank_ : int
    rank_report_ : RankReport
    spectrum_ : KSpectrum
    """

    def __init__(self, H, Rx=None, Rn=None, eps=None, rank="auto", form="noise"):
        self.H = H
        self.Rx = Rx
        self.Rn = Rn
        self.eps = eps
        self.rank = rank
        self.form = form

    def fit(self, Y=None, y=None):
        if self._exact():
            model = self._model()
            spectrum = k_matrix(model, self.form)
            W_blue = blue(model, self.form).W
            trace_rx = np.trace(model.Rx)
        else:
            H, Rx, Ry = self._observation_stats(Y)
            spectrum = k_matrix_from_covariance(H, Ry, Rx)
            W_blue = blue_from_covariance(H, Ry).W
            trace_rx = np.trace(Rx)
        self.spectrum_ = spectrum
        self.rank_report_ = rank_report_from_deltas(spectrum.deltas, trace_rx, eps=self.eps)
        if isinstance(self.rank, str):
            if self.rank != "auto":
                raise InvalidInput(f"rank must be an integer or 'auto', got {self.rank!r}")
            self.rank_ = self.rank_report_.r_opt
        else:
            self.rank_ = int(self.rank)
            if not 1 <= self.rank_ <= spectrum.m:
                raise InvalidInput(f"rank {self.rank_} outside [1, {spectrum.m}]")
        return self._finish(reduce_rank(W_blue, spectrum, self.rank_))
