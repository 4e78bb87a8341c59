"""MMSE, stochastic BLUE and reduced-rank MV-PURE linear estimators.

Every constructor returns an :class:`Estimator` holding the ``m x n``
matrix ``W`` that maps an observation ``y`` to the estimate ``W @ y``.
The ``*_from_covariance`` variants need only the model matrix and an
observation covariance, which is what a receiver has when the noise
statistics are unknown and ``Ry`` is replaced by a sample estimate.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatch, InvalidInput, RankOutOfRange
from .linalg import as_matrix, gram_inverse, spd_solve, sym_eig
from .model import derive_covariances

TIE_TOL = 1e-10

MMSE = "MMSE"
BLUE = "BLUE"
MVPURE = "MVPURE"

NOISE_FORM = "noise"
OBSERVATION_FORM = "observation"
_FORM_ALIASES = {
    "noise": NOISE_FORM,
    "n": NOISE_FORM,
    "noise-form": NOISE_FORM,
    "n-form": NOISE_FORM,
    "observation": OBSERVATION_FORM,
    "y": OBSERVATION_FORM,
    "observation-form": OBSERVATION_FORM,
    "y-form": OBSERVATION_FORM,
}


def _form(form):
    try:
        return _FORM_ALIASES[form]
    except KeyError:
        raise InvalidInput(f"unknown form {form!r}; use 'noise' or 'observation'") from None


@dataclass(frozen=True, eq=False)
class Estimator:
    """A linear estimator ``W`` together with how it was built.

    ``rank`` is set only for MV-PURE. ``non_unique`` flags an MV-PURE
    estimator whose rank cuts through a repeated eigenvalue of ``K``: any
    basis of the tied eigenspace gives the same MSE, the one returned is
    the eigensolver's deterministic choice.
    """

    W: np.ndarray
    kind: str
    rank: int = None
    non_unique: bool = False

    @property
    def label(self):
        return f"MV-PURE({self.rank})" if self.kind == MVPURE else self.kind

    def apply(self, Y):
        """Estimate ``x`` for each column of ``Y`` (or a single vector)."""
        return self.W @ np.asarray(Y, dtype=np.float64)

    def to_dict(self):
        return {
            "kind": self.kind,
            "rank": self.rank,
            "non_unique": self.non_unique,
            "W": self.W.tolist(),
        }


@dataclass(frozen=True, eq=False)
class KSpectrum:
    """The symmetric matrix ``K`` with ascending eigenvalues and eigenvectors."""

    K: np.ndarray
    deltas: np.ndarray
    E: np.ndarray

    @property
    def m(self):
        return self.K.shape[0]


def mmse(model):
    """Wiener filter ``Rx H^t (H Rx H^t + eps Rn)^{-1}``."""
    Ry = derive_covariances(model).Ry
    W = spd_solve(Ry, model.H @ model.Rx).T
    return Estimator(W, MMSE)


def mmse_from_covariance(H, Ry, Rx):
    """Wiener filter with a supplied observation covariance (``Rxy = Rx H^t``)."""
    H = as_matrix(H, "H")
    W = spd_solve(as_matrix(Ry, "Ry", square=True), H @ as_matrix(Rx, "Rx", square=True)).T
    return Estimator(W, MMSE)


def _blue_weighted(H, S):
    # (H^t S^-1 H)^-1 H^t S^-1
    SinvH = spd_solve(S, H)
    return gram_inverse(H, S) @ SinvH.T


def blue(model, form=NOISE_FORM):
    """Stochastic BLUE, the MSE minimizer subject to ``W H = I``.

    Parameters
    ----------
    model : StochasticLinearModel
    form : {'noise', 'observation'}
        Weight by ``Rn^{-1}`` or by ``Ry^{-1}``. Both give the same matrix on
        an exact model.
    """
    if _form(form) == NOISE_FORM:
        W = _blue_weighted(model.H, model.Rn)
    else:
        W = _blue_weighted(model.H, derive_covariances(model).Ry)
    return Estimator(W, BLUE)


def blue_from_covariance(H, Ry):
    """Observation-form BLUE from ``H`` and an observation covariance alone."""
    H = as_matrix(H, "H")
    return Estimator(_blue_weighted(H, as_matrix(Ry, "Ry", square=True)), BLUE)


def _spectrum(K):
    K = 0.5 * (K + K.T)
    values, vectors = sym_eig(K)
    return KSpectrum(K=K, deltas=values, E=vectors)


def k_matrix(model, form=NOISE_FORM):
    """Build ``K`` and its eigendecomposition.

    The observation form evaluates ``(H^t Ry^{-1} H)^{-1} - 2 Rx`` and the
    noise form ``eps (H^t Rn^{-1} H)^{-1} - Rx``; they coincide on exact
    models. The noise form avoids inverting a noise-dominated ``Ry`` and is
    the default.
    """
    if _form(form) == NOISE_FORM:
        K = model.eps * gram_inverse(model.H, model.Rn) - model.Rx
        return _spectrum(K)
    return k_matrix_from_covariance(model.H, derive_covariances(model).Ry, model.Rx)


def k_matrix_from_covariance(H, Ry, Rx):
    H = as_matrix(H, "H")
    Rx = as_matrix(Rx, "Rx", square=True)
    K = gram_inverse(H, as_matrix(Ry, "Ry", square=True)) - 2.0 * Rx
    return _spectrum(K)


def is_tied(deltas, r):
    """True when ``delta_r`` and ``delta_{r+1}`` (1-based) coincide within tolerance."""
    if r < 1 or r >= len(deltas):
        return False
    return bool(abs(deltas[r] - deltas[r - 1]) <= TIE_TOL * (1.0 + abs(deltas[r - 1])))


def _check_rank(r, m, allow_zero=False):
    if isinstance(r, bool) or int(r) != r:
        raise RankOutOfRange(f"rank must be an integer, got {r!r}")
    lo = 0 if allow_zero else 1
    if not lo <= r <= m:
        raise RankOutOfRange(f"rank {r} outside [{lo}, {m}]")
    return int(r)


def reduce_rank(W_blue, spectrum, r):
    """Project ``W_blue`` onto the eigenvectors of the ``r`` smallest deltas.

    ``r = m`` returns ``W_blue`` itself; ``r = 0`` returns the zero estimator,
    the convention used when no eigenvalue of ``K`` is negative.
    """
    m = spectrum.m
    r = _check_rank(r, m, allow_zero=True)
    if r == m:
        return Estimator(W_blue, MVPURE, rank=m)
    if r == 0:
        return Estimator(np.zeros_like(W_blue), MVPURE, rank=0)
    Er = spectrum.E[:, :r]
    W = Er @ (Er.T @ W_blue)
    return Estimator(W, MVPURE, rank=r, non_unique=is_tied(spectrum.deltas, r))


def mv_pure(model, r, form=NOISE_FORM):
    """Rank-``r`` stochastic MV-PURE estimator ``E_r E_r^t W_BLUE``.

    Raises
    ------
    RankOutOfRange
        ``r`` outside ``1..m``.
    """
    r = _check_rank(r, model.m)
    return reduce_rank(blue(model, form).W, k_matrix(model, form), r)


def mv_pure_from_covariance(H, Ry, Rx, r):
    """MV-PURE built from ``H``, an observation covariance and ``Rx``.

    ``r = 0`` is accepted and yields the zero estimator.
    """
    W_blue = blue_from_covariance(H, Ry).W
    return reduce_rank(W_blue, k_matrix_from_covariance(H, Ry, Rx), r)


def analytic_mse(model, estimator):
    """Exact MSE ``tr(W Ry W^t) - 2 tr(W Ryx) + tr(Rx)`` of any ``m x n`` matrix."""
    W = estimator.W if isinstance(estimator, Estimator) else np.asarray(estimator, dtype=np.float64)
    if W.shape != (model.m, model.n):
        raise DimensionMismatch(f"W must be {model.m}x{model.n}, got {W.shape}")
    Ry = derive_covariances(model).Ry
    Ryx = model.H @ model.Rx
    return float(np.sum((W @ Ry) * W) - 2.0 * np.sum(W * Ryx.T) + np.trace(model.Rx))


def mse_from_deltas(deltas, trace_rx, r):
    """Closed-form MV-PURE MSE: sum of the ``r`` smallest deltas plus ``tr(Rx)``."""
    return float(np.sum(deltas[:r]) + trace_rx)


def mv_pure_mse_closed(model, r, form=NOISE_FORM):
    r = _check_rank(r, model.m)
    return mse_from_deltas(k_matrix(model, form).deltas, np.trace(model.Rx), r)
