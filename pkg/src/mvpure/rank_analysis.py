"""Optimal-rank selection and noise-level rank predictions for MV-PURE.

Conventions: ``deltas`` (eigenvalues of ``K``) are ascending; ``upsilons``
(eigenvalues of ``H^t Rn^{-1} H``), ``gammas`` (eigenvalues of ``Rx``) and
``sigmas`` (eigenvalues of ``H^t Ry^{-1} H``) are descending. Ranks and
eigenvalue positions are 1-based in names and messages, 0-based in arrays.
"""

from dataclasses import dataclass, field

import numpy as np

from .estimators import TIE_TOL, k_matrix, mse_from_deltas
from .exceptions import InvalidInput, RankOutOfRange
from .linalg import as_matrix, is_symmetric, spd_solve, sym_eigvals
from .model import StochasticLinearModel, check_full_column_rank, validate


@dataclass(eq=False)
class RankReport:
    """Per-rank closed-form MSE and the optimal rank for one noise level.

    ``per_rank_mse[r - 1]`` is the MSE of the rank-``r`` estimator.
    ``r_opt`` is 0 when no delta is negative; ``degenerate_all_nonnegative``
    is then set. ``tie_at_boundary`` warns that the first nonnegative delta
    is numerically zero, so a perturbation could move ``r_opt``.
    """

    m: int
    deltas: np.ndarray
    per_rank_mse: np.ndarray
    r_opt: int
    degenerate_all_nonnegative: bool
    tie_at_boundary: bool
    trace_rx: float = 0.0
    eps: float = None
    sigma_tail: float = None

    @property
    def best_mse(self):
        if self.r_opt == 0:
            return self.trace_rx
        return float(self.per_rank_mse[self.r_opt - 1])

    def to_dict(self):
        return {
            "m": self.m,
            "eps": self.eps,
            "deltas": self.deltas.tolist(),
            "per_rank_mse": self.per_rank_mse.tolist(),
            "r_opt": self.r_opt,
            "degenerate_all_nonnegative": self.degenerate_all_nonnegative,
            "tie_at_boundary": self.tie_at_boundary,
            "sigma_tail": self.sigma_tail,
        }


@dataclass(eq=False)
class ThresholdCertificate:
    """Noise-power thresholds for rank ``r`` derived from Weyl bounds.

    For ``eps > benefit_threshold`` the rank-``r`` estimator beats every
    higher rank, BLUE included. For ``window_low < eps < window_high`` the
    optimal rank is exactly ``r``. Above ``global_threshold`` some reduced
    rank beats BLUE.
    """

    r: int
    benefit_threshold: float
    window_low: float
    window_high: float
    global_threshold: float
    upsilons: np.ndarray = field(repr=False)
    gammas: np.ndarray = field(repr=False)

    @property
    def window_empty(self):
        return not self.window_low < self.window_high

    def predicts_benefit(self, eps):
        return eps > self.benefit_threshold

    def in_window(self, eps):
        return self.window_low < eps < self.window_high

    def to_dict(self):
        return {
            "r": self.r,
            "benefit_threshold": self.benefit_threshold,
            "window_low": self.window_low,
            "window_high": self.window_high,
            "window_empty": self.window_empty,
            "global_threshold": self.global_threshold,
            "upsilons": self.upsilons.tolist(),
            "gammas": self.gammas.tolist(),
        }


def rank_report_from_deltas(deltas, trace_rx, eps=None, sigma_tail=None):
    deltas = np.asarray(deltas, dtype=np.float64)
    m = len(deltas)
    per_rank = np.array([mse_from_deltas(deltas, trace_rx, r) for r in range(1, m + 1)])
    negative = np.flatnonzero(deltas < 0)
    r_opt = int(negative[-1]) + 1 if negative.size else 0
    tie = False
    if r_opt < m:
        ref = abs(deltas[r_opt - 1]) if r_opt >= 1 else 0.0
        tie = bool(abs(deltas[r_opt]) <= TIE_TOL * (1.0 + ref))
    return RankReport(
        m=m,
        deltas=deltas,
        per_rank_mse=per_rank,
        r_opt=r_opt,
        degenerate_all_nonnegative=r_opt == 0,
        tie_at_boundary=tie,
        trace_rx=float(trace_rx),
        eps=eps,
        sigma_tail=sigma_tail,
    )


def optimal_rank(model, form="noise"):
    """Largest ``s`` with ``delta_s < 0``, plus the MSE of every rank."""
    spectrum = k_matrix(model, form)
    return rank_report_from_deltas(spectrum.deltas, np.trace(model.Rx), eps=model.eps)


def model_spectra(H, Rx, Rn):
    """Descending eigenvalues of ``H^t Rn^{-1} H`` and of ``Rx``."""
    H = as_matrix(H, "H")
    G = H.T @ spd_solve(Rn, H)
    upsilons = sym_eigvals(0.5 * (G + G.T))[::-1]
    gammas = sym_eigvals(as_matrix(Rx, "Rx", square=True))[::-1]
    return upsilons, gammas


def weyl_bounds(model, s):
    """Interval ``[eps/upsilon_s - gamma_1, eps/upsilon_s - gamma_m]`` holding ``delta_s``."""
    if not 1 <= s <= model.m:
        raise RankOutOfRange(f"eigenvalue index {s} outside [1, {model.m}]")
    upsilons, gammas = model_spectra(model.H, model.Rx, model.Rn)
    base = model.eps / upsilons[s - 1]
    return base - gammas[0], base - gammas[-1]


def thresholds_from_spectra(upsilons, gammas, r):
    """Build a :class:`ThresholdCertificate` from the two descending spectra."""
    upsilons = np.asarray(upsilons, dtype=np.float64)
    gammas = np.asarray(gammas, dtype=np.float64)
    m = len(upsilons)
    if len(gammas) != m:
        raise InvalidInput("upsilons and gammas must have the same length")
    if np.any(upsilons <= 0) or np.any(gammas <= 0):
        raise InvalidInput("upsilons and gammas must be positive")
    if np.any(np.diff(upsilons) > 0) or np.any(np.diff(gammas) > 0):
        raise InvalidInput("upsilons and gammas must be sorted descending")
    if not 1 <= r < m:
        raise RankOutOfRange(f"rank {r} outside [1, {m - 1}]")
    g_max, g_min = gammas[0], gammas[-1]
    low = float(upsilons[r] * g_max)
    return ThresholdCertificate(
        r=r,
        benefit_threshold=low,
        window_low=low,
        window_high=float(upsilons[r - 1] * g_min),
        global_threshold=float(upsilons[-1] * g_max),
        upsilons=upsilons,
        gammas=gammas,
    )


def noise_thresholds(H, Rx, Rn, r):
    """Threshold certificate for rank ``r`` of a model with unspecified noise power."""
    H = as_matrix(H, "H")
    check_full_column_rank(H)
    upsilons, gammas = model_spectra(H, Rx, Rn)
    return thresholds_from_spectra(upsilons, gammas, r)


def predict_rank_window(upsilons, gammas, eps):
    """Optimal rank implied by the Weyl windows alone, or ``None``.

    Returns ``m`` when ``eps < upsilon_m gamma_m`` (every delta negative),
    ``0`` when ``eps > upsilon_1 gamma_1`` (every delta positive), ``r`` when
    ``eps`` falls inside the window of rank ``r``, and ``None`` when ``eps``
    lies in a gap between windows.
    """
    upsilons = np.asarray(upsilons, dtype=np.float64)
    gammas = np.asarray(gammas, dtype=np.float64)
    m = len(upsilons)
    if eps < upsilons[-1] * gammas[-1]:
        return m
    if eps > upsilons[0] * gammas[0]:
        return 0
    for r in range(1, m):
        if thresholds_from_spectra(upsilons, gammas, r).in_window(eps):
            return r
    return None


@dataclass(eq=False)
class SigmaRule:
    """Outcome of the white-input rank rule: count of ``sigma_s > 0.5``."""

    rank: int
    sigmas: np.ndarray
    degenerate: bool

    def __int__(self):
        return self.rank

    @property
    def tail(self):
        """``sigma_{m-1}``, the second-smallest eigenvalue (``None`` if ``m < 2``)."""
        return float(self.sigmas[-2]) if len(self.sigmas) >= 2 else None


def sigma_spectrum(H, Ry):
    """Descending eigenvalues of ``H^t Ry^{-1} H``."""
    H = as_matrix(H, "H")
    G = H.T @ spd_solve(Ry, H)
    return sym_eigvals(0.5 * (G + G.T))[::-1]


def sigma_threshold_rank(H, Ry, Rx=None):
    """Optimal rank for white input from the eigenvalues of ``H^t Ry^{-1} H``.

    Valid only when ``Rx = I``; pass ``Rx`` to have that checked. ``Ry`` may
    be a sample covariance and ``H`` a perturbed model matrix.
    """
    if Rx is not None:
        Rx = as_matrix(Rx, "Rx", square=True)
        if not np.allclose(Rx, np.eye(Rx.shape[0]), rtol=0, atol=1e-12):
            raise InvalidInput("the 0.5-threshold rule requires Rx = I")
    sigmas = sigma_spectrum(H, Ry)
    rank = int(np.count_nonzero(sigmas > 0.5))
    return SigmaRule(rank=rank, sigmas=sigmas, degenerate=rank == 0)


def rank_profile(H, Rx, Rn, eps_list, form="noise"):
    """One :class:`RankReport` per noise power, each carrying ``sigma_{m-1}``.

    Parameters
    ----------
    eps_list : sequence of float
        Strictly increasing positive noise powers.
    """
    eps_list = [float(e) for e in eps_list]
    if not eps_list:
        raise InvalidInput("eps_list is empty")
    if any(e <= 0 for e in eps_list):
        raise InvalidInput("noise powers must be positive")
    if any(b <= a for a, b in zip(eps_list, eps_list[1:])):
        raise InvalidInput("noise powers must be strictly increasing")

    reports = []
    for eps in eps_list:
        model = StochasticLinearModel(H, Rx, Rn, eps)
        validate(model)
        report = optimal_rank(model, form)
        Ry = model.H @ model.Rx @ model.H.T + eps * model.Rn
        sigmas = sigma_spectrum(model.H, 0.5 * (Ry + Ry.T))
        if len(sigmas) >= 2:
            report.sigma_tail = float(sigmas[-2])
        reports.append(report)
    return reports


def is_white(Rx):
    Rx = np.asarray(Rx)
    return is_symmetric(Rx) and np.allclose(Rx, Rx[0, 0] * np.eye(Rx.shape[0]), rtol=0, atol=1e-12)
