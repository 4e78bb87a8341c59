"""The stochastic linear model ``y = H x + sqrt(eps) n`` and its covariances."""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import (
    DimensionMismatch,
    InvalidInput,
    NonpositiveEps,
    NotSPD,
    RankDeficientH,
    TraceNotOne,
)
from .linalg import as_matrix, is_spd, sym_eigvals

RANK_TOL = 1e-10
TRACE_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class StochasticLinearModel:
    """Model matrix, signal and noise covariances, and noise power.

    Parameters
    ----------
    H : array_like, shape (n, m)
        Known model matrix of full column rank.
    Rx : array_like, shape (m, m)
        Covariance of the signal ``x``.
    Rn : array_like, shape (n, n)
        Covariance of the noise ``n``, normalized to unit trace.
    eps : float
        Noise power.

    Construction only coerces the inputs to float arrays; call
    :func:`validate` to check the model invariants.
    """

    H: np.ndarray
    Rx: np.ndarray
    Rn: np.ndarray
    eps: float

    def __post_init__(self):
        object.__setattr__(self, "H", as_matrix(self.H, "H"))
        object.__setattr__(self, "Rx", as_matrix(self.Rx, "Rx", square=True))
        object.__setattr__(self, "Rn", as_matrix(self.Rn, "Rn", square=True))
        eps = float(self.eps)
        if not np.isfinite(eps):
            raise InvalidInput("eps must be finite")
        object.__setattr__(self, "eps", eps)

    @property
    def n(self):
        return self.H.shape[0]

    @property
    def m(self):
        return self.H.shape[1]

    def with_eps(self, eps):
        return StochasticLinearModel(self.H, self.Rx, self.Rn, eps)

    def to_dict(self):
        return {
            "H": self.H.tolist(),
            "Rx": self.Rx.tolist(),
            "Rn": self.Rn.tolist(),
            "eps": self.eps,
        }

    @classmethod
    def from_dict(cls, data):
        missing = {"H", "Rx", "Rn", "eps"} - set(data)
        if missing:
            raise InvalidInput(f"model document lacks keys: {sorted(missing)}")
        return cls(data["H"], data["Rx"], data["Rn"], data["eps"])


@dataclass(frozen=True, eq=False)
class DerivedCovariances:
    Ry: np.ndarray
    Rxy: np.ndarray

    @property
    def Ryx(self):
        return self.Rxy.T


def check_full_column_rank(H, tol=RANK_TOL):
    """Raise RankDeficientH unless ``H`` (n >= m) has full column rank."""
    n, m = H.shape
    if n < m:
        raise RankDeficientH(f"H is {n}x{m}; need n >= m for rank m")
    lam = sym_eigvals(H.T @ H)
    sv = np.sqrt(np.clip(lam, 0.0, None))
    if sv[-1] == 0.0 or sv[0] <= tol * sv[-1]:
        raise RankDeficientH(
            f"H is rank deficient (singular value ratio {sv[0] / sv[-1] if sv[-1] else 0.0:.3e})"
        )


def validate(model):
    """Check every invariant of ``model``; return ``None`` when all hold.

    Raises
    ------
    DimensionMismatch
        Covariance sizes do not match ``H``.
    NonpositiveEps, RankDeficientH, NotSPD, TraceNotOne
        One per violated invariant, checked in that order.
    """
    n, m = model.H.shape
    if model.Rx.shape != (m, m):
        raise DimensionMismatch(f"Rx must be {m}x{m}, got {model.Rx.shape}")
    if model.Rn.shape != (n, n):
        raise DimensionMismatch(f"Rn must be {n}x{n}, got {model.Rn.shape}")
    if not model.eps > 0:
        raise NonpositiveEps(f"eps must be positive, got {model.eps}")
    check_full_column_rank(model.H)
    if not is_spd(model.Rx):
        raise NotSPD("Rx")
    if not is_spd(model.Rn):
        raise NotSPD("Rn")
    tr = np.trace(model.Rn)
    if abs(tr - 1.0) > TRACE_TOL:
        raise TraceNotOne(f"tr(Rn) = {tr!r}, expected 1")


def normalize_noise(Rn):
    """Scale ``Rn`` to unit trace. The noise power is not touched."""
    Rn = as_matrix(Rn, "Rn", square=True)
    return Rn / np.trace(Rn)


def derive_covariances(model):
    """Return ``Ry = H Rx H^t + eps Rn`` and ``Rxy = Rx H^t``."""
    H, Rx = model.H, model.Rx
    signal = H @ Rx @ H.T
    signal = 0.5 * (signal + signal.T)
    Ry = signal + model.eps * model.Rn
    return DerivedCovariances(Ry=0.5 * (Ry + Ry.T), Rxy=Rx @ H.T)


def load_model(path):
    """Read a model from a JSON file with keys ``H``, ``Rx``, ``Rn``, ``eps``.

    ``json.JSONDecodeError`` propagates for malformed files.
    """
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise InvalidInput("model document must be a JSON object")
    return StochasticLinearModel.from_dict(data)


def save_model(model, path):
    Path(path).write_text(json.dumps(model.to_dict(), indent=2))
