"""Monte-Carlo MIMO experiments: complex channel, QPSK source, real lifting.

A complex model ``y_c = H_c x_c + sqrt(eps) n_c`` is estimated through its
real-valued representation of twice the dimension. Random draws come from
counter-based streams keyed by ``(seed, index)`` so any block can be
regenerated independently of the others.
"""

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .estimators import (
    analytic_mse,
    blue,
    blue_from_covariance,
    k_matrix,
    mmse,
    mmse_from_covariance,
    mv_pure_from_covariance,
    reduce_rank,
)
from .exceptions import (
    DimensionMismatch,
    EmptyInput,
    InvalidInput,
    MVPureError,
    NotPositiveDefinite,
)
from .model import StochasticLinearModel, validate
from .rank_analysis import (
    model_spectra,
    predict_rank_window,
    rank_report_from_deltas,
    sigma_spectrum,
    sigma_threshold_rank,
)

QPSK = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j])
DEFAULT_SNR_DB = (-4.0, -2.0, 0.0, 2.0, 4.0, 6.0, 8.0)
KNOWLEDGE_MODES = ("exact", "empirical")
CSV_HEADER = ("snr_db", "estimator", "knowledge", "rank", "sample_mse_db", "analytic_mse_db", "sigma_tail")

_NOISE_COV_STREAM = 0xC0FFEE


def _rng(seed, index):
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, int(index)])


def _complex_gaussian(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def eps_from_snr(snr_db, sigma_h2=1.0):
    """Noise power for an SNR in dB, with unit-trace noise covariance."""
    return sigma_h2 / 10.0 ** (snr_db / 10.0)


def snr_from_eps(eps, sigma_h2=1.0):
    return 10.0 * math.log10(sigma_h2 / eps)


def as_complex_matrix(a, name="matrix"):
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim != 2 or arr.size == 0:
        raise InvalidInput(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{name} contains non-finite entries")
    return arr


def realify_matrix(Hc):
    """``[[Re Hc, -Im Hc], [Im Hc, Re Hc]]``."""
    Hc = as_complex_matrix(Hc, "Hc")
    return np.block([[Hc.real, -Hc.imag], [Hc.imag, Hc.real]])


def realify_vector(v):
    """Stack real over imaginary parts along the last axis."""
    v = np.asarray(v, dtype=np.complex128)
    return np.concatenate([v.real, v.imag], axis=-1)


def realify_covariance(Rc):
    """Covariance of ``[Re n; Im n]`` for circular ``n`` with covariance ``Rc``.

    Equals ``0.5 * blockdiag(Rc, Rc)`` when ``Rc`` is real.
    """
    return 0.5 * realify_matrix(Rc)


def lift_estimate_to_complex(x_hat_real):
    """Map a real estimate ``[Re; Im]`` (length ``2M``) back to ``C^M``.

    Works row-wise on 2-D input.
    """
    x = np.asarray(x_hat_real, dtype=np.float64)
    length = x.shape[-1]
    if length % 2:
        raise InvalidInput(f"real estimate has odd length {length}")
    M = length // 2
    return x[..., :M] + 1j * x[..., M:]


def _check_noise_covariance(Rnc, N=None):
    Rnc = as_complex_matrix(Rnc, "Rnc")
    if Rnc.shape[0] != Rnc.shape[1]:
        raise InvalidInput(f"Rnc must be square, got {Rnc.shape}")
    if N is not None and Rnc.shape[0] != N:
        raise DimensionMismatch(f"Rnc must be {N}x{N}, got {Rnc.shape}")
    if np.max(np.abs(Rnc - Rnc.conj().T)) > 1e-10 * np.max(np.abs(Rnc)):
        raise InvalidInput("Rnc is not Hermitian")
    return 0.5 * (Rnc + Rnc.conj().T)


def realify(Hc, Rnc, M, eps):
    """Real-valued model of the complex MIMO link with white unit-power input."""
    Hc = as_complex_matrix(Hc, "Hc")
    N = Hc.shape[0]
    if Hc.shape[1] != M:
        raise DimensionMismatch(f"Hc has {Hc.shape[1]} columns, expected M={M}")
    Rnc = _check_noise_covariance(Rnc, N)
    return StochasticLinearModel(
        H=realify_matrix(Hc),
        Rx=np.eye(2 * M),
        Rn=realify_covariance(Rnc),
        eps=eps,
    )


def gen_channel(N, M, seed, attempt=0):
    """``N x M`` channel of i.i.d. unit-variance circular Gaussian entries."""
    return _complex_gaussian(_rng(seed, attempt), (N, M))


def gen_qpsk_block(M, seed, q):
    """``M`` QPSK symbols for block ``q``, drawn uniformly from ``{+-1 +- i}``."""
    bits = _rng(seed, q).integers(0, 2, size=(2, M))
    return (1.0 - 2.0 * bits[0]) + 1j * (1.0 - 2.0 * bits[1])


def gen_qpsk_blocks(M, seed, Q):
    """Blocks ``0..Q-1`` stacked as rows."""
    return np.array([gen_qpsk_block(M, seed, q) for q in range(Q)]).reshape(Q, M)


def _noise_factor(Rnc):
    try:
        return np.linalg.cholesky(Rnc)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("Rnc is not positive definite") from exc


def gen_noise_block(Rnc, seed, q):
    """Circular Gaussian vector with covariance ``Rnc`` for block ``q``."""
    L = _noise_factor(_check_noise_covariance(Rnc))
    return L @ _complex_gaussian(_rng(seed, q), L.shape[0])


def gen_noise_blocks(Rnc, seed, Q):
    L = _noise_factor(_check_noise_covariance(Rnc))
    W = np.array([_complex_gaussian(_rng(seed, q), L.shape[0]) for q in range(Q)])
    return W.reshape(Q, L.shape[0]) @ L.T


def perturb_channel(Hc, variance, seed):
    """Add i.i.d. circular Gaussian errors of the given variance to ``Hc``."""
    Hc = as_complex_matrix(Hc, "Hc")
    if variance < 0:
        raise InvalidInput("perturbation variance must be nonnegative")
    if variance == 0:
        return Hc.copy()
    return Hc + math.sqrt(variance) * _complex_gaussian(_rng(seed, 0), Hc.shape)


def default_noise_covariance(N, seed):
    """Unit-trace ``F F^* + 0.1 I`` with ``F`` a seeded complex Gaussian matrix."""
    F = _complex_gaussian(_rng(seed, _NOISE_COV_STREAM), (N, N))
    R = F @ F.conj().T + 0.1 * np.eye(N)
    R = 0.5 * (R + R.conj().T)
    return R / np.trace(R).real


def sample_covariance(y_blocks):
    """``(1/Q) sum_q y_q y_q^t`` over the rows (or list entries) of ``y_blocks``."""
    if len(y_blocks) == 0:
        raise EmptyInput("no observation blocks")
    try:
        Y = np.asarray(y_blocks, dtype=np.float64)
    except ValueError as exc:
        raise DimensionMismatch("observation blocks differ in length") from exc
    if Y.ndim == 1:
        Y = Y[None, :]
    if Y.ndim != 2:
        raise DimensionMismatch("observation blocks differ in length")
    R = Y.T @ Y / Y.shape[0]
    return 0.5 * (R + R.T)


def sample_mse(estimates, truths):
    """Average squared complex Euclidean error over blocks."""
    est = np.asarray(estimates, dtype=np.complex128)
    tru = np.asarray(truths, dtype=np.complex128)
    if est.shape != tru.shape:
        raise DimensionMismatch(f"shapes differ: {est.shape} vs {tru.shape}")
    if est.ndim == 1:
        est, tru = est[None, :], tru[None, :]
    if est.shape[0] == 0:
        raise EmptyInput("no blocks")
    return float(np.mean(np.sum(np.abs(est - tru) ** 2, axis=1)))


def to_db(value):
    return 10.0 * math.log10(value) if value > 0 else float("-inf")


@dataclass
class MimoScenario:
    """Settings of one MSE-vs-SNR experiment.

    ``Rnc=None`` selects :func:`default_noise_covariance` seeded by the noise
    seed. ``condition_target`` redraws the channel until the smallest
    eigenvalue of the lifted ``H^t Rn^{-1} H`` falls below it.
    """

    N: int = 8
    M: int = 8
    snr_db_grid: tuple = DEFAULT_SNR_DB
    Q: int = 200
    channel_seed: int = 0
    noise_seed: int = 1
    symbol_seed: int = 2
    perturb_seed: int = 3
    perturb_variance: float = 1e-4
    Rnc: np.ndarray = None
    condition_target: float = None
    max_channel_draws: int = 10_000
    all_ranks: bool = False
    sigma_h2: float = 1.0

    def __post_init__(self):
        if self.N < 1 or self.M < 1:
            raise InvalidInput("antenna counts must be positive")
        if self.N < self.M:
            raise InvalidInput("need N >= M for a full-column-rank channel")
        if self.Q < 1:
            raise InvalidInput("Q must be at least 1")
        if self.perturb_variance < 0:
            raise InvalidInput("perturb_variance must be nonnegative")
        self.snr_db_grid = tuple(float(s) for s in self.snr_db_grid)
        if not self.snr_db_grid:
            raise InvalidInput("snr_db_grid is empty")
        if self.Rnc is not None:
            Rnc = _check_noise_covariance(self.Rnc, self.N)
            if abs(np.trace(Rnc).real - 1.0) > 1e-10:
                raise InvalidInput("tr(Rnc) must equal 1")
            self.Rnc = Rnc

    def noise_covariance(self):
        if self.Rnc is not None:
            return self.Rnc
        return default_noise_covariance(self.N, self.noise_seed)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        seeds = data.pop("seeds", {}) or {}
        kwargs = {f"{k}_seed": v for k, v in seeds.items() if k in ("channel", "noise", "symbol", "perturb")}
        unknown = set(seeds) - {"channel", "noise", "symbol", "perturb"}
        if unknown:
            raise InvalidInput(f"unknown seed names: {sorted(unknown)}")
        rnc = data.pop("Rnc", None)
        if rnc is not None:
            arr = np.asarray(rnc, dtype=np.float64)
            if arr.ndim != 3 or arr.shape[-1] != 2:
                raise InvalidInput("Rnc must be nested [re, im] pairs")
            kwargs["Rnc"] = arr[..., 0] + 1j * arr[..., 1]
        allowed = set(cls.__dataclass_fields__) - {"Rnc"}
        unknown = set(data) - allowed
        if unknown:
            raise InvalidInput(f"unknown scenario keys: {sorted(unknown)}")
        kwargs.update(data)
        return cls(**kwargs)

    def to_dict(self):
        out = {
            "N": self.N,
            "M": self.M,
            "snr_db_grid": list(self.snr_db_grid),
            "Q": self.Q,
            "seeds": {
                "channel": self.channel_seed,
                "noise": self.noise_seed,
                "symbol": self.symbol_seed,
                "perturb": self.perturb_seed,
            },
            "perturb_variance": self.perturb_variance,
        }
        if self.Rnc is not None:
            out["Rnc"] = np.stack([self.Rnc.real, self.Rnc.imag], axis=-1).tolist()
        if self.condition_target is not None:
            out["condition_target"] = self.condition_target
        if self.all_ranks:
            out["all_ranks"] = True
        return out


def load_scenario(path):
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise InvalidInput("scenario document must be a JSON object")
    return MimoScenario.from_dict(data)


@dataclass(frozen=True)
class ResultRow:
    snr_db: float
    estimator: str
    knowledge: str
    rank: int
    sample_mse_db: float
    analytic_mse_db: float
    sigma_tail: float


@dataclass
class SnrPoint:
    """Per-SNR bookkeeping: selected rank, tracked eigenvalue, failures."""

    snr_db: float
    eps: float
    knowledge: str
    rank: int = None
    sigma_tail: float = None
    predicted_rank: int = None
    error: str = None


@dataclass
class SimulationResult:
    scenario: MimoScenario
    Hc: np.ndarray
    channel_draws: int
    upsilons: np.ndarray
    rows: list = field(default_factory=list)
    points: list = field(default_factory=list)

    def select(self, estimator=None, knowledge=None):
        return [
            r
            for r in self.rows
            if (estimator is None or r.estimator == estimator)
            and (knowledge is None or r.knowledge == knowledge)
        ]

    def series(self, estimator, knowledge, column="sample_mse_db"):
        """``(snr_db, value)`` pairs for one estimator in grid order."""
        return [(r.snr_db, getattr(r, column)) for r in self.select(estimator, knowledge)]

    def sigma_tails(self, knowledge):
        return [(p.snr_db, p.sigma_tail) for p in self.points if p.knowledge == knowledge and p.error is None]

    @property
    def failures(self):
        return [p for p in self.points if p.error is not None]

    def to_csv(self, fh=None):
        """Write the result table; returns the text when ``fh`` is None."""
        out = io.StringIO() if fh is None else fh
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in self.rows:
            writer.writerow(
                [
                    _fmt(r.snr_db),
                    r.estimator,
                    r.knowledge,
                    "" if r.rank is None else r.rank,
                    _fmt(r.sample_mse_db),
                    _fmt(r.analytic_mse_db),
                    _fmt(r.sigma_tail),
                ]
            )
        return out.getvalue() if fh is None else None


def _fmt(x):
    if x is None:
        return ""
    return repr(float(x))


def _thread_count():
    try:
        return max(1, int(os.environ.get("MVPURE_THREADS", "1")))
    except ValueError:
        return 1


def draw_channel(scenario, Rnc=None):
    """Channel realization honoring ``condition_target``; returns ``(Hc, draws, upsilons)``."""
    Rnc = scenario.noise_covariance() if Rnc is None else Rnc
    Rn = realify_covariance(Rnc)
    for attempt in range(scenario.max_channel_draws):
        Hc = gen_channel(scenario.N, scenario.M, scenario.channel_seed, attempt)
        upsilons, _ = model_spectra(realify_matrix(Hc), np.eye(2 * scenario.M), Rn)
        if scenario.condition_target is None or upsilons[-1] < scenario.condition_target:
            return Hc, attempt + 1, upsilons
    raise InvalidInput(
        f"no channel draw met condition_target={scenario.condition_target} "
        f"in {scenario.max_channel_draws} attempts"
    )


def _evaluate(W, X_real, X, Y_real, truth_model):
    estimates = lift_estimate_to_complex(Y_real @ W.T)
    return to_db(sample_mse(estimates, X)), to_db(analytic_mse(truth_model, W))


def _exact_point(snr_db, eps, model, X_real, X, Y_real, all_ranks, upsilons):
    validate(model)
    spectrum = k_matrix(model)
    report = rank_report_from_deltas(spectrum.deltas, np.trace(model.Rx), eps=eps)
    W_blue = blue(model).W
    Ry = model.H @ model.H.T + eps * model.Rn
    tail = float(sigma_spectrum(model.H, 0.5 * (Ry + Ry.T))[-2]) if model.m >= 2 else None
    point = SnrPoint(snr_db, eps, "exact", rank=report.r_opt, sigma_tail=tail)
    point.predicted_rank = predict_rank_window(upsilons, np.ones(model.m), eps)

    estimators = [
        ("MMSE", None, mmse(model).W),
        ("BLUE", None, W_blue),
        ("MV-PURE", report.r_opt, reduce_rank(W_blue, spectrum, report.r_opt).W),
    ]
    if all_ranks:
        estimators += [(f"MV-PURE[{r}]", r, reduce_rank(W_blue, spectrum, r).W) for r in range(1, model.m + 1)]
    rows = [
        ResultRow(snr_db, name, "exact", rank, *_evaluate(W, X_real, X, Y_real, model), tail)
        for name, rank, W in estimators
    ]
    return point, rows


def _empirical_point(snr_db, eps, model, H_tilde, X_real, X, Y_real, all_ranks):
    m = model.m
    Ry_hat = sample_covariance(Y_real)
    rule = sigma_threshold_rank(H_tilde, Ry_hat)
    point = SnrPoint(snr_db, eps, "empirical", rank=rule.rank, sigma_tail=rule.tail)
    Rx = np.eye(m)
    estimators = [
        ("MMSE", None, mmse_from_covariance(H_tilde, Ry_hat, Rx).W),
        ("BLUE", None, blue_from_covariance(H_tilde, Ry_hat).W),
        ("MV-PURE", rule.rank, mv_pure_from_covariance(H_tilde, Ry_hat, Rx, rule.rank).W),
    ]
    if all_ranks:
        estimators += [
            (f"MV-PURE[{r}]", r, mv_pure_from_covariance(H_tilde, Ry_hat, Rx, r).W) for r in range(1, m + 1)
        ]
    rows = [
        ResultRow(snr_db, name, "empirical", rank, *_evaluate(W, X_real, X, Y_real, model), rule.tail)
        for name, rank, W in estimators
    ]
    return point, rows


def run_experiment(scenario, knowledge="exact"):
    """Transmit ``Q`` blocks over one channel at every SNR and score the estimators.

    Parameters
    ----------
    scenario : MimoScenario
    knowledge : {'exact', 'empirical', 'both'}
        ``exact`` builds estimators from the true channel, noise covariance
        and noise power. ``empirical`` uses a perturbed channel and the
        sample covariance of the received blocks, selecting the MV-PURE rank
        by the 0.5 threshold on the eigenvalues of ``H^t Ry^{-1} H``.
        Both modes see the same channel, symbols and noise draws.

    Returns
    -------
    SimulationResult
        Rows ordered by SNR, then knowledge, then estimator. A failure at one
        SNR is recorded in ``points`` and does not stop the grid.
    """
    if knowledge == "both":
        modes = KNOWLEDGE_MODES
    elif knowledge in KNOWLEDGE_MODES:
        modes = (knowledge,)
    else:
        raise InvalidInput(f"unknown knowledge mode {knowledge!r}")

    Rnc = scenario.noise_covariance()
    Hc, draws, upsilons = draw_channel(scenario, Rnc)
    H_tilde = realify_matrix(perturb_channel(Hc, scenario.perturb_variance, scenario.perturb_seed))

    X = gen_qpsk_blocks(scenario.M, scenario.symbol_seed, scenario.Q)
    noise = gen_noise_blocks(Rnc, scenario.noise_seed, scenario.Q)
    X_real = realify_vector(X)
    clean = X @ Hc.T

    def run_point(snr_db):
        eps = eps_from_snr(snr_db, scenario.sigma_h2)
        Y_real = realify_vector(clean + math.sqrt(eps) * noise)
        points, rows = [], []
        for mode in modes:
            try:
                model = realify(Hc, Rnc, scenario.M, eps)
                if mode == "exact":
                    point, new_rows = _exact_point(
                        snr_db, eps, model, X_real, X, Y_real, scenario.all_ranks, upsilons
                    )
                else:
                    point, new_rows = _empirical_point(
                        snr_db, eps, model, H_tilde, X_real, X, Y_real, scenario.all_ranks
                    )
            except MVPureError as exc:
                point = SnrPoint(snr_db, eps, mode, error=f"{type(exc).__name__}: {exc}")
                new_rows = [ResultRow(snr_db, "FAILED", mode, None, None, None, None)]
            points.append(point)
            rows.extend(new_rows)
        return points, rows

    workers = min(_thread_count(), len(scenario.snr_db_grid))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run_point, scenario.snr_db_grid))
    else:
        outcomes = [run_point(s) for s in scenario.snr_db_grid]

    result = SimulationResult(scenario=scenario, Hc=Hc, channel_draws=draws, upsilons=upsilons)
    for points, rows in outcomes:
        result.points.extend(points)
        result.rows.extend(rows)
    return result
