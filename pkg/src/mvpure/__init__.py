"""Reduced-rank robust linear estimation with the stochastic MV-PURE estimator."""

from .estimators import (
    Estimator,
    KSpectrum,
    analytic_mse,
    blue,
    blue_from_covariance,
    k_matrix,
    k_matrix_from_covariance,
    mmse,
    mmse_from_covariance,
    mv_pure,
    mv_pure_from_covariance,
    mv_pure_mse_closed,
)
from .exceptions import (
    DimensionMismatch,
    EmptyInput,
    InvalidInput,
    ModelValidationError,
    MVPureError,
    NonpositiveEps,
    NotPositiveDefinite,
    NotSPD,
    NumericalFailure,
    RankDeficientH,
    RankOutOfRange,
    TraceNotOne,
)
from .filters import BLUEFilter, MMSEFilter, MVPUREFilter
from .linalg import EigenDecomposition, spd_inverse, sym_eig
from .model import (
    DerivedCovariances,
    StochasticLinearModel,
    derive_covariances,
    load_model,
    normalize_noise,
    save_model,
    validate,
)
from .rank_analysis import (
    RankReport,
    ThresholdCertificate,
    noise_thresholds,
    optimal_rank,
    predict_rank_window,
    rank_profile,
    sigma_threshold_rank,
    weyl_bounds,
)

__version__ = "0.1.0"
