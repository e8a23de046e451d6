"""Fusion-based RSS + AOA target localisation over random sensor networks."""

__version__ = "0.1.0"

from .analysis import (
    ExperimentResult,
    LaplaceProbe,
    MomentEstimates,
    cmse_bound,
    empirical_laplace,
    ks_min_inverse_rss,
    mc_cmse,
    mc_mse,
    mse_bound,
    rhat_moments,
)
from .channel import AoaVarianceParams, ChannelParams, Observations, observe, sigma_from_db
from .estimator import CalibrationFit, FusionLocalizer, calibrate, generate_calibration_data, localize
from .pointproc import (
    AlphaGinibre,
    MaternCluster,
    MaternI,
    MaternII,
    PairCorrelationEstimator,
    PointPattern,
    PoissonProcess,
    ThomasCluster,
    match_matern_ii_parent,
)

__all__ = [
    "AlphaGinibre",
    "AoaVarianceParams",
    "CalibrationFit",
    "ChannelParams",
    "ExperimentResult",
    "FusionLocalizer",
    "LaplaceProbe",
    "MaternCluster",
    "MaternI",
    "MaternII",
    "MomentEstimates",
    "Observations",
    "PairCorrelationEstimator",
    "PointPattern",
    "PoissonProcess",
    "ThomasCluster",
    "calibrate",
    "cmse_bound",
    "empirical_laplace",
    "generate_calibration_data",
    "ks_min_inverse_rss",
    "localize",
    "match_matern_ii_parent",
    "mc_cmse",
    "mc_mse",
    "mse_bound",
    "observe",
    "rhat_moments",
    "sigma_from_db",
]
