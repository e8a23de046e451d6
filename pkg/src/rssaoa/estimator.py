"""RSS + AOA fusion localisation.

Each sensor turns its RSS into a range estimate with a log-linear model
fitted on calibration data, projects that range along its measured angles
of arrival, and the fusion centre averages the per-sensor estimates.
"""
import math
from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted, column_or_1d

from .channel import Observations, path_loss, sample_shadowing
from .geometry import hyper_to_cart
from .pointproc import as_rng


class CalibrationError(ValueError):
    """The calibration data cannot produce a usable range model."""


class NoSensorsError(ValueError):
    """Fusion was asked to combine zero estimates."""


@dataclass(frozen=True)
class CalibrationFit:
    """Least-squares fit of ``ln P = alpha + gamma ln R``."""

    alpha_hat: float
    gamma_hat: float
    n_cal: int = 0
    residual_var: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.alpha_hat) and math.isfinite(self.gamma_hat)):
            raise CalibrationError("calibration coefficients must be finite")
        if not self.gamma_hat < 0:
            raise CalibrationError(f"calibration failed: slope {self.gamma_hat} is not negative")

    @classmethod
    def exact(cls, params):
        """The population coefficients: ``alpha = -beta ln K - sigma^2 / beta``, ``gamma = -beta``."""
        return cls(
            alpha_hat=-params.beta * math.log(params.K) - params.sigma**2 / params.beta,
            gamma_hat=-params.beta,
            n_cal=0,
            residual_var=params.sigma**2,
        )

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(
            alpha_hat=float(data["alpha_hat"]),
            gamma_hat=float(data["gamma_hat"]),
            n_cal=int(data.get("n_cal", 0)),
            residual_var=float(data.get("residual_var", 0.0)),
        )


def generate_calibration_data(m, radius, params, d=2, rng=None):
    """Draw ``m`` calibration pairs ``(rss, distance)``.

    Distances follow the radial law of a uniform point in the d-ball,
    density ``d r^(d-1) / R^d``; the RSS follows the channel model.
    """
    if m < 2:
        raise ValueError("need at least two calibration samples")
    rng = as_rng(rng)
    dist = radius * (1.0 - rng.uniform(size=m)) ** (1.0 / d)
    rss = path_loss(dist, params) * sample_shadowing(params.sigma, params.beta, rng, size=m)
    return rss, dist


def calibrate(rss, distance):
    """Ordinary least squares of ``ln rss`` on ``ln distance``."""
    rss = np.asarray(rss, dtype=float).ravel()
    distance = np.asarray(distance, dtype=float).ravel()
    if rss.shape != distance.shape:
        raise ValueError("rss and distance must have the same length")
    if len(rss) < 2:
        raise CalibrationError("need at least two calibration pairs")
    if np.any(rss <= 0) or np.any(distance <= 0):
        raise CalibrationError("rss and distance must be positive")
    x = np.log(distance)
    y = np.log(rss)
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0.0:
        raise CalibrationError("singular fit: all calibration distances are equal")
    gamma = float(xc @ (y - y.mean())) / sxx
    alpha = float(y.mean() - gamma * x.mean())
    resid = y - alpha - gamma * x
    dof = len(x) - 2
    residual_var = float(resid @ resid) / dof if dof > 0 else 0.0
    return CalibrationFit(alpha, gamma, len(x), residual_var)


def estimate_distance(rss, fit):
    """``exp((ln P - alpha_hat) / gamma_hat)``; non-increasing in ``rss``."""
    rss = np.asarray(rss, dtype=float)
    if np.any(rss <= 0):
        raise ValueError("rss must be positive")
    out = np.exp((np.log(rss) - fit.alpha_hat) / fit.gamma_hat)
    return float(out) if out.ndim == 0 else out


def individual_estimate(sensors, rhat, angles):
    """Project each range estimate from its sensor along the measured angles.

    The projection uses the hyperspherical parametrisation, so the estimate
    is ``sensor + hyper_to_cart(rhat, angles)``.
    """
    sensors = np.asarray(sensors, dtype=float)
    angles = np.asarray(angles, dtype=float)
    rhat = np.asarray(rhat, dtype=float)
    if angles.shape[-1] != sensors.shape[-1] - 1:
        raise ValueError("need d-1 angles per sensor")
    if np.any(rhat <= 0):
        raise ValueError("range estimates must be positive")
    return sensors + hyper_to_cart(rhat, angles)


@dataclass
class TargetEstimate:
    coords: np.ndarray
    n_used: int
    per_sensor: "np.ndarray | None" = None


def fuse(estimates, keep_individual=True):
    """Coordinate-wise mean of the individual estimates."""
    est = np.atleast_2d(np.asarray(estimates, dtype=float))
    if est.size == 0 or est.shape[0] == 0:
        raise NoSensorsError("cannot fuse an empty set of estimates")
    return TargetEstimate(est.mean(axis=0), est.shape[0], est if keep_individual else None)


def localize(observations, fit, keep_individual=False):
    """Run the full pipeline on one scene: ranges, projections, fusion."""
    if len(observations) == 0:
        raise NoSensorsError("no observations to localise from")
    rhat = estimate_distance(observations.rss, fit)
    est = individual_estimate(observations.sensors, rhat, observations.angles)
    return fuse(est, keep_individual=keep_individual)


class FusionLocalizer(BaseEstimator):
    """Scikit-learn style wrapper around calibration and fusion.

    ``fit(rss, distance)`` calibrates the range model; ``transform`` maps an
    :class:`~rssaoa.channel.Observations` scene to per-sensor position
    estimates and ``predict`` returns the fused target estimate.
    """

    def __init__(self, keep_individual=False):
        self.keep_individual = keep_individual

    def fit(self, X, y):
        rss = column_or_1d(check_array(np.reshape(X, (-1, 1)) if np.ndim(X) == 1 else X, ensure_min_samples=2))
        dist = column_or_1d(check_array(np.reshape(y, (-1, 1)), ensure_min_samples=2))
        self.calibration_ = calibrate(rss, dist)
        self.alpha_hat_ = self.calibration_.alpha_hat
        self.gamma_hat_ = self.calibration_.gamma_hat
        return self

    @classmethod
    def from_calibration(cls, fit, **params):
        est = cls(**params)
        est.calibration_ = fit
        est.alpha_hat_ = fit.alpha_hat
        est.gamma_hat_ = fit.gamma_hat
        return est

    def predict_distance(self, rss):
        check_is_fitted(self, "calibration_")
        return estimate_distance(rss, self.calibration_)

    def transform(self, observations):
        check_is_fitted(self, "calibration_")
        rhat = estimate_distance(observations.rss, self.calibration_)
        return individual_estimate(observations.sensors, rhat, observations.angles)

    def predict(self, observations):
        check_is_fitted(self, "calibration_")
        return localize(observations, self.calibration_, self.keep_individual).coords


__all__ = [
    "CalibrationError",
    "CalibrationFit",
    "FusionLocalizer",
    "NoSensorsError",
    "Observations",
    "TargetEstimate",
    "calibrate",
    "estimate_distance",
    "fuse",
    "generate_calibration_data",
    "individual_estimate",
    "localize",
]
