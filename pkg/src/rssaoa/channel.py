"""Propagation model: power-law path loss, log-normal shadowing and
distance-dependent Gaussian AOA noise.

Distances are in km, ``K`` in 1/km, angles in radians and received power
is a normalised, dimensionless quantity.
"""
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit

from .geometry import cart_to_hyper
from .pointproc import as_rng

# COST-Hata urban parameters and the logistic AOA variance used in the
# reference experiments
DEFAULT_K = 4250.0
DEFAULT_BETA = 3.52
DEFAULT_SIGMA_DB = 12.0


def sigma_from_db(sigma_db):
    """Convert a shadowing standard deviation in dB to the natural-log scale."""
    if sigma_db < 0:
        raise ValueError("sigma_db must be non-negative")
    return sigma_db / 10.0 * math.log(10.0)


@dataclass(frozen=True)
class AoaVarianceParams:
    """Logistic AOA variance ``tau_min + (tau_max - tau_min) / (1 + exp(-a (r - r0)))``."""

    tau_min: float = math.pi / 90
    tau_max: float = math.pi / 12
    a: float = 0.05
    r0: float = 25.0

    def __post_init__(self):
        if not (0 < self.tau_min < self.tau_max < math.inf):
            raise ValueError("need 0 < tau_min < tau_max < inf")
        if not self.a > 0:
            raise ValueError("logistic slope a must be positive")
        if not math.isfinite(self.r0):
            raise ValueError("r0 must be finite")


@dataclass(frozen=True)
class ChannelParams:
    K: float = DEFAULT_K
    beta: float = DEFAULT_BETA
    sigma: float = sigma_from_db(DEFAULT_SIGMA_DB)
    aoa: AoaVarianceParams = field(default_factory=AoaVarianceParams)

    def __post_init__(self):
        if not self.K > 0:
            raise ValueError("K must be positive")
        if not self.beta > 2:
            raise ValueError("path-loss exponent beta must exceed 2")
        if not self.sigma >= 0:
            raise ValueError("shadowing sigma must be non-negative")
        if isinstance(self.aoa, dict):
            object.__setattr__(self, "aoa", AoaVarianceParams(**self.aoa))

    @classmethod
    def from_db(cls, sigma_db=DEFAULT_SIGMA_DB, **kwargs):
        return cls(sigma=sigma_from_db(sigma_db), **kwargs)

    def with_sigma(self, sigma):
        return ChannelParams(self.K, self.beta, sigma, self.aoa)

    def to_dict(self):
        return asdict(self)


def path_loss(r, params):
    """``(K r)^(-beta)``."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("path loss needs r > 0")
    return (params.K * r) ** (-params.beta)


def inverse_path_loss(r, params):
    """``g(r) = 1 / l(r) = (K r)^beta``."""
    r = np.asarray(r, dtype=float)
    return (params.K * r) ** params.beta


def sample_shadowing(sigma, beta, rng=None, size=None):
    """Log-normal shadowing ``exp(-sigma^2 / beta + sigma Z)``; exactly 1 when sigma == 0."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    rng = as_rng(rng)
    z = rng.standard_normal(size)
    if sigma == 0:
        return np.ones_like(z) if size is not None else 1.0
    return np.exp(-(sigma**2) / beta + sigma * z)


def aoa_variance(r, aoa):
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("distance must be non-negative")
    frac = expit(aoa.a * (r - aoa.r0))
    out = aoa.tau_min + (aoa.tau_max - aoa.tau_min) * frac
    return float(out) if out.ndim == 0 else out


def sample_aoa(angles, variance, rng=None):
    """Noisy angles of arrival given the sensors' hyperspherical angles.

    ``angles`` has shape (..., d-1), elevations first. Elevations are drawn
    from N(pi - psi, variance) and the azimuth from N(psi - pi, variance);
    ``variance`` broadcasts over the leading axes. No wrapping is applied.
    """
    angles = np.asarray(angles, dtype=float)
    variance = np.asarray(variance, dtype=float)
    if np.any(variance < 0):
        raise ValueError("AOA variance must be non-negative")
    mean = np.pi - angles
    mean[..., -1] = angles[..., -1] - np.pi
    sd = np.sqrt(variance)[..., None] if variance.ndim else np.sqrt(variance)
    rng = as_rng(rng)
    return mean + sd * rng.standard_normal(angles.shape)


@dataclass
class Observations:
    """Per-sensor measurements, stored column-wise.

    ``sensors`` (n, d), ``rss`` (n,), ``inverse_rss`` (n,) and ``angles``
    (n, d-1) with elevations first and the azimuth last.
    """

    sensors: np.ndarray
    rss: np.ndarray
    angles: np.ndarray
    inverse_rss: np.ndarray = None

    def __post_init__(self):
        self.sensors = np.atleast_2d(np.asarray(self.sensors, dtype=float))
        d = self.sensors.shape[1]
        self.rss = np.asarray(self.rss, dtype=float).reshape(-1)
        self.angles = np.asarray(self.angles, dtype=float).reshape(len(self.rss), d - 1)
        if np.any(self.rss <= 0):
            raise ValueError("RSS values must be positive")
        if self.inverse_rss is None:
            self.inverse_rss = 1.0 / self.rss
        n, d = self.sensors.shape
        if len(self.rss) != n or self.angles.shape != (n, d - 1):
            raise ValueError("inconsistent observation shapes")

    def __len__(self):
        return len(self.rss)

    @property
    def dimension(self):
        return self.sensors.shape[1]


def observe(pattern, params, rng=None):
    """Generate RSS and AOA measurements for every point of ``pattern``.

    ``pattern`` may be a :class:`~rssaoa.pointproc.PointPattern` or an
    (n, d) array. The target sits at the origin.
    """
    pts = np.asarray(getattr(pattern, "points", pattern), dtype=float)
    rng = as_rng(rng)
    n, d = pts.shape
    if n == 0:
        return Observations(pts, np.empty(0), np.empty((0, d - 1)))
    hyper = cart_to_hyper(pts)
    shadow = sample_shadowing(params.sigma, params.beta, rng, size=n)
    rss = path_loss(hyper.r, params) * shadow
    theta = sample_aoa(hyper.angles, aoa_variance(hyper.r, params.aoa), rng)
    return Observations(pts, rss, theta)
