"""Hyperspherical coordinates and ball/lens volumes in d dimensions.

Angles follow the convention used throughout the package: for a point in
R^d the angle vector has d-1 entries, the d-2 elevations (each in [0, pi])
followed by the azimuth (in [0, 2*pi)).
"""
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln


class Hyperspherical(NamedTuple):
    r: np.ndarray
    angles: np.ndarray


def cart_to_hyper(points):
    """Convert Cartesian points to hyperspherical coordinates.

    Parameters
    ----------
    points : array_like, shape (d,) or (n, d)
        Cartesian coordinates, d >= 2.

    Returns
    -------
    Hyperspherical
        ``r`` with shape () or (n,) and ``angles`` with shape (d-1,) or
        (n, d-1), elevations first and azimuth last.

    Notes
    -----
    Uses two-argument arctangents so the ranges are [0, pi] for
    elevations and [0, 2*pi) for the azimuth. When the last two
    coordinates are both zero the azimuth is taken to be 0.
    """
    x = np.asarray(points, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    d = x.shape[1]
    if d < 2:
        raise ValueError(f"dimension must be >= 2, got {d}")
    if not np.all(np.isfinite(x)):
        raise ValueError("coordinates must be finite")
    r = np.sqrt(np.sum(x * x, axis=1))
    if np.any(r == 0):
        raise ValueError("angles are undefined at the origin")

    angles = np.empty((x.shape[0], d - 1))
    # tail[:, j] = |(x_{j+1}, ..., x_d)| (0-based: coordinates after j)
    sq = x * x
    tail = np.sqrt(np.cumsum(sq[:, ::-1], axis=1)[:, ::-1])
    for j in range(d - 2):
        angles[:, j] = np.arctan2(tail[:, j + 1], x[:, j])
    az = np.arctan2(x[:, d - 1], x[:, d - 2])
    both_zero = (x[:, d - 1] == 0) & (x[:, d - 2] == 0)
    az = np.where(both_zero, 0.0, np.mod(az, 2 * np.pi))
    # mod can round a tiny negative angle up to exactly 2*pi
    az[az >= 2 * np.pi] = 0.0
    angles[:, d - 2] = az

    if single:
        return Hyperspherical(r[0], angles[0])
    return Hyperspherical(r, angles)


def hyper_to_cart(r, angles):
    """Inverse of :func:`cart_to_hyper`.

    ``angles`` has d-1 entries on its last axis; ``r`` broadcasts against
    its leading axes.
    """
    angles = np.asarray(angles, dtype=float)
    r = np.asarray(r, dtype=float)
    if angles.shape[-1] < 1:
        raise ValueError("need at least one angle (d >= 2)")
    d = angles.shape[-1] + 1
    sin = np.sin(angles)
    cos = np.cos(angles)
    out = np.empty(angles.shape[:-1] + (d,))
    # running product of sines of the preceding angles
    prod = np.ones(angles.shape[:-1])
    for k in range(d - 1):
        out[..., k] = cos[..., k] * prod
        prod = prod * sin[..., k]
    out[..., d - 1] = prod
    return out * r[..., None]


def ball_volume(d, r):
    """Volume of the d-ball of radius ``r``: pi^(d/2) r^d / Gamma(d/2 + 1)."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("radius must be non-negative")
    unit = np.exp(0.5 * d * np.log(np.pi) - gammaln(0.5 * d + 1))
    out = unit * r**d
    return float(out) if out.ndim == 0 else out


def sphere_surface(d):
    """Surface area of the unit sphere in R^d, i.e. d * V_d(1)."""
    return d * ball_volume(d, 1.0)


def _check_lens_args(d, rc, rho):
    if d not in (2, 3):
        raise NotImplementedError(f"unsupported dimension d={d}; lens volumes exist for d in {{2, 3}}")
    if rc <= 0:
        raise ValueError("ball radius must be positive")
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("midpoint distance must be non-negative")
    return rho


def lens_volume(d, rc, rho):
    """Volume of the intersection of two d-balls of radius ``rc`` whose
    centres are ``rho`` apart. Only d = 2 and d = 3 are supported."""
    rho = _check_lens_args(d, rc, rho)
    inside = rho <= 2 * rc
    t = np.minimum(rho, 2 * rc)
    if d == 2:
        vol = 2 * rc**2 * np.arccos(t / (2 * rc)) - 0.5 * t * np.sqrt(np.maximum(4 * rc**2 - t**2, 0.0))
    else:
        vol = (4 * np.pi * rc**3 / 3) * (1 - 0.75 * t / rc + t**3 / (16 * rc**3))
    vol = np.where(inside, np.maximum(vol, 0.0), 0.0)
    return float(vol) if vol.ndim == 0 else vol


def union_volume(d, rc, rho):
    """Volume of the union of two d-balls of radius ``rc`` at distance ``rho``."""
    out = 2 * ball_volume(d, rc) - np.asarray(lens_volume(d, rc, rho))
    return float(out) if np.ndim(out) == 0 else out


def uniform_in_ball(n, radius, d, rng):
    """``n`` i.i.d. uniform points in the centred d-ball (radial inversion
    plus a normalised Gaussian direction)."""
    direction = rng.standard_normal((n, d))
    norms = np.linalg.norm(direction, axis=1)
    # a zero Gaussian vector has probability zero; redraw defensively
    while np.any(norms == 0):
        bad = norms == 0
        direction[bad] = rng.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(direction, axis=1)
    # 1 - U lies in (0, 1], so no point lands exactly on the centre
    radii = radius * (1.0 - rng.uniform(size=n)) ** (1.0 / d)
    return direction * (radii / norms)[:, None]
