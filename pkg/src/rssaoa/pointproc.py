"""Deployment models: samplers on a ball, intensities, pair correlations.

Every model is a small scikit-learn style estimator, so parameters are
plain constructor arguments and ``get_params`` / ``set_params`` /
``clone`` work as usual. Samplers return a :class:`PointPattern`
restricted to the centred ball of the requested radius.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special, stats
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator

from .geometry import ball_volume, lens_volume, sphere_surface, uniform_in_ball, union_volume


class UnsupportedDimensionError(NotImplementedError):
    """Raised when a model or formula is not defined in the requested dimension."""


class InfeasibleIntensityError(ValueError):
    """Raised when a target intensity exceeds what a hardcore model can reach."""


class QuadratureError(RuntimeError):
    pass


@dataclass
class PointPattern:
    """A finite configuration of sensor locations inside a centred ball."""

    points: np.ndarray
    radius: float
    model: "PointProcess | None" = None
    seed: "int | None" = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2:
            raise ValueError("points must be a 2-d array of shape (n, d)")
        self.points = pts

    def __len__(self):
        return self.points.shape[0]

    @property
    def dimension(self):
        return self.points.shape[1]

    @property
    def window_volume(self):
        return ball_volume(self.dimension, self.radius)

    def min_pairwise_distance(self):
        if len(self) < 2:
            return math.inf
        dist, _ = cKDTree(self.points).query(self.points, k=2)
        return float(dist[:, 1].min())


def as_rng(rng):
    """Return a ``numpy.random.Generator`` for a seed, SeedSequence or Generator."""
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def _positive(name, value):
    if not (np.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")


def _require_lens_dim(d):
    if d not in (2, 3):
        raise UnsupportedDimensionError(f"unsupported dimension d={d}: closed form needs d in {{2, 3}}")


def _clip(points, radius):
    if len(points) == 0:
        return points
    return points[np.einsum("ij,ij->i", points, points) <= radius * radius]


class PointProcess(BaseEstimator):
    """Common interface for the stationary isotropic deployment models."""

    kind = None

    def validate(self, d=2):
        return self

    def effective_intensity(self, d=2):
        """Stationary intensity in points per unit volume."""
        raise NotImplementedError

    def pair_correlation(self, r, d=2):
        raise NotImplementedError

    def sample(self, radius, d=2, rng=None):
        raise NotImplementedError

    def _srd_pieces(self, d):
        """Integration intervals for the SRD integral; h == 1 outside them."""
        raise NotImplementedError

    def srd_integral(self, d=2):
        """Adaptive quadrature of int_0^inf |h(r) - 1| r^(d-1) dr."""
        self.validate(d)
        pieces = self._srd_pieces(d)
        if not pieces:
            return 0.0

        def integrand(r):
            return abs(float(self.pair_correlation(r, d)) - 1.0) * r ** (d - 1)

        total = 0.0
        for lo, hi in pieces:
            out = integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=1e-12, limit=500, full_output=1)
            value, abserr = out[0], out[1]
            if len(out) > 3:
                raise QuadratureError(
                    f"SRD quadrature on [{lo}, {hi}] did not converge: {out[3]} "
                    f"(value={value}, abserr={abserr})"
                )
            total += value
        if not np.isfinite(total):
            raise QuadratureError(f"SRD integral is not finite ({total})")
        return total

    def to_dict(self):
        return {"kind": self.kind, **self.get_params()}


class PoissonProcess(PointProcess):
    """Homogeneous Poisson point process with the given intensity."""

    kind = "ppp"

    def __init__(self, intensity=1.0):
        self.intensity = intensity

    def validate(self, d=2):
        _positive("intensity", self.intensity)
        return self

    def effective_intensity(self, d=2):
        self.validate(d)
        return float(self.intensity)

    def sample(self, radius, d=2, rng=None):
        self.validate(d)
        rng = as_rng(rng)
        n = rng.poisson(self.intensity * ball_volume(d, radius))
        return PointPattern(uniform_in_ball(n, radius, d, rng), radius, model=self)

    def pair_correlation(self, r, d=2):
        return np.ones_like(np.asarray(r, dtype=float))

    def _srd_pieces(self, d):
        return []


def sample_ppp(intensity, radius, d=2, rng=None):
    return PoissonProcess(intensity).sample(radius, d, rng)


def sample_ppp_conditional(n, radius, d=2, rng=None):
    """Exactly ``n`` i.i.d. uniform points in the ball (PPP given its count)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = as_rng(rng)
    return PointPattern(uniform_in_ball(int(n), radius, d, rng), radius, meta={"conditional_n": int(n)})


class _Hardcore(PointProcess):
    def __init__(self, parent_intensity=1.0, hardcore_radius=0.1):
        self.parent_intensity = parent_intensity
        self.hardcore_radius = hardcore_radius

    def validate(self, d=2):
        _positive("parent_intensity", self.parent_intensity)
        _positive("hardcore_radius", self.hardcore_radius)
        return self

    def _parents(self, radius, d, rng):
        outer = radius + self.hardcore_radius
        n = rng.poisson(self.parent_intensity * ball_volume(d, outer))
        return uniform_in_ball(n, outer, d, rng)

    def _close_pairs(self, pts):
        if len(pts) < 2:
            return np.empty((0, 2), dtype=np.intp)
        return cKDTree(pts).query_pairs(self.hardcore_radius, output_type="ndarray")

    def _srd_pieces(self, d):
        rc = self.hardcore_radius
        return [(0.0, rc), (rc, 2 * rc)]


class MaternI(_Hardcore):
    """Matern type I hardcore process: delete every parent point that has
    another parent within ``hardcore_radius``."""

    kind = "matern1"

    @classmethod
    def matched(cls, target_intensity, hardcore_radius, d=2):
        return cls(match_matern_i_parent(target_intensity, hardcore_radius, d), hardcore_radius)

    def effective_intensity(self, d=2):
        self.validate(d)
        lp = self.parent_intensity
        return lp * math.exp(-lp * ball_volume(d, self.hardcore_radius))

    def sample(self, radius, d=2, rng=None):
        self.validate(d)
        rng = as_rng(rng)
        pts = self._parents(radius, d, rng)
        pairs = self._close_pairs(pts)
        keep = np.ones(len(pts), dtype=bool)
        keep[pairs.ravel()] = False
        return PointPattern(_clip(pts[keep], radius), radius, model=self)

    def pair_correlation(self, r, d=2):
        _require_lens_dim(d)
        r = np.asarray(r, dtype=float)
        rc = self.hardcore_radius
        h = np.exp(self.parent_intensity * np.asarray(lens_volume(d, rc, r)))
        return np.where(r <= rc, 0.0, h)


def match_matern_i_parent(target_intensity, hardcore_radius, d=2):
    """Smaller parent intensity giving a Matern I process the target intensity.

    Inverts ``lam = lp exp(-lp V)`` on its increasing branch (``lp V <= 1``)
    with the principal Lambert W function.
    """
    _positive("target_intensity", target_intensity)
    _positive("hardcore_radius", hardcore_radius)
    v = ball_volume(d, hardcore_radius)
    if target_intensity * v > math.exp(-1.0):
        raise InfeasibleIntensityError(
            f"target intensity {target_intensity} is infeasible for a Matern I process with "
            f"hardcore radius {hardcore_radius} in d={d}: it must not exceed 1/(e V_d) = {1.0 / (math.e * v):.6g}"
        )
    return float(-special.lambertw(-target_intensity * v, 0).real / v)


class MaternII(_Hardcore):
    """Matern type II hardcore process: each parent gets a uniform age and
    survives only if it is the youngest within ``hardcore_radius``."""

    kind = "matern2"

    @classmethod
    def matched(cls, target_intensity, hardcore_radius, d=2):
        return cls(match_matern_ii_parent(target_intensity, hardcore_radius, d), hardcore_radius)

    def effective_intensity(self, d=2):
        self.validate(d)
        v = ball_volume(d, self.hardcore_radius)
        return -math.expm1(-self.parent_intensity * v) / v

    def sample(self, radius, d=2, rng=None):
        self.validate(d)
        rng = as_rng(rng)
        pts = self._parents(radius, d, rng)
        age = rng.uniform(size=len(pts))
        pairs = self._close_pairs(pts)
        keep = np.ones(len(pts), dtype=bool)
        if len(pairs):
            i, j = pairs[:, 0], pairs[:, 1]
            # the older point of each close pair dies; equal ages (probability
            # zero) are resolved in favour of the lower index
            i_older = (age[i] > age[j]) | ((age[i] == age[j]) & (i > j))
            keep[np.where(i_older, i, j)] = False
        return PointPattern(_clip(pts[keep], radius), radius, model=self)

    def pair_correlation(self, r, d=2):
        _require_lens_dim(d)
        r = np.asarray(r, dtype=float)
        rc = self.hardcore_radius
        lp = self.parent_intensity
        v = ball_volume(d, rc)
        lam = self.effective_intensity(d)
        mid = (r > rc) & (r < 2 * rc)
        # evaluate only where the formula is regular; r >= 2 rc gives exactly 1
        vbar = np.asarray(union_volume(d, rc, np.where(mid, r, 1.5 * rc)))
        num = 2 * vbar * (-math.expm1(-lp * v)) - 2 * v * (-np.expm1(-lp * vbar))
        den = lam**2 * v * vbar * (vbar - v)
        h = num / den
        return np.where(r <= rc, 0.0, np.where(mid, h, 1.0))


def match_matern_ii_parent(target_intensity, hardcore_radius, d=2):
    """Parent intensity giving a Matern II process the target intensity.

    Closed-form inversion of ``lam = (1 - exp(-lp V)) / V`` with
    ``V = V_d(hardcore_radius)``.
    """
    _positive("target_intensity", target_intensity)
    _positive("hardcore_radius", hardcore_radius)
    v = ball_volume(d, hardcore_radius)
    if target_intensity * v >= 1.0:
        raise InfeasibleIntensityError(
            f"target intensity {target_intensity} is infeasible for a Matern II process with "
            f"hardcore radius {hardcore_radius} in d={d}: it must be below 1/V_d = {1.0 / v:.6g}"
        )
    return -math.log1p(-target_intensity * v) / v


class _Cluster(PointProcess):
    def validate(self, d=2):
        _positive("parent_intensity", self.parent_intensity)
        _positive("mean_cluster_size", self.mean_cluster_size)
        return self

    def effective_intensity(self, d=2):
        self.validate(d)
        return self.parent_intensity * self.mean_cluster_size

    def _buffer(self):
        raise NotImplementedError

    def _scatter(self, counts_total, d, rng):
        raise NotImplementedError

    def sample(self, radius, d=2, rng=None):
        self.validate(d)
        rng = as_rng(rng)
        outer = radius + self._buffer()
        n_par = rng.poisson(self.parent_intensity * ball_volume(d, outer))
        parents = uniform_in_ball(n_par, outer, d, rng)
        counts = rng.poisson(self.mean_cluster_size, size=n_par)
        centres = np.repeat(parents, counts, axis=0)
        daughters = centres + self._scatter(len(centres), d, rng)
        pattern = PointPattern(_clip(daughters, radius), radius, model=self)
        return pattern


class MaternCluster(_Cluster):
    """Matern cluster process: Poisson(mean_cluster_size) daughters per
    parent, uniform in the ball of ``cluster_radius`` around it."""

    kind = "mcp"

    def __init__(self, parent_intensity=0.4, mean_cluster_size=2.5, cluster_radius=0.3):
        self.parent_intensity = parent_intensity
        self.mean_cluster_size = mean_cluster_size
        self.cluster_radius = cluster_radius

    def validate(self, d=2):
        super().validate(d)
        _positive("cluster_radius", self.cluster_radius)
        return self

    def _buffer(self):
        return self.cluster_radius

    def _scatter(self, n, d, rng):
        return uniform_in_ball(n, self.cluster_radius, d, rng)

    def pair_correlation(self, r, d=2):
        _require_lens_dim(d)
        rc = self.cluster_radius
        a = np.asarray(lens_volume(d, rc, np.asarray(r, dtype=float)))
        return 1.0 + a / (self.parent_intensity * ball_volume(d, rc) ** 2)

    def _srd_pieces(self, d):
        return [(0.0, 2 * self.cluster_radius)]


class ThomasCluster(_Cluster):
    """Thomas cluster process: Gaussian scattering with per-axis standard
    deviation ``cluster_std``. Parents are sampled in a ball enlarged by
    ``tail_sigmas * cluster_std``."""

    kind = "tcp"

    def __init__(self, parent_intensity=0.4, mean_cluster_size=2.5, cluster_std=0.3, tail_sigmas=6.0):
        self.parent_intensity = parent_intensity
        self.mean_cluster_size = mean_cluster_size
        self.cluster_std = cluster_std
        self.tail_sigmas = tail_sigmas

    def validate(self, d=2):
        super().validate(d)
        _positive("cluster_std", self.cluster_std)
        _positive("tail_sigmas", self.tail_sigmas)
        return self

    def _buffer(self):
        return self.tail_sigmas * self.cluster_std

    def _scatter(self, n, d, rng):
        return self.cluster_std * rng.standard_normal((n, d))

    def pair_correlation(self, r, d=2):
        r = np.asarray(r, dtype=float)
        s2 = self.cluster_std**2
        return 1.0 + np.exp(-(r**2) / (4 * s2)) / (self.parent_intensity * (4 * np.pi * s2) ** (d / 2))

    def _srd_pieces(self, d):
        return [(0.0, math.inf)]


class AlphaGinibre(PointProcess):
    """alpha-Ginibre process in the plane with intensity ``intensity``.

    ``method="eigen"`` samples the eigenvalues of a complex Gaussian matrix
    whose size is the truncation index described below, which reproduces
    the joint law (and hence the pair correlation) inside the disc.
    ``method="kostlan"`` draws independent squared radii
    ``Gamma(i, alpha / (pi * intensity))`` with independent uniform angles.
    The radii of that construction have the correct law, but the angles are
    not jointly distributed as in the Ginibre process, so it is much faster
    and its pair correlation is close to 1 rather than repulsive.

    In both cases each point is then kept with probability ``alpha`` and
    the configuration is clipped to the disc.
    """

    kind = "ginibre"

    def __init__(self, alpha=1.0, intensity=1.0, method="eigen", tail_prob=1e-8):
        self.alpha = alpha
        self.intensity = intensity
        self.method = method
        self.tail_prob = tail_prob

    def validate(self, d=2):
        if d != 2:
            raise UnsupportedDimensionError(f"unsupported dimension d={d}: the alpha-Ginibre process lives in d=2")
        if not (0 < self.alpha <= 1):
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha!r}")
        _positive("intensity", self.intensity)
        if self.method not in ("eigen", "kostlan"):
            raise ValueError(f"method must be 'eigen' or 'kostlan', got {self.method!r}")
        return self

    def effective_intensity(self, d=2):
        self.validate(d)
        return float(self.intensity)

    def _scale(self):
        # Gamma scale of the squared radii of the un-thinned ensemble
        return self.alpha / (np.pi * self.intensity)

    def truncation_index(self, radius):
        """Smallest M with P(Gamma(i, scale) <= radius^2) < tail_prob for all i > M."""
        scale = self._scale()
        x = radius * radius / scale
        m = max(1, math.ceil(x + 10 * math.sqrt(x)))
        while stats.gamma.cdf(x, m + 1) >= self.tail_prob:
            m += max(1, int(math.sqrt(m)))
        return m

    def sample(self, radius, d=2, rng=None):
        self.validate(d)
        rng = as_rng(rng)
        m = self.truncation_index(radius)
        if self.method == "kostlan":
            r2 = rng.gamma(np.arange(1, m + 1), self._scale())
            theta = rng.uniform(0.0, 2 * np.pi, size=m)
            r = np.sqrt(r2)
            pts = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
        else:
            g = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
            # entries with E|g|^2 = 1 give bulk density 1/pi; rescale to the target
            z = np.linalg.eigvals(g / math.sqrt(2.0)) * math.sqrt(self._scale())
            pts = np.column_stack([z.real, z.imag])
        keep = rng.uniform(size=m) < self.alpha
        return PointPattern(_clip(pts[keep], radius), radius, model=self, meta={"truncation_index": m})

    def pair_correlation(self, r, d=2):
        self.validate(d)
        r = np.asarray(r, dtype=float)
        return -np.expm1(-np.pi * self.intensity * r**2 / self.alpha)

    def _srd_pieces(self, d):
        return [(0.0, math.inf)]


MODELS = {cls.kind: cls for cls in (PoissonProcess, MaternI, MaternII, MaternCluster, ThomasCluster, AlphaGinibre)}


def model_from_dict(spec):
    spec = dict(spec)
    kind = spec.pop("kind")
    try:
        cls = MODELS[kind]
    except KeyError:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {sorted(MODELS)}") from None
    return cls(**spec)


def effective_intensity(model, d=2):
    return model.effective_intensity(d)


def pair_correlation(model, d, r):
    return model.pair_correlation(r, d)


def srd_integral(model, d=2):
    return model.srd_integral(d)


def sample_matern_i(parent_intensity, hardcore_radius, radius, d=2, rng=None):
    return MaternI(parent_intensity, hardcore_radius).sample(radius, d, rng)


def sample_matern_ii(parent_intensity, hardcore_radius, radius, d=2, rng=None):
    return MaternII(parent_intensity, hardcore_radius).sample(radius, d, rng)


def sample_matern_cluster(parent_intensity, mean_cluster_size, cluster_radius, radius, d=2, rng=None):
    return MaternCluster(parent_intensity, mean_cluster_size, cluster_radius).sample(radius, d, rng)


def sample_thomas(parent_intensity, mean_cluster_size, cluster_std, radius, d=2, rng=None):
    return ThomasCluster(parent_intensity, mean_cluster_size, cluster_std).sample(radius, d, rng)


def sample_alpha_ginibre(alpha, intensity, radius, rng=None, method="eigen"):
    return AlphaGinibre(alpha, intensity, method=method).sample(radius, 2, rng)


class PairCorrelationEstimator(BaseEstimator):
    """Kernel estimator of the pair correlation function from replicated
    patterns observed in a ball window.

    Each ordered pair at distance t contributes
    ``k(r - t) / (s_d t^(d-1) gamma_W(t))``, where ``k`` is a box kernel of
    half-width ``bandwidth`` and ``gamma_W`` is the set covariance of the
    ball window (the lens volume of two window balls ``t`` apart). The sum
    is normalised per pattern by ``n (n - 1) / |W|^2``; the reported value
    is the mean over patterns and ``stderr_`` its standard error.
    """

    def __init__(self, r_grid=None, bandwidth=None):
        self.r_grid = r_grid
        self.bandwidth = bandwidth

    def fit(self, patterns, y=None):
        patterns = list(patterns)
        if not patterns:
            raise ValueError("need at least one pattern")
        d = patterns[0].dimension
        _require_lens_dim(d)
        radius = patterns[0].radius
        if any(p.radius != radius or p.dimension != d for p in patterns):
            raise ValueError("all patterns must share the same window and dimension")
        grid = np.asarray(self.r_grid if self.r_grid is not None else np.linspace(0.05, 0.25, 10) * radius)
        if np.any(grid <= 0) or np.any(grid >= radius / 2):
            raise ValueError("r_grid values must lie in (0, radius/2)")
        bw = self.bandwidth if self.bandwidth is not None else 0.25 * float(np.min(np.diff(np.sort(grid)), initial=grid.min()))
        _positive("bandwidth", bw)

        vol = ball_volume(d, radius)
        surf = sphere_surface(d)
        r_max = float(grid.max() + bw)
        values = []
        for p in patterns:
            n = len(p)
            if n < 2:
                continue
            pairs = cKDTree(p.points).query_pairs(r_max, output_type="ndarray")
            t = np.linalg.norm(p.points[pairs[:, 0]] - p.points[pairs[:, 1]], axis=1)
            weight = 2.0 / (surf * t ** (d - 1) * np.asarray(lens_volume(d, radius, t)))
            inside = np.abs(grid[:, None] - t[None, :]) <= bw
            num = (inside * weight[None, :]).sum(axis=1) / (2 * bw)
            values.append(num * vol**2 / (n * (n - 1)))
        if not values:
            raise ValueError("no pattern has at least two points")
        values = np.array(values)
        self.r_grid_ = grid
        self.bandwidth_ = bw
        self.n_patterns_ = len(values)
        self.h_ = values.mean(axis=0)
        if len(values) > 1:
            self.stderr_ = values.std(axis=0, ddof=1) / math.sqrt(len(values))
        else:
            self.stderr_ = np.full(len(grid), np.nan)
        return self

    def transform(self, patterns=None):
        return np.column_stack([self.r_grid_, self.h_, self.stderr_])


def estimate_pair_correlation(patterns, r_grid, bandwidth=None):
    """Return ``(h, stderr)`` on ``r_grid``; see :class:`PairCorrelationEstimator`."""
    est = PairCorrelationEstimator(r_grid=r_grid, bandwidth=bandwidth).fit(patterns)
    return est.h_, est.stderr_
