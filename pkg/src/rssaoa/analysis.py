"""Error bounds and Monte Carlo experiments for the fused estimator.

Replications draw their random streams from ``SeedSequence(seed).spawn``,
so replica ``k`` always sees the same stream no matter how many worker
threads are used, and results are reduced in replica order.
"""
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .channel import ChannelParams, aoa_variance, inverse_path_loss, observe
from .estimator import estimate_distance, generate_calibration_data, localize
from .geometry import ball_volume, uniform_in_ball


def seed_sequence(seed, *key):
    """SeedSequence for ``seed`` (int, SeedSequence or None) with an extra spawn key."""
    if isinstance(seed, np.random.SeedSequence):
        base = seed
    else:
        base = np.random.SeedSequence(seed)
    if not key:
        return base
    return np.random.SeedSequence(base.entropy, spawn_key=tuple(base.spawn_key) + tuple(key))


def replicate(fn, reps, seed=None, threads=1):
    """Evaluate ``fn(rng)`` for ``reps`` independent streams, in replica order."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    children = seed_sequence(seed).spawn(reps)

    def run(child):
        return fn(np.random.default_rng(child))

    if threads is None or threads <= 1:
        out = [run(c) for c in children]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(run, children))
    return np.asarray(out, dtype=float)


def mean_stderr(values):
    """Mean and standard error.

    ``math.fsum`` is exactly rounded, so the result does not depend on the
    order of ``values`` (or on how replicas were scheduled).
    """
    values = np.asarray(values, dtype=float).ravel()
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, math.nan
    var = math.fsum((values - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


@dataclass(frozen=True)
class MomentEstimates:
    """Monte Carlo estimates of E[R_hat] and E[R_hat^2].

    ``cov12`` is the covariance between the two sample means.
    """

    m1: float
    m2: float
    se1: float
    se2: float
    n_mc: int
    cov12: float = 0.0

    def __post_init__(self):
        if not (self.m1 >= 0 and self.m2 >= 0):
            raise ValueError("moments must be non-negative")

    def bracket(self, d, radius, tau_at_radius):
        """The common bracket of both bounds and its standard error."""
        c = (2 * d * radius / (d + 1)) * math.exp(-(d - 1) * tau_at_radius / 2)
        value = d * radius**2 / (d + 2) + self.m2 - c * self.m1
        var = self.se2**2 + c * c * self.se1**2 - 2 * c * self.cov12
        return value, math.sqrt(max(var, 0.0))


def rhat_moments(params, fit, radius, d=2, n_mc=10**6, seed=None):
    """Estimate the first two moments of a single sensor's range estimate."""
    if n_mc < 1000:
        raise ValueError("n_mc must be >= 1000")
    rng = np.random.default_rng(seed_sequence(seed))
    rss, _ = generate_calibration_data(n_mc, radius, params, d, rng)
    rhat = estimate_distance(rss, fit)
    rhat2 = rhat * rhat
    m1, m2 = float(np.mean(rhat)), float(np.mean(rhat2))
    cov = np.cov(rhat, rhat2)
    return MomentEstimates(
        m1=m1,
        m2=m2,
        se1=math.sqrt(cov[0, 0] / n_mc),
        se2=math.sqrt(cov[1, 1] / n_mc),
        n_mc=n_mc,
        cov12=float(cov[0, 1] / n_mc),
    )


def cmse_bound(n, d, radius, tau_at_radius, moments, return_stderr=False):
    """Upper bound on the CMSE with ``n`` sensors in the ball."""
    if n < 1:
        raise ValueError("the bound needs n >= 1 (CMSE(0) is 0 by convention)")
    value, se = moments.bracket(d, radius, tau_at_radius)
    if return_stderr:
        return value / n, se / n
    return value / n


def mse_bound(intensity, d, radius, tau_at_radius, moments, return_stderr=False):
    """Upper bound on the MSE of a PPP network with the given intensity."""
    if not intensity > 0:
        raise ValueError("intensity must be positive")
    pref = 2.0 / (intensity * ball_volume(d, radius))
    value, se = moments.bracket(d, radius, tau_at_radius)
    if return_stderr:
        return pref * value, pref * se
    return pref * value


def _squared_error(points, params, fit, rng):
    if len(points) == 0:
        return 0.0
    est = localize(observe(points, params, rng), fit).coords
    return float(est @ est)


def mc_cmse(n, radius, d, params, fit, reps, seed=None, threads=1):
    """Monte Carlo CMSE with exactly ``n`` uniform sensors. Returns ``(mean, stderr)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if reps < 2:
        raise ValueError("reps must be >= 2")

    def one(rng):
        return _squared_error(uniform_in_ball(n, radius, d, rng), params, fit, rng)

    return mean_stderr(replicate(one, reps, seed, threads))


def mc_mse(model, radius, d, params, fit, reps, seed=None, threads=1):
    """Monte Carlo MSE for a deployment model; empty windows contribute 0."""
    if reps < 2:
        raise ValueError("reps must be >= 2")
    model.validate(d)

    def one(rng):
        return _squared_error(model.sample(radius, d, rng).points, params, fit, rng)

    return mean_stderr(replicate(one, reps, seed, threads))


@dataclass
class ExperimentResult:
    grid: list
    empirical: list
    stderr: list
    bound: list
    bound_stderr: list
    reps: int
    seed: "int | None"
    mode: str
    model: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        if len(g) > 1 and np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")

    def rows(self):
        return list(zip(self.grid, self.empirical, self.stderr, self.bound))

    def to_csv(self, fh):
        fh.write("grid,empirical,stderr,bound\n")
        for g, e, s, b in self.rows():
            fh.write(f"{g!r},{e!r},{s!r},{b!r}\n")

    def summary(self, include_time=True):
        out = asdict(self)
        if not include_time:
            out.pop("wall_time")
        return out

    def to_json(self, fh, include_time=True):
        json.dump(self.summary(include_time), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _tau_at(params, radius):
    return aoa_variance(radius, params.aoa)


def run_cmse_experiment(n_grid, radius, d, params, fit, reps, seed=None, threads=1, moments=None):
    """CMSE and its bound over a grid of sensor counts."""
    t0 = time.perf_counter()
    if moments is None:
        moments = rhat_moments(params, fit, radius, d, seed=seed_sequence(seed, 0))
    tau = _tau_at(params, radius)
    emp, se, bnd, bse = [], [], [], []
    for k, n in enumerate(n_grid):
        m, s = mc_cmse(int(n), radius, d, params, fit, reps, seed_sequence(seed, 1, k), threads)
        b, bs = cmse_bound(int(n), d, radius, tau, moments, return_stderr=True)
        emp.append(m), se.append(s), bnd.append(b), bse.append(bs)
    return ExperimentResult(
        grid=[int(n) for n in n_grid], empirical=emp, stderr=se, bound=bnd, bound_stderr=bse,
        reps=reps, seed=seed if not isinstance(seed, np.random.SeedSequence) else None, mode="cmse",
        model={"kind": "ppp-conditional"}, params=params.to_dict(),
        wall_time=time.perf_counter() - t0,
    )


def run_mse_experiment(models, radius, d, params, fit, reps, seed=None, threads=1, moments=None):
    """MSE over a list of ``(intensity, model)`` pairs, with the PPP bound at each intensity."""
    t0 = time.perf_counter()
    if moments is None:
        moments = rhat_moments(params, fit, radius, d, seed=seed_sequence(seed, 0))
    tau = _tau_at(params, radius)
    grid, emp, se, bnd, bse = [], [], [], [], []
    kinds = []
    for k, (lam, model) in enumerate(models):
        m, s = mc_mse(model, radius, d, params, fit, reps, seed_sequence(seed, 2, k), threads)
        b, bs = mse_bound(lam, d, radius, tau, moments, return_stderr=True)
        grid.append(float(lam)), emp.append(m), se.append(s), bnd.append(b), bse.append(bs)
        kinds.append(model.to_dict())
    return ExperimentResult(
        grid=grid, empirical=emp, stderr=se, bound=bnd, bound_stderr=bse,
        reps=reps, seed=seed if not isinstance(seed, np.random.SeedSequence) else None, mode="mse",
        model={"kind": kinds[0]["kind"] if kinds else None, "per_grid": kinds}, params=params.to_dict(),
        wall_time=time.perf_counter() - t0,
    )


def _trapezoid(x, lo, hi, shoulder):
    """Continuous bump: 0 outside [lo, hi], 1 on [lo + w, hi - w], linear in between."""
    w = shoulder * (hi - lo)
    return np.clip(np.minimum(x - lo, hi - x) / w, 0.0, 1.0)


@dataclass(frozen=True)
class LaplaceProbe:
    """Smooth, compactly supported test function on (inverse RSS, angles).

    ``q(N, theta) = weight * bump(N; rss_box) * prod_j bump(theta_j; angle_box[j])``
    where each bump is a trapezoid whose linear shoulders occupy the
    fraction ``shoulder`` of the box width at each end.
    """

    rss_box: tuple
    angle_box: tuple
    shoulder: float = 0.25
    weight: float = 0.05

    def __post_init__(self):
        a, b = self.rss_box
        if not (0 < a < b):
            raise ValueError("need 0 < a < b for the inverse-RSS box")
        for lo, hi in self.angle_box:
            if not lo < hi:
                raise ValueError("angle boxes must be non-degenerate")
        if not (0 < self.shoulder <= 0.5):
            raise ValueError("shoulder must lie in (0, 0.5]")
        if self.weight < 0:
            raise ValueError("weight must be non-negative")

    @classmethod
    def from_distances(cls, params, r_lo, r_hi, d=2, **kwargs):
        """Box whose inverse-RSS range is that of noiseless sensors at distances ``[r_lo, r_hi]``.
        The angle box covers every angle the noise can plausibly produce."""
        box = (float(inverse_path_loss(r_lo, params)), float(inverse_path_loss(r_hi, params)))
        angles = [(-1.5, math.pi + 1.5)] * (d - 2) + [(-math.pi - 1.5, math.pi + 1.5)]
        return cls(rss_box=box, angle_box=tuple(angles), **kwargs)

    def __call__(self, inverse_rss, angles):
        val = _trapezoid(np.asarray(inverse_rss, dtype=float), *self.rss_box, self.shoulder)
        angles = np.asarray(angles, dtype=float)
        for j, (lo, hi) in enumerate(self.angle_box):
            val = val * _trapezoid(angles[..., j], lo, hi, self.shoulder)
        return self.weight * val

    def to_dict(self):
        return {"rss_box": list(self.rss_box), "angle_box": [list(b) for b in self.angle_box],
                "shoulder": self.shoulder, "weight": self.weight}


def empirical_laplace(model, sigma, probe, radius, d, params, reps, seed=None, threads=1):
    """Monte Carlo Laplace functional ``E exp(-sum_i q(N_i, theta_i))`` of the observable process."""
    if reps < 100:
        raise ValueError("reps must be >= 100")
    chan = params.with_sigma(sigma)
    model.validate(d)

    def one(rng):
        pattern = model.sample(radius, d, rng)
        if len(pattern) == 0:
            return 1.0
        obs = observe(pattern, chan, rng)
        return math.exp(-float(np.sum(probe(obs.inverse_rss, obs.angles))))

    return mean_stderr(replicate(one, reps, seed, threads))


def min_inverse_rss(model, sigma, radius, d, params, reps, seed=None, threads=1):
    """Per-replica minimum inverse RSS (the strongest received signal); inf for empty windows."""
    chan = params.with_sigma(sigma)
    model.validate(d)

    def one(rng):
        pattern = model.sample(radius, d, rng)
        if len(pattern) == 0:
            return math.inf
        return float(np.min(observe(pattern, chan, rng).inverse_rss))

    return replicate(one, reps, seed, threads)


@dataclass(frozen=True)
class KsResult:
    statistic: float
    pvalue: float
    critical_1pct: float


def ks_min_inverse_rss(model_a, model_b, sigma, radius, d, params, reps, seed=None, threads=1):
    """Two-sample KS statistic between the per-replica minimum inverse RSS of two models."""
    if reps < 500:
        raise ValueError("reps must be >= 500")
    a = min_inverse_rss(model_a, sigma, radius, d, params, reps, seed_sequence(seed, 0), threads)
    b = min_inverse_rss(model_b, sigma, radius, d, params, reps, seed_sequence(seed, 1), threads)
    res = stats.ks_2samp(a, b)
    crit = math.sqrt(-math.log(0.01 / 2) / 2) * math.sqrt(2.0 / reps)
    return KsResult(float(res.statistic), float(res.pvalue), crit)


def reference_channel():
    """Channel parameters of the reference experiments (sigma_dB = 12)."""
    return ChannelParams()
