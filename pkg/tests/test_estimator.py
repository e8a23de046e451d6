import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from rssaoa.channel import observe
from rssaoa.estimator import (
    CalibrationError,
    CalibrationFit,
    FusionLocalizer,
    NoSensorsError,
    calibrate,
    estimate_distance,
    fuse,
    generate_calibration_data,
    individual_estimate,
    localize,
)
from rssaoa.pointproc import sample_ppp_conditional


def test_noiseless_calibration_is_exact(noiseless, rng):
    rss, dist = generate_calibration_data(500, 30.0, noiseless, 2, rng)
    fit = calibrate(rss, dist)
    exact = CalibrationFit.exact(noiseless)
    assert fit.gamma_hat == pytest.approx(-3.52, rel=1e-10)
    assert fit.alpha_hat == pytest.approx(exact.alpha_hat, rel=1e-10)
    assert fit.alpha_hat == pytest.approx(-3.52 * math.log(4250.0), rel=1e-10)


def test_noisy_calibration_converges(params, rng):
    rss, dist = generate_calibration_data(20_000, 30.0, params, 2, rng)
    fit = calibrate(rss, dist)
    exact = CalibrationFit.exact(params)
    assert fit.gamma_hat == pytest.approx(exact.gamma_hat, abs=0.05)
    assert fit.alpha_hat == pytest.approx(exact.alpha_hat, abs=0.2)
    assert fit.residual_var == pytest.approx(params.sigma ** 2, rel=0.05)


def test_calibration_errors(params, rng):
    with pytest.raises(ValueError):
        generate_calibration_data(1, 30.0, params, 2, rng)
    with pytest.raises(CalibrationError, match="singular"):
        calibrate([1e-10, 2e-10, 3e-10], [2.0, 2.0, 2.0])
    with pytest.raises(CalibrationError):
        calibrate([1e-10], [2.0])
    with pytest.raises(CalibrationError):
        calibrate([1e-10, 1e-9], [1.0, 2.0])  # positive slope


def test_fit_round_trip():
    fit = CalibrationFit(-30.0, -3.5, 100, 7.0)
    assert CalibrationFit.from_dict(fit.to_dict()) == fit


def test_estimate_distance_inverts_noiseless_path_loss(noiseless):
    fit = CalibrationFit.exact(noiseless)
    r = np.array([0.2, 5.0, 29.0])
    rss = (4250.0 * r) ** -3.52
    assert estimate_distance(rss, fit) == pytest.approx(r, rel=1e-12)


@pytest.mark.parametrize("d", [2, 3])
def test_noiseless_scene_localizes_target(d, noiseless, rng):
    from rssaoa.channel import ChannelParams, AoaVarianceParams
    # zero-width AOA noise is not allowed, so use a tiny variance
    chan = ChannelParams(noiseless.K, noiseless.beta, 0.0, AoaVarianceParams(1e-14, 2e-14))
    pat = sample_ppp_conditional(40, 10.0, d, rng)
    obs = observe(pat, chan, rng)
    est = localize(obs, CalibrationFit.exact(chan), keep_individual=True)
    assert est.n_used == 40
    assert np.allclose(est.per_sensor, 0.0, atol=1e-5)
    assert np.allclose(est.coords, 0.0, atol=1e-6)


def test_individual_estimate_shapes():
    sensors = np.array([[1.0, 0.0], [0.0, 2.0]])
    out = individual_estimate(sensors, np.array([1.0, 2.0]), np.array([[math.pi], [-math.pi / 2]]))
    assert out == pytest.approx(np.zeros((2, 2)), abs=1e-12)
    with pytest.raises(ValueError):
        individual_estimate(sensors, np.array([1.0, 2.0]), np.zeros((2, 2)))


def test_fuse_is_mean_and_rejects_empty():
    est = fuse(np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert est.coords == pytest.approx([2.0, 3.0])
    with pytest.raises(NoSensorsError):
        fuse(np.empty((0, 2)))


def test_translation_equivariance(params):
    # shifting sensors with fixed measurements shifts every estimate
    rng = np.random.default_rng(3)
    pat = sample_ppp_conditional(30, 10.0, 2, rng)
    obs = observe(pat, params, rng)
    fit = CalibrationFit.exact(params)
    base = localize(obs, fit).coords
    shift = np.array([5.0, -2.0])
    obs.sensors = obs.sensors + shift
    assert localize(obs, fit).coords == pytest.approx(base + shift)


def test_fusion_localizer_api(params, rng):
    rss, dist = generate_calibration_data(2000, 30.0, params, 2, rng)
    loc = FusionLocalizer()
    assert loc.get_params() == {"keep_individual": False}
    assert clone(loc).get_params() == loc.get_params()
    with pytest.raises(NotFittedError):
        loc.predict(None)
    loc.fit(rss, dist)
    assert loc.gamma_hat_ < 0
    obs = observe(sample_ppp_conditional(25, 30.0, 2, rng), params, rng)
    assert loc.transform(obs).shape == (25, 2)
    assert loc.predict(obs) == pytest.approx(loc.transform(obs).mean(axis=0))
    assert loc.predict(obs) == pytest.approx(localize(obs, loc.calibration_).coords)
    ex = FusionLocalizer.from_calibration(CalibrationFit.exact(params))
    assert ex.alpha_hat_ == pytest.approx(CalibrationFit.exact(params).alpha_hat)
