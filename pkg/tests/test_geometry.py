import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rssaoa.geometry import (
    ball_volume,
    cart_to_hyper,
    hyper_to_cart,
    lens_volume,
    sphere_surface,
    uniform_in_ball,
    union_volume,
)


@pytest.mark.parametrize("d", [2, 3, 5])
def test_round_trip_many_points(d, rng):
    pts = rng.normal(size=(10_000, d)) * rng.uniform(0.01, 50, size=(10_000, 1))
    h = cart_to_hyper(pts)
    assert np.allclose(hyper_to_cart(h.r, h.angles), pts, rtol=1e-12, atol=1e-12)
    assert np.all(h.angles[:, :-1] >= 0) and np.all(h.angles[:, :-1] <= math.pi)
    assert np.all(h.angles[:, -1] >= 0) and np.all(h.angles[:, -1] < 2 * math.pi)


def test_known_conversions():
    h = cart_to_hyper(np.array([0.0, 1.0]))
    assert h.r == pytest.approx(1.0)
    assert h.angles[0] == pytest.approx(math.pi / 2)
    h = cart_to_hyper(np.array([-1.0, 0.0]))
    assert h.angles[0] == pytest.approx(math.pi)
    h = cart_to_hyper(np.array([0.0, 0.0, 2.0]))
    assert h.r == pytest.approx(2.0)
    assert h.angles == pytest.approx([math.pi / 2, math.pi / 2])
    h = cart_to_hyper(np.array([0.0, 0.0, -3.0]))
    assert h.angles == pytest.approx([math.pi / 2, 3 * math.pi / 2])


def test_trailing_zeros_give_zero_azimuth():
    h = cart_to_hyper(np.array([-2.0, 0.0, 0.0]))
    assert h.angles == pytest.approx([math.pi, 0.0])


@pytest.mark.parametrize("bad", [np.zeros(2), np.array([np.nan, 1.0]), np.array([1.0])])
def test_invalid_points_rejected(bad):
    with pytest.raises(ValueError):
        cart_to_hyper(bad)


def test_ball_volumes():
    assert ball_volume(2, 1.0) == pytest.approx(math.pi)
    assert ball_volume(3, 2.0) == pytest.approx(4 / 3 * math.pi * 8)
    assert sphere_surface(2) == pytest.approx(2 * math.pi)
    assert sphere_surface(3) == pytest.approx(4 * math.pi)
    with pytest.raises(ValueError):
        ball_volume(2, -1.0)


def test_lens_volume_known_values():
    # two unit balls at unit distance
    assert lens_volume(3, 1.0, 1.0) == pytest.approx(5 * math.pi / 12)
    assert lens_volume(2, 1.0, 1.0) == pytest.approx(2 * math.pi / 3 - math.sqrt(3) / 2)
    assert lens_volume(2, 1.0, 0.0) == pytest.approx(math.pi)
    assert lens_volume(2, 1.0, 2.5) == 0.0
    with pytest.raises(NotImplementedError, match="unsupported dimension"):
        lens_volume(4, 1.0, 1.0)


@pytest.mark.parametrize("d", [2, 3])
def test_lens_volume_against_monte_carlo(d, rng):
    rc, rho = 0.7, 0.5
    pts = rng.uniform(-rc, rc + rho, size=(400_000, d))
    inside = (np.linalg.norm(pts, axis=1) < rc) & (np.linalg.norm(pts - np.eye(d)[0] * rho, axis=1) < rc)
    box = (2 * rc + rho) ** d
    p = inside.mean()
    se = box * math.sqrt(p * (1 - p) / len(pts))
    assert abs(box * p - lens_volume(d, rc, rho)) < 4 * se


@given(st.sampled_from([2, 3]), st.floats(0.01, 10), st.floats(0, 30))
def test_union_plus_lens_is_two_balls(d, rc, rho):
    total = union_volume(d, rc, rho) + lens_volume(d, rc, rho)
    assert total == pytest.approx(2 * ball_volume(d, rc), rel=1e-9)
    assert union_volume(d, rc, rho) >= ball_volume(d, rc) * (1 - 1e-12)


@given(st.sampled_from([2, 3]), st.floats(0.01, 10), st.floats(0, 5), st.floats(0, 5))
def test_lens_volume_decreasing(d, rc, a, b):
    lo, hi = sorted((a, b))
    assert lens_volume(d, rc, hi) <= lens_volume(d, rc, lo) + 1e-12


@settings(max_examples=50)
@given(st.integers(2, 6), st.lists(st.floats(-1e3, 1e3), min_size=6, max_size=6))
def test_round_trip_property(d, coords):
    x = np.array(coords[:d])
    if np.linalg.norm(x) < 1e-6:
        return
    h = cart_to_hyper(x)
    assert np.allclose(hyper_to_cart(h.r, h.angles), x, atol=1e-9 * max(1.0, np.abs(x).max()))


@pytest.mark.parametrize("d", [2, 3])
def test_uniform_in_ball_radial_moments(d, rng):
    r = np.linalg.norm(uniform_in_ball(100_000, 3.0, d, rng), axis=1)
    assert r.max() <= 3.0
    se = r.std() / math.sqrt(len(r))
    assert abs(r.mean() - d * 3.0 / (d + 1)) < 4 * se
