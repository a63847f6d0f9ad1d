"""Noise calibration and sampling."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpsco import (NoiseSpec, approx_budget, gaussian_scale, laplace_scale,
                   pure_budget, sample_noise)
from dpsco.mechanisms import GAUSS_MULTIPLIER


def test_gaussian_scale_formula():
    b = approx_budget(2.0, 1e-6)
    sigma = gaussian_scale(0.5, b)
    assert sigma == pytest.approx(
        4.0 * 0.5 * math.sqrt(math.log(1e6)) / 2.0, rel=1e-15)


def test_gaussian_scale_multiplier_and_zero_sensitivity():
    b = approx_budget(1.0, 1e-5)
    assert gaussian_scale(1.0, b, multiplier=8.0) == pytest.approx(
        2.0 * gaussian_scale(1.0, b), rel=1e-15)
    assert gaussian_scale(0.0, b) == 0.0


def test_gaussian_scale_rejects_pure_budget():
    with pytest.raises(ValueError):
        gaussian_scale(1.0, pure_budget(1.0))
    with pytest.raises(ValueError):
        gaussian_scale(-1.0, approx_budget(1.0, 1e-5))


def test_laplace_scale_formula_and_errors():
    assert laplace_scale(3.0, 1.5) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        laplace_scale(0.0, 1.0)
    with pytest.raises(ValueError):
        laplace_scale(1.0, 0.0)


@given(st.floats(1e-6, 1e3), st.floats(1e-3, 5.0), st.floats(1e-9, 1e-2))
@settings(max_examples=200, deadline=None)
def test_gaussian_calibration_round_trip(sens, eps, delta):
    if eps > 2.0 * math.log(1.0 / delta):
        return
    b = approx_budget(eps, delta)
    sigma = gaussian_scale(sens, b)
    back = sigma * eps / (GAUSS_MULTIPLIER * math.sqrt(math.log(1.0 / delta)))
    assert back == pytest.approx(sens, rel=1e-12)


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec("cauchy", 1.0, 2)
    with pytest.raises(ValueError):
        NoiseSpec("gaussian", -1.0, 2)
    with pytest.raises(ValueError):
        NoiseSpec("gaussian", 1.0, 0)


def test_sample_noise_deterministic_per_seed():
    spec = NoiseSpec("gaussian", 0.7, 5)
    a = sample_noise(spec, np.random.default_rng(3))
    b = sample_noise(spec, np.random.default_rng(3))
    np.testing.assert_array_equal(a, b)
    c = sample_noise(spec, np.random.default_rng(4))
    assert np.any(a != c)


def test_sample_noise_zero_scale_is_zero_vector():
    out = sample_noise(NoiseSpec("laplace", 0.0, 3),
                       np.random.default_rng(0))
    np.testing.assert_array_equal(out, np.zeros(3))


@pytest.mark.parametrize("family,scale", [("gaussian", 0.5),
                                          ("laplace", 0.5)])
def test_sample_noise_empirical_scale(family, scale):
    rng = np.random.default_rng(11)
    draws = np.concatenate([sample_noise(NoiseSpec(family, scale, 1000), rng)
                            for _ in range(20)])
    if family == "gaussian":
        expected_std = scale
    else:
        expected_std = scale * math.sqrt(2.0)
    assert np.std(draws) == pytest.approx(expected_std, rel=0.05)
    assert np.mean(draws) == pytest.approx(0.0, abs=0.02)
