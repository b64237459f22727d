"""Tests for generalized trigonometric functions."""
import math

import numpy as np
import pytest

from homogeig.core.errors import ConfigError
from homogeig.core.ptrig import PTrig, pi_p, pi_p_quadrature


def test_pi_two_is_pi():
    """Test pi_2 = pi."""
    assert pi_p(2.0) == pytest.approx(math.pi, rel=1e-15)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 4.0])
def test_pi_p_closed_form_matches_quadrature(p):
    """Test the closed form against the defining integral."""
    assert pi_p_quadrature(p) == pytest.approx(pi_p(p), rel=1e-10)


def test_p_must_exceed_one():
    """Test the exponent precondition."""
    with pytest.raises(ConfigError):
        pi_p(1.0)


def test_p_two_reduces_to_sine():
    """Test sin_2 = sin and cos_2 = cos on several periods."""
    trig = PTrig(2.0)
    theta = np.linspace(-7.0, 11.0, 401)

    np.testing.assert_allclose(trig.sin(theta), np.sin(theta), atol=1e-12)
    np.testing.assert_allclose(trig.cos(theta), np.cos(theta), atol=1e-12)


@pytest.mark.parametrize("p", [1.5, 3.0, 4.0])
def test_pythagorean_identity_and_symmetries(p):
    """Test |sin_p|^p + |cos_p|^p = 1 and the reflections."""
    trig = PTrig(p)
    t = np.linspace(0.0, 3.0 * trig.pi_p, 301)

    np.testing.assert_allclose(np.abs(trig.sin(t)) ** p + np.abs(trig.cos(t)) ** p, 1.0, atol=1e-12)
    np.testing.assert_allclose(trig.sin(trig.pi_p - t), trig.sin(t), atol=1e-12)
    np.testing.assert_allclose(trig.sin(t + trig.pi_p), -trig.sin(t), atol=1e-12)
    assert trig.sin(trig.half) == pytest.approx(1.0)


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_arcsin_inverts_sin_on_first_quarter(p):
    """Test arcsin_p(sin_p(t)) = t."""
    trig = PTrig(p)
    t = np.linspace(0.0, trig.half, 51)

    np.testing.assert_allclose(trig.arcsin_p(trig.sin(t)), t, atol=1e-10)


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_derivative_of_sin_is_cos(p):
    """Test sin_p' = cos_p by central differences."""
    trig = PTrig(p)
    t = np.linspace(0.1, 2.0 * trig.pi_p - 0.1, 40)
    h = 1e-6

    np.testing.assert_allclose((trig.sin(t + h) - trig.sin(t - h)) / (2 * h), trig.cos(t), atol=1e-6)


def test_stretch_keeps_quarter_and_scales_tangent():
    """Test tan(phi) = sigma tan(theta) in the quarter of theta for p = 2."""
    trig = PTrig(2.0)
    theta = np.array([0.3, 2.0, 3.5, 5.5])
    phi = trig.stretch(theta, 2.5)

    np.testing.assert_allclose(np.tan(phi), 2.5 * np.tan(theta), rtol=1e-10)
    np.testing.assert_array_equal(trig.reduce(phi)[0], trig.reduce(theta)[0])
    np.testing.assert_allclose(trig.stretch(theta, 1.0), theta, atol=1e-12)
