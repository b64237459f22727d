"""Tests for diffusion laws and the hypothesis checker."""
import numpy as np
import pytest

from homogeig.core.coefficients import CoefficientField
from homogeig.core.errors import ConfigError, HypothesisRejected
from homogeig.core.operators import (
    CallableOperator,
    OperatorSpec,
    apply,
    check_hypotheses,
    potential,
)


def test_apply_identity_matrix():
    """Test a(x, xi) = xi for p = 2 and A = I."""
    op = OperatorSpec(2.0, A=[[1.0, 0.0], [0.0, 1.0]], dim=2)

    np.testing.assert_allclose(apply(op, np.array([0.3, 0.4]), np.array([3.0, 4.0])), [3.0, 4.0])
    assert potential(op, np.array([0.3, 0.4]), np.array([1.0, 1.0])) == pytest.approx(2.0)


def test_apply_scalar_power_law():
    """Test 2 |3|^2 3 = 54 for p = 4 and A = 2."""
    op = OperatorSpec(4.0, A=2.0)

    assert apply(op, np.array([0.5]), np.array([3.0]))[0] == pytest.approx(54.0)
    assert potential(op, np.array([0.5]), np.array([-2.0]))[0] == pytest.approx(2.0 * 16.0)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_apply_vanishes_at_zero(p):
    """Test a(x, 0) = 0 and Phi(x, 0) = 0 for every p."""
    op = OperatorSpec(p, A=CoefficientField.piecewise([1.0, 2.0]))
    x = np.linspace(0.0, 1.0, 5)

    np.testing.assert_array_equal(apply(op, x, np.zeros(5)), 0.0)
    np.testing.assert_array_equal(potential(op, x, np.zeros(5)), 0.0)


def test_potential_gradient_matches_law():
    """Test grad Phi = p a by central differences."""
    op = OperatorSpec(3.0, A=lambda x, y: 1.0 + x**2 / (1.0 + x**2), dim=2, alpha=1.0, beta=1.5)
    rng = np.random.default_rng(7)
    h = 1e-5
    for _ in range(20):
        x = rng.random(2)
        xi = rng.uniform(-2.0, 2.0, 2)
        grad = np.array(
            [
                (potential(op, x, xi + h * e) - potential(op, x, xi - h * e)) / (2.0 * h)
                for e in np.eye(2)
            ]
        )
        expected = 3.0 * apply(op, x, xi)
        assert np.linalg.norm(grad - expected) <= 1e-6 * np.linalg.norm(expected)


def test_homogeneity():
    """Test a(x, t xi) = t^(p-1) a(x, xi)."""
    op = OperatorSpec(3.0, A=CoefficientField.trig([{"k": 0, "cos": 2.0}, {"k": 1, "cos": 0.5}]))
    x = np.linspace(0.0, 1.0, 11)
    xi = np.linspace(-2.0, 2.0, 11)
    for t in (0.1, 2.0, 7.5):
        np.testing.assert_allclose(apply(op, x, t * xi), t**2 * apply(op, x, xi), rtol=1e-10)


def test_matrix_requires_p_two():
    """Test that matrix coefficients are limited to p = 2."""
    with pytest.raises(ConfigError):
        OperatorSpec(3.0, A=[[1.0, 0.0], [0.0, 1.0]], dim=2)


def test_declared_ellipticity_must_hold():
    """Test that declared bounds narrower than the field are rejected."""
    with pytest.raises(ConfigError):
        OperatorSpec(2.0, A=CoefficientField.piecewise([1.0, 3.0]), alpha=2.0)


def test_laplacian_passes_every_hypothesis():
    """Test the linear Laplacian residuals."""
    op = OperatorSpec(2.0, A=[[1.0, 0.0], [0.0, 1.0]], dim=2)
    report = check_hypotheses(op, 1000, seed=0)

    assert report.passed
    assert max(report.residuals.values()) <= 1e-12
    assert report.h8_alpha == pytest.approx(1.0)
    assert report.h0 == "vacuous"


def test_weighted_p_laplacian_passes():
    """Test p = 3 with A(x) = 1 + x1^2 / (1 + x1^2)."""
    op = OperatorSpec(3.0, A=lambda x, y: 1.0 + x**2 / (1.0 + x**2), dim=2, alpha=1.0, beta=1.5)
    report = check_hypotheses(op, 1000, seed=1)

    assert report.passed
    for h in ("H1", "H2", "H3", "H4", "H5", "H7"):
        assert report.residuals[h] <= 1e-9
    assert report.h8_alpha > 0.0
    assert "median" in report.h6_ratio


def test_checker_is_deterministic():
    """Test identical reports for identical seeds."""
    op = OperatorSpec(2.5, A=CoefficientField.piecewise([1.0, 2.0]))

    assert check_hypotheses(op, 200, seed=4).to_dict() == check_hypotheses(op, 200, seed=4).to_dict()


def test_non_odd_law_is_rejected():
    """Test that a shifted law fails oddness."""
    op = CallableOperator(lambda x, xi: xi + 0.1, p=2.0, alpha=1.0, beta=1.0)

    with pytest.raises(HypothesisRejected) as info:
        check_hypotheses(op, 1000, seed=0)
    assert "H5" in info.value.hypothesis_ids
    assert "REJECTED" in str(info.value)


def test_sample_count_must_be_positive():
    """Test the sample-size precondition."""
    with pytest.raises(ConfigError):
        check_hypotheses(OperatorSpec(2.0), 0)
