"""Tests for the 1D Pruefer shooting solver."""
import numpy as np
import pytest

from homogeig.core.coefficients import CoefficientField
from homogeig.core.errors import ConfigError, NoConvergenceError
from homogeig.core.operators import OperatorSpec
from homogeig.core.problems import BoundaryCondition, ProblemInstance, rayleigh_quotient
from homogeig.core.ptrig import pi_p
from homogeig.core.solver1d import (
    comparison_bounds,
    count_sign_changes,
    eigenfunction_1d,
    shoot,
    solve_1d,
)
from homogeig.core.spectrum import MULTIPLE, ROTATION, VARIATIONAL


def constant_problem(bc: str, p: float = 2.0, V: float = 0.0, beta: float = 0.0) -> ProblemInstance:
    return ProblemInstance.build(
        1.0,
        OperatorSpec(p),
        CoefficientField.constant(1.0),
        CoefficientField.constant(V),
        BoundaryCondition(bc, beta),
    )


def two_phase_problem(bc: str, p: float = 2.0, eps: float = 0.125) -> ProblemInstance:
    prob = ProblemInstance.build(
        1.0,
        OperatorSpec(p),
        CoefficientField.piecewise([1.0, 3.0]),
        CoefficientField.piecewise([1.0, 2.0]),
        BoundaryCondition(bc),
    )
    return prob.at(eps)


def test_dirichlet_laplacian_closed_form():
    """Test lambda_k = (k pi)^2 for k <= 10."""
    spectrum = solve_1d(constant_problem("D"), 10)
    expected = (np.arange(1, 11) * np.pi) ** 2

    np.testing.assert_allclose(spectrum.eigenvalues, expected, rtol=1e-8)
    assert spectrum.solver == "prufer"
    assert spectrum[1] == pytest.approx(9.8696044, rel=1e-7)


@pytest.mark.parametrize("p", [1.5, 3.0, 4.0])
def test_dirichlet_p_laplacian_closed_form(p):
    """Test lambda_k = (p - 1) (k pi_p)^p."""
    spectrum = solve_1d(constant_problem("D", p=p), 5)
    expected = (p - 1.0) * (np.arange(1, 6) * pi_p(p)) ** p

    np.testing.assert_allclose(spectrum.eigenvalues, expected, rtol=1e-7)


def test_neumann_with_potential():
    """Test lambda_k = 1 + ((k - 1) pi)^2."""
    spectrum = solve_1d(constant_problem("N", V=1.0), 3)

    np.testing.assert_allclose(spectrum.eigenvalues, [1.0, 10.8696044, 40.4784176], rtol=1e-7)


def test_robin_small_beta_matches_neumann():
    """Test the beta -> 0 limit."""
    robin = solve_1d(constant_problem("R", V=1.0, beta=1e-8), 4)
    neumann = solve_1d(constant_problem("N", V=1.0), 4)

    np.testing.assert_allclose(robin.eigenvalues, neumann.eigenvalues, atol=1e-6)


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_robin_large_beta_approaches_dirichlet(p):
    """Test the beta -> infinity limit within one percent."""
    robin = solve_1d(constant_problem("R", p=p, beta=1e6), 3)
    dirichlet = solve_1d(constant_problem("D", p=p), 3)

    np.testing.assert_allclose(robin.eigenvalues, dirichlet.eigenvalues, rtol=1e-2)
    assert np.all(robin.eigenvalues <= dirichlet.eigenvalues * (1.0 + 1e-8))


def test_nonflux_constant_coefficients_are_double():
    """Test the periodic spectrum 1, 1 + 4 pi^2 (twice), 1 + 16 pi^2."""
    spectrum = solve_1d(constant_problem("P", V=1.0), 4)
    expected = [1.0, 1.0 + 4 * np.pi**2, 1.0 + 4 * np.pi**2, 1.0 + 16 * np.pi**2]

    np.testing.assert_allclose(spectrum.eigenvalues, expected, rtol=1e-7)
    assert MULTIPLE in spectrum.flags[1]
    assert VARIATIONAL in spectrum.flags[0]


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_nonflux_ground_state_is_potential_ratio(p):
    """Test lambda_1 = V_bar / rho_bar on the averaged problem."""
    prob = ProblemInstance.build(
        1.0,
        OperatorSpec(p),
        CoefficientField.piecewise([1.0, 3.0]),
        CoefficientField.piecewise([1.0, 2.0]),
        BoundaryCondition("P"),
    )
    spectrum = solve_1d(prob, 3)

    assert spectrum[1] == pytest.approx(1.5 / 2.0, rel=1e-8)
    if p != 2.0:
        assert ROTATION in spectrum.flags[1]


def test_spectrum_is_ordered_and_bracketed():
    """Test ordering and the comparison bounds for oscillating weights."""
    prob = two_phase_problem("D", p=3.0)
    spectrum = solve_1d(prob, 5)

    assert np.all(np.diff(spectrum.eigenvalues) > 0.0)
    for k in range(1, 6):
        lower, upper = comparison_bounds(prob, k)
        assert lower <= spectrum[k] <= upper


def test_averaged_limit_of_two_phase_weight():
    """Test lambda_1 = (pi^2 + V_bar) / rho_bar and the decay of the error."""
    prob = ProblemInstance.build(
        1.0,
        OperatorSpec(2.0),
        CoefficientField.piecewise([1.0, 3.0]),
        CoefficientField.constant(1.0),
        BoundaryCondition("D"),
    )
    limit = solve_1d(prob, 1)[1]
    assert limit == pytest.approx((np.pi**2 + 1.0) / 2.0, rel=1e-9)

    errors = [abs(solve_1d(prob.at(1.0 / m), 1)[1] - limit) for m in (8, 16, 32, 64)]
    assert errors[-1] < 0.5 * errors[0]


@pytest.mark.parametrize("k", [1, 2, 4])
def test_eigenfunction_zero_count_and_quotient(k):
    """Test Sturm zero counting and Rayleigh-quotient consistency."""
    prob = two_phase_problem("D")
    spectrum = solve_1d(prob, k)
    u = eigenfunction_1d(spectrum.eigenvectors[k - 1], n_points=801)

    assert count_sign_changes(u) == k - 1
    assert abs(rayleigh_quotient(u, prob) - spectrum[k]) <= 1e-3 * spectrum[k]


def test_first_eigenfunction_is_normalized_sine():
    """Test the reconstruction of sin(pi x) for the constant Dirichlet problem."""
    shot = shoot(constant_problem("D"), 1)
    u = eigenfunction_1d(shot, n_points=401)
    x = u.mesh.nodes
    expected = np.sqrt(2.0) * np.sin(np.pi * x)

    np.testing.assert_allclose(u.values, expected, atol=1e-6)


def test_small_lambda_cap_fails_to_converge():
    """Test NO_CONVERGENCE when the cap lies below the requested eigenvalue."""
    with pytest.raises(NoConvergenceError, match=r"NO_CONVERGENCE\(3\)"):
        solve_1d(constant_problem("D"), 3, lambda_cap=50.0)


def test_two_dimensional_problem_is_rejected():
    """Test that the shooting solver is 1D only."""
    prob = ProblemInstance.build(
        (1.0, 1.0),
        OperatorSpec(2.0, dim=2),
        CoefficientField.constant(1.0, dim=2),
        CoefficientField.constant(1.0, dim=2),
        BoundaryCondition("D"),
    )
    with pytest.raises(ConfigError):
        solve_1d(prob, 1)
