"""Tests for the 1D finite-element reference."""
import numpy as np
import pytest

from homogeig.core.coefficients import CoefficientField
from homogeig.core.errors import ConfigError
from homogeig.core.fem1d import assemble_1d, reference_spectrum_1d, solve_fem1d
from homogeig.core.mesh import Mesh1
from homogeig.core.operators import OperatorSpec
from homogeig.core.problems import BoundaryCondition, ProblemInstance
from homogeig.core.solver1d import solve_1d


def laplacian(bc: str, V: float = 0.0) -> ProblemInstance:
    return ProblemInstance.build(
        1.0,
        OperatorSpec(2.0),
        CoefficientField.constant(1.0),
        CoefficientField.constant(V),
        BoundaryCondition(bc, 1.0 if bc == "R" else 0.0),
    )


def test_matrices_are_symmetric_and_consistent():
    """Test that the rho-mass matrix integrates rho and constants lie in the stiffness kernel."""
    prob = ProblemInstance.build(
        1.0,
        OperatorSpec(2.0),
        CoefficientField.piecewise([1.0, 3.0]),
        CoefficientField.constant(1.0),
        BoundaryCondition("N"),
    ).at(0.25)
    mesh = Mesh1.uniform(1.0, 32, prob.rho.breakpoints(1.0))
    K, M_rho, M_V = assemble_1d(prob, mesh)
    one = np.ones(mesh.n_nodes)

    assert abs(K - K.T).max() == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(K @ one, 0.0, atol=1e-9)
    assert one @ M_rho @ one == pytest.approx(2.0, rel=1e-12)
    assert one @ M_V @ one == pytest.approx(1.0, rel=1e-12)


def test_dirichlet_extrapolation_is_sharp():
    """Test that Richardson extrapolation reaches (k pi)^2 to 1e-7."""
    spectrum = reference_spectrum_1d(laplacian("D"), 4, n_cells=256)

    np.testing.assert_allclose(spectrum.eigenvalues, (np.arange(1, 5) * np.pi) ** 2, rtol=1e-7)
    assert spectrum.solver == "fem1d-richardson"


def test_plain_p1_overestimates():
    """Test that conforming elements bound the Dirichlet eigenvalues from above."""
    spectrum = solve_fem1d(laplacian("D"), 3, n_cells=64)
    exact = (np.arange(1, 4) * np.pi) ** 2

    assert np.all(spectrum.eigenvalues >= exact)
    np.testing.assert_allclose(spectrum.eigenvalues, exact, rtol=1e-2)


def test_nonflux_constraint_gives_periodic_spectrum():
    """Test the identified endpoints for V = 1."""
    spectrum = reference_spectrum_1d(laplacian("P", V=1.0), 3)

    np.testing.assert_allclose(spectrum.eigenvalues, [1.0, 1.0 + 4 * np.pi**2, 1.0 + 4 * np.pi**2], rtol=1e-6)


@pytest.mark.slow
@pytest.mark.parametrize("bc", ["D", "N", "R"])
def test_agrees_with_shooting_on_oscillating_weights(bc):
    """Test the P1 reference against the shooting solver for k <= 10."""
    prob = ProblemInstance.build(
        1.0,
        OperatorSpec(2.0),
        CoefficientField.piecewise([1.0, 3.0]),
        CoefficientField.piecewise([1.0, 2.0]),
        BoundaryCondition(bc, 1.0 if bc == "R" else 0.0),
    ).at(0.125)
    reference = reference_spectrum_1d(prob, 10, n_cells=1024)
    shooting = solve_1d(prob, 10)

    np.testing.assert_allclose(reference.eigenvalues, shooting.eigenvalues, rtol=1e-4)


def test_needs_p_two():
    """Test that the linear reference refuses p != 2."""
    prob = ProblemInstance.build(
        1.0, OperatorSpec(3.0), CoefficientField.constant(1.0), CoefficientField.constant(0.0),
        BoundaryCondition("D"),
    )
    with pytest.raises(ConfigError):
        solve_fem1d(prob, 2)
