"""Tests for the oscillating-integral probes."""
import numpy as np
import pytest

from homogeig.core.coefficients import CoefficientField
from homogeig.core.errors import ConfigError, DegenerateFitError, ZeroDenominatorError
from homogeig.core.oscillation import (
    MeshFunction,
    OscillationProbe,
    TestFunction,
    averaging_constants,
    check_geometric,
    family_1d,
    family_2d,
    fit_oscillation_rate,
    linear_fit,
    lp_norms,
    oscillation_gap,
    oscillation_ratio,
    young_bound,
)
from homogeig.core.mesh import Mesh2
from homogeig.core.problems import Box, DiscreteFunction

EPS = [0.25, 0.125, 0.0625, 0.03125]


@pytest.fixture
def two_phase():
    return CoefficientField.piecewise([1.0, 3.0])


def test_families_respect_trace_mode():
    """Test zero traces and the requested family size."""
    zero = family_1d(2.0, zero_trace=True, size=20, seed=5)
    free = family_1d(2.0, zero_trace=False, size=20, seed=5)
    ends = np.array([0.0, 2.0])

    assert len(zero) == 20 and len(free) == 20
    for u in zero:
        np.testing.assert_allclose(u(ends), 0.0, atol=1e-12)
    assert free[0](ends)[0] == pytest.approx(1.0)
    assert [u.name for u in family_1d(2.0, True, 20, seed=5)] == [u.name for u in zero]


def test_tensor_family_in_two_dimensions():
    """Test that tensor products keep zero traces on every side."""
    family = family_2d((1.0, 2.0), zero_trace=True, size=8, seed=1)
    x = np.array([0.0, 1.0, 0.3, 0.7])
    y = np.array([0.4, 1.1, 0.0, 2.0])

    assert len(family) == 8
    for u in family:
        np.testing.assert_allclose(u(x, y), 0.0, atol=1e-12)


def test_one_dimensional_family_carries_eigenfunctions():
    """Test that the slots after the closed forms hold normalized eigenfunctions."""
    zero = family_1d(1.0, zero_trace=True, size=24)[16:20]
    free = family_1d(1.0, zero_trace=False, size=24)[16:20]
    x = np.linspace(0.0, 1.0, 11)

    assert [u.name for u in zero] == ["eig1", "eig2", "eig3", "eig4"]
    assert [u.name for u in free] == ["eig1", "eig2", "eig3", "eig4"]
    for u in zero:
        np.testing.assert_allclose(u(np.array([0.0, 1.0])), 0.0, atol=1e-12)
    assert zero[0](np.array([0.5]))[0] == pytest.approx(np.sqrt(2.0), rel=1e-3)
    np.testing.assert_allclose(free[0](x), 1.0, rtol=1e-4)
    assert [u.name for u in family_1d(1.0, True, 24, p=3.0)[16:20]] == ["eig1", "eig2", "eig3", "eig4"]


def test_two_dimensional_family_carries_eigenfunctions():
    """Test P1 eigenfunctions of the averaged problem after the tensor products."""
    zero = family_2d((1.0, 1.0), zero_trace=True, size=20)[16:]
    free = family_2d((1.0, 1.0), zero_trace=False, size=20)[16:]
    t = np.linspace(0.0, 1.0, 9)
    edge_x = np.concatenate([t, t, np.zeros_like(t), np.ones_like(t)])
    edge_y = np.concatenate([np.zeros_like(t), np.ones_like(t), t, t])

    assert all(isinstance(u, MeshFunction) for u in zero + free)
    assert [u.name for u in zero] == ["eig1", "eig2", "eig3", "eig4"]
    for u in zero:
        np.testing.assert_allclose(u(edge_x, edge_y), 0.0, atol=1e-12)
    ground = free[0](t, t[::-1])
    np.testing.assert_allclose(ground, ground[0], rtol=1e-6)
    assert abs(ground[0]) > 0.0


def test_mesh_function_reproduces_linear_functions():
    """Test exact P1 interpolation of x + 2 y on both triangle orientations."""
    mesh = Mesh2.rectangle(1.0, 1.0, 4, 4)
    u = MeshFunction("plane", DiscreteFunction(mesh, mesh.vertices[:, 0] + 2.0 * mesh.vertices[:, 1]))
    x = np.array([0.1, 0.3, 0.55, 0.9, 1.0])
    y = np.array([0.05, 0.6, 0.52, 0.2, 1.0])

    np.testing.assert_allclose(u(x, y), x + 2.0 * y, atol=1e-12)
    np.testing.assert_allclose(u.gradient_norm(x, y), np.sqrt(5.0), rtol=1e-12)


def test_norms_of_sine():
    """Test the W^{1,2} integrals of sin(pi x) on (0, 1)."""
    probe = OscillationProbe(CoefficientField.constant(1.0), Box((1.0,)), 2.0)
    sine = probe.family[0]
    norms = lp_norms(probe, sine)

    assert norms["u"] == pytest.approx(0.5, rel=1e-10)
    assert norms["grad"] == pytest.approx(np.pi**2 / 2.0, rel=1e-10)
    assert norms["cross"] == pytest.approx(2.0, rel=1e-10)


def test_constant_field_has_no_gap():
    """Test that a constant field gives a degenerate fit."""
    probe = OscillationProbe(CoefficientField.constant(2.0), Box((1.0,)), 2.0)

    assert oscillation_gap(probe, probe.family[0], 0.1) == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(DegenerateFitError, match="DEGENERATE_FIT"):
        fit_oscillation_rate(probe, EPS)


def test_zero_trace_gap_decays_at_least_linearly(two_phase):
    """Test a slope of at least one for smooth zero-trace functions."""
    family = family_1d(1.0, zero_trace=True, size=16)
    probe = OscillationProbe(two_phase, Box((1.0,)), 2.0, family=[family[0], family[8]])
    fit = fit_oscillation_rate(probe, EPS, jobs=2)

    assert fit.slope >= 0.9
    assert fit.r2 >= 0.95
    assert fit.mode == "zero-trace"
    assert max(fit.ratios) < 10.0


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_free_trace_ratios_stay_bounded(two_phase, p):
    """Test that gap / (eps || |u|^p ||_{W^{1,1}}) stays bounded as eps shrinks."""
    probe = OscillationProbe(two_phase, Box((1.0,)), p, zero_trace=False)
    ratios = [max(oscillation_ratio(probe, u, eps) for u in probe.family[:16]) for eps in EPS]

    assert max(ratios) < 10.0
    assert probe.trace_mode == "free-trace"


def test_young_inequality_holds_on_family():
    """Test || |u|^p ||_{W^{1,1}} <= p ||u||_{W^{1,p}}^p."""
    probe = OscillationProbe(CoefficientField.piecewise([1.0, 2.0]), Box((1.5,)), 3.0, zero_trace=False)

    for u in probe.family:
        lhs, rhs = young_bound(probe, u)
        assert lhs <= rhs * (1.0 + 1e-12)


def test_zero_function_has_no_ratio(two_phase):
    """Test the vanishing denominator."""
    probe = OscillationProbe(two_phase, Box((1.0,)), 2.0)
    zero = TestFunction("zero", lambda x: 0.0 * x, lambda x: 0.0 * x)

    with pytest.raises(ZeroDenominatorError):
        oscillation_ratio(probe, zero, 0.1)


def test_averaging_constants_are_finite(two_phase):
    """Test both orders of the averaging estimate."""
    probe = OscillationProbe(two_phase, Box((1.0,)), 2.0)
    forward, backward = averaging_constants(probe, probe.family[0], 0.1, V_bar=1.0)

    assert 0.0 <= forward < 10.0
    assert 0.0 <= backward < 10.0


def test_two_dimensional_probe(two_phase):
    """Test the gap of a checkerboard field on the unit square."""
    g = CoefficientField.piecewise([[1.0, 3.0], [3.0, 1.0]])
    probe = OscillationProbe(g, Box((1.0, 1.0)), 2.0)
    u = probe.family[0]

    assert oscillation_gap(probe, u, 0.125) < oscillation_gap(probe, u, 0.5) + 1e-12
    with pytest.raises(ConfigError):
        OscillationProbe(two_phase, Box((1.0, 1.0)), 2.0)


def test_eps_must_be_geometric():
    """Test the scale-list precondition."""
    np.testing.assert_allclose(check_geometric([0.125, 0.5, 0.25, 1.0]), [1.0, 0.5, 0.25, 0.125])
    with pytest.raises(ConfigError):
        check_geometric([0.5, 0.25, 0.125])
    with pytest.raises(ConfigError):
        check_geometric([0.5, 0.25, 0.1, 0.05])
    with pytest.raises(ConfigError):
        oscillation_gap(OscillationProbe(CoefficientField.constant(1.0), Box((1.0,)), 2.0),
                        family_1d(1.0, True, 1)[0], 0.0)


def test_linear_fit_recovers_line():
    """Test slope, intercept and R^2 of an exact line."""
    x = np.log(np.array(EPS))
    slope, intercept, r2 = linear_fit(x, 2.0 * x + 0.5)

    assert slope == pytest.approx(2.0)
    assert intercept == pytest.approx(0.5)
    assert r2 == pytest.approx(1.0)
