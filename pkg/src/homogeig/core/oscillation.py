"""Empirical checks of the oscillating-integral estimates.

For a Q-periodic g with average g_bar the gap

    | integral_Omega (g(x / eps) - g_bar) |u|^p dx |

is O(eps) times ||grad u||_p^p on zero-trace functions and O(eps) times
|| |u|^p ||_{W^{1,1}} on free-trace functions. A finite seeded family of test
functions can only bound the constants from below.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from homogeig.core.coefficients import CoefficientField, ScaledField
from homogeig.core.errors import ConfigError, DegenerateFitError, ZeroDenominatorError
from homogeig.core.fem2d import eigenfunction_2d, mesh_for, solve_2d
from homogeig.core.mesh import gauss_legendre
from homogeig.core.operators import OperatorSpec
from homogeig.core.problems import BoundaryCondition, Box, DiscreteFunction, ProblemInstance
from homogeig.core.solver1d import eigenfunction_1d, solve_1d

logger = logging.getLogger(__name__)

FAMILY_SIZE = 32
CLOSED_FORM_MEMBERS = 16
EIGEN_MEMBERS = 4
EIGEN_MESH_N = 16
GAP_FLOOR = 1e-13
QUAD_ORDER = 8
_SUBCELLS = 4


class TestFunction:
    """A 1D test function with its derivative and non-smooth points."""

    __test__ = False

    def __init__(
        self,
        name: str,
        value: Callable[[np.ndarray], np.ndarray],
        derivative: Callable[[np.ndarray], np.ndarray],
        breakpoints: Sequence[float] = (),
    ):
        """
        Initialize a test function.

        Args:
            name: Label used in reports
            value: Vectorized u(x)
            derivative: Vectorized u'(x)
            breakpoints: Kinks and sign changes of u
        """
        self.name = name
        self.value = value
        self.derivative = derivative
        self.breakpoints = np.asarray(sorted(breakpoints), dtype=float)

    @property
    def dim(self) -> int:
        return 1

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.value(x)


class TensorFunction:
    """u(x, y) = f(x) g(y) on a rectangle."""

    __test__ = False

    def __init__(self, fx: TestFunction, fy: TestFunction):
        self.fx = fx
        self.fy = fy
        self.name = f"{fx.name}*{fy.name}"

    @property
    def dim(self) -> int:
        return 2

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.fx(x) * self.fy(y)

    def gradient_norm(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.hypot(self.fx.derivative(x) * self.fy(y), self.fx(x) * self.fy.derivative(y))

    def cuts(self, axis: int) -> np.ndarray:
        return (self.fx, self.fy)[axis].breakpoints


class MeshFunction:
    """A P1 function on a structured rectangle mesh, evaluated anywhere."""

    __test__ = False

    def __init__(self, name: str, u: DiscreteFunction):
        mesh = u.mesh
        self.name = name
        self.mesh = mesh
        self.grid = u.values.reshape(mesh.ny + 1, mesh.nx + 1)

    @property
    def dim(self) -> int:
        return 2

    def _locate(self, x: np.ndarray, y: np.ndarray):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        mx, my = self.mesh.x, self.mesh.y
        i = np.clip(np.searchsorted(mx, x, side="right") - 1, 0, self.mesh.nx - 1)
        j = np.clip(np.searchsorted(my, y, side="right") - 1, 0, self.mesh.ny - 1)
        dx, dy = mx[i + 1] - mx[i], my[j + 1] - my[j]
        s, t = (x - mx[i]) / dx, (y - my[j]) / dy
        g = self.grid
        corners = g[j, i], g[j, i + 1], g[j + 1, i], g[j + 1, i + 1]
        return s, t, dx, dy, corners

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        s, t, _, _, (v00, v10, v01, v11) = self._locate(x, y)
        lower = v00 + s * (v10 - v00) + t * (v11 - v10)
        upper = v00 + t * (v01 - v00) + s * (v11 - v01)
        return np.where(s >= t, lower, upper)

    def gradient_norm(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        s, t, dx, dy, (v00, v10, v01, v11) = self._locate(x, y)
        lower = np.hypot((v10 - v00) / dx, (v11 - v10) / dy)
        upper = np.hypot((v11 - v01) / dx, (v01 - v00) / dy)
        return np.where(s >= t, lower, upper)

    def cuts(self, axis: int) -> np.ndarray:
        # diagonal kinks are left to the quadrature
        return (self.mesh.x, self.mesh.y)[axis]


def _sine(j: int, L: float) -> TestFunction:
    w = j * np.pi / L
    zeros = [i * L / j for i in range(1, j)]
    return TestFunction(f"sin{j}", lambda x: np.sin(w * x), lambda x: w * np.cos(w * x), zeros)


def _cosine(j: int, L: float) -> TestFunction:
    w = j * np.pi / L
    zeros = [(i + 0.5) * L / j for i in range(j)] if j else []
    return TestFunction(f"cos{j}", lambda x: np.cos(w * x), lambda x: -w * np.sin(w * x), zeros)


def _bump(a: int, b: int, L: float) -> TestFunction:
    def value(x):
        t = x / L
        return t**a * (1.0 - t) ** b

    def derivative(x):
        t = x / L
        return (a * t ** (a - 1) * (1.0 - t) ** b - b * t**a * (1.0 - t) ** (b - 1)) / L

    return TestFunction(f"bump{a}{b}", value, derivative)


def _exponential(a: float, L: float) -> TestFunction:
    return TestFunction(
        f"exp{a:g}", lambda x: np.exp(a * x / L), lambda x: (a / L) * np.exp(a * x / L)
    )


def _piecewise_linear(name: str, nodes: np.ndarray, values: np.ndarray) -> TestFunction:
    slopes = np.diff(values) / np.diff(nodes)

    def derivative(x):
        cell = np.clip(np.searchsorted(nodes, x, side="right") - 1, 0, slopes.size - 1)
        return slopes[cell]

    cross = np.flatnonzero(values[:-1] * values[1:] < 0.0)
    zeros = nodes[cross] - values[cross] / slopes[cross]
    kinks = nodes[1:-1]
    return TestFunction(
        name, lambda x: np.interp(x, nodes, values), derivative, np.concatenate([kinks, zeros])
    )


def _trace_bc(zero_trace: bool) -> BoundaryCondition:
    return BoundaryCondition("D" if zero_trace else "N")


def eigen_members_1d(L: float, zero_trace: bool, count: int, p: float = 2.0) -> List[TestFunction]:
    """Eigenfunctions of the unit-coefficient problem on (0, L) under D or N."""
    prob = ProblemInstance.build(
        L,
        OperatorSpec(p),
        CoefficientField.constant(1.0),
        CoefficientField.constant(1.0),
        _trace_bc(zero_trace),
    )
    members = []
    for shot in solve_1d(prob, count).eigenvectors:
        u = eigenfunction_1d(shot)
        values = u.values.copy()
        if zero_trace:
            values[0] = values[-1] = 0.0
        members.append(_piecewise_linear(f"eig{shot.k}", u.mesh.nodes, values))
    return members


def eigen_members_2d(
    lengths: Tuple[float, float], zero_trace: bool, count: int, n: int = EIGEN_MESH_N
) -> List[MeshFunction]:
    """P1 eigenfunctions of the unit-coefficient p = 2 problem under D or N."""
    prob = ProblemInstance.build(
        tuple(lengths),
        OperatorSpec(2.0, dim=2),
        CoefficientField.constant(1.0, dim=2),
        CoefficientField.constant(1.0, dim=2),
        _trace_bc(zero_trace),
    )
    mesh = mesh_for(prob, n)
    spectrum = solve_2d(prob, count, mesh)
    return [MeshFunction(f"eig{k}", eigenfunction_2d(spectrum, k, mesh)) for k in range(1, len(spectrum) + 1)]


def family_1d(
    L: float, zero_trace: bool, size: int = FAMILY_SIZE, seed: int = 0, p: float = 2.0
) -> List[TestFunction]:
    """Seeded family of test functions on (0, L).

    Smooth closed forms come first, then solver eigenfunctions, then random
    piecewise-linear members up to size.
    """
    rng = np.random.default_rng(seed)
    members: List[TestFunction] = []
    if zero_trace:
        members += [_sine(j, L) for j in range(1, 9)]
        members += [_bump(a, b, L) for a, b in [(1, 1), (2, 1), (1, 2), (2, 2), (3, 1), (1, 3), (3, 3), (2, 4)]]
    else:
        members += [_cosine(j, L) for j in range(8)]
        members += [_exponential(a, L) for a in (-3.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 3.0)]
    count = min(EIGEN_MEMBERS, size - len(members))
    if count > 0:
        members += eigen_members_1d(L, zero_trace, count, p)
    n = 0
    while len(members) < size:
        nodes = np.concatenate([[0.0], np.sort(rng.uniform(0.0, L, 6)), [L]])
        values = rng.uniform(-1.0, 1.0, nodes.size)
        if zero_trace:
            values[0] = values[-1] = 0.0
        members.append(_piecewise_linear(f"pl{n}", nodes, values))
        n += 1
    return members[:size]


def family_2d(lengths: Tuple[float, float], zero_trace: bool, size: int = FAMILY_SIZE, seed: int = 0):
    """Tensor products of seeded 1D families, with P1 eigenfunctions in the eigenfunction slots."""
    head = CLOSED_FORM_MEMBERS
    fx = family_1d(lengths[0], zero_trace, min(size, head), seed)
    fy = family_1d(lengths[1], zero_trace, min(size, head), seed + 1)
    order = np.random.default_rng(seed).permutation(len(fx))
    members: List = [TensorFunction(fx[i], fy[j]) for i, j in enumerate(order)]
    count = min(EIGEN_MEMBERS, size - len(members))
    if count > 0:
        members += eigen_members_2d(lengths, zero_trace, count)
    rest = size - len(members)
    if rest > 0:
        gx = family_1d(lengths[0], zero_trace, head + EIGEN_MEMBERS + rest, seed)[head + EIGEN_MEMBERS:]
        gy = family_1d(lengths[1], zero_trace, head + EIGEN_MEMBERS + rest, seed + 1)[head + EIGEN_MEMBERS:]
        members += [TensorFunction(a, b) for a, b in zip(gx, gy[::-1])]
    return members[:size]


@dataclass
class OscillationProbe:
    """A periodic field, a domain, an exponent and a test family.

    Attributes:
        g: The oscillating field
        domain: Interval or rectangle
        p: Exponent
        zero_trace: Test functions vanish on the boundary
        family: Test functions; built from the seed when omitted
        seed: Seed of the random members
    """

    g: CoefficientField
    domain: Box
    p: float
    zero_trace: bool = True
    family: List = field(default_factory=list)
    seed: int = 0

    def __post_init__(self):
        if self.g.dim != self.domain.dim:
            raise ConfigError("g: field and domain dimensions differ")
        if not self.p > 1.0:
            raise ConfigError(f"p: exponent must exceed 1, got {self.p}")
        if not self.family:
            if self.domain.dim == 1:
                self.family = family_1d(self.domain.lengths[0], self.zero_trace, seed=self.seed, p=self.p)
            else:
                self.family = family_2d(self.domain.lengths, self.zero_trace, seed=self.seed)

    @property
    def trace_mode(self) -> str:
        return "zero-trace" if self.zero_trace else "free-trace"


def _cuts(length: float, eps: float, extra: Sequence[np.ndarray]) -> np.ndarray:
    step = min(eps, length) / _SUBCELLS
    uniform = np.linspace(0.0, length, int(np.ceil(length / step)) + 1)
    points = np.concatenate([uniform] + [np.asarray(e) for e in extra])
    points = np.unique(points[(points >= 0.0) & (points <= length)])
    return points


def _integrate(probe: OscillationProbe, u, eps: float, integrand: Callable) -> float:
    """Composite Gauss integral of integrand(coords, u) split at every non-smooth line."""
    g_eps = ScaledField(probe.g, eps)
    if probe.domain.dim == 1:
        L = probe.domain.lengths[0]
        cuts = _cuts(L, eps, [g_eps.breakpoints(L), u.breakpoints])
        x, w = gauss_legendre(cuts[:-1], cuts[1:], QUAD_ORDER)
        return float(np.sum(w * integrand((x,), u)))
    W, H = probe.domain.lengths
    xc = _cuts(W, eps, [g_eps.breakpoints(W, 0), u.cuts(0)])
    yc = _cuts(H, eps, [g_eps.breakpoints(H, 1), u.cuts(1)])
    x, wx = gauss_legendre(xc[:-1], xc[1:], QUAD_ORDER)
    y, wy = gauss_legendre(yc[:-1], yc[1:], QUAD_ORDER)
    X = x.ravel()[:, None]
    Y = y.ravel()[None, :]
    weights = wx.ravel()[:, None] * wy.ravel()[None, :]
    return float(np.sum(weights * integrand((X, Y), u)))


def _power(u, coords) -> np.ndarray:
    return np.abs(u(*coords))


def _grad_norm(u, coords) -> np.ndarray:
    if u.dim == 1:
        return np.abs(u.derivative(coords[0]))
    return u.gradient_norm(*coords)


def oscillation_gap(probe: OscillationProbe, u, eps: float) -> float:
    """|integral (g(x / eps) - g_bar) |u|^p|."""
    if not eps > 0.0:
        raise ConfigError(f"eps: must be positive, got {eps}")
    g, g_bar, p = probe.g, probe.g.average, probe.p

    def integrand(coords, u):
        scaled = [c / eps for c in coords]
        return (g(*scaled) - g_bar) * _power(u, coords) ** p

    return abs(_integrate(probe, u, eps, integrand))


def lp_norms(probe: OscillationProbe, u, eps: float = 1.0) -> Dict[str, float]:
    """Integrals of |u|^p, |grad u|^p and p |u|^(p-1) |grad u|."""
    p = probe.p
    return {
        "u": _integrate(probe, u, eps, lambda c, u: _power(u, c) ** p),
        "grad": _integrate(probe, u, eps, lambda c, u: _grad_norm(u, c) ** p),
        "cross": _integrate(
            probe, u, eps, lambda c, u: p * _power(u, c) ** (p - 1.0) * _grad_norm(u, c)
        ),
    }


def oscillation_ratio(probe: OscillationProbe, u, eps: float) -> float:
    """
    Empirical constant of the oscillating-integral estimate.

    Args:
        probe: Field, domain and trace mode
        u: Test function
        eps: Scale

    Returns:
        gap / (eps ||grad u||_p^p) for zero trace, gap / (eps || |u|^p ||_{W^{1,1}}) otherwise
    """
    gap = oscillation_gap(probe, u, eps)
    norms = lp_norms(probe, u, eps)
    if probe.zero_trace:
        denominator = norms["grad"]
    else:
        denominator = norms["u"] + norms["cross"]
    if not denominator > 0.0:
        raise ZeroDenominatorError(f"ZERO_DENOMINATOR: {probe.trace_mode} norm of {u.name} vanishes")
    return gap / (eps * denominator)


def young_bound(probe: OscillationProbe, u) -> Tuple[float, float]:
    """(|| |u|^p ||_{W^{1,1}}, p ||u||_{W^{1,p}}^p); the first never exceeds the second."""
    norms = lp_norms(probe, u)
    return norms["u"] + norms["cross"], probe.p * (norms["u"] + norms["grad"])


def averaging_constants(
    probe: OscillationProbe, u, eps: float, V_bar: float = 0.0, A: float = 1.0
) -> Tuple[float, float]:
    """
    Empirical c in F(u, w1) / F(u, w2) <= 1 + c eps (F(u, V_bar) + G(u)) / F(u, w2).

    Both orders (w1, w2) = (g_bar, g_eps) and (g_eps, g_bar) are returned; g
    plays the weight and G(u) = A ||grad u||_p^p.

    Args:
        probe: Probe whose field is the weight
        u: Test function
        eps: Scale
        V_bar: Averaged potential in the numerator
        A: Constant diffusion coefficient

    Returns:
        (c for averaged over oscillating, c for oscillating over averaged)
    """
    norms = lp_norms(probe, u, eps)
    g, g_bar, p = probe.g, probe.g.average, probe.p
    F_bar = g_bar * norms["u"]
    F_eps = _integrate(
        probe, u, eps, lambda c, u: g(*[ci / eps for ci in c]) * _power(u, c) ** p
    )
    energy = V_bar * norms["u"] + A * norms["grad"]
    if not (energy > 0.0 and F_bar > 0.0 and F_eps > 0.0):
        raise ZeroDenominatorError("ZERO_DENOMINATOR: averaging quotient is undefined")
    c_forward = max(0.0, F_bar / F_eps - 1.0) * F_eps / (eps * energy)
    c_backward = max(0.0, F_eps / F_bar - 1.0) * F_bar / (eps * energy)
    return c_forward, c_backward


@dataclass
class OscillationFit:
    """Least-squares fit of log(max gap) against log(eps)."""

    slope: float
    intercept: float
    r2: float
    eps: List[float]
    gaps: List[float]
    ratios: List[float]
    mode: str
    family_size: int

    def to_dict(self) -> Dict:
        return {
            "mode": self.mode,
            "slope": self.slope,
            "intercept": self.intercept,
            "r2": self.r2,
            "eps": list(self.eps),
            "max_gap": list(self.gaps),
            "max_ratio": list(self.ratios),
            "family_size": self.family_size,
            "note": "maxima over a finite family bound the constants from below",
        }


def check_geometric(eps_list: Sequence[float], minimum: int = 4) -> np.ndarray:
    eps = np.sort(np.asarray(eps_list, dtype=float))[::-1]
    if eps.size < minimum:
        raise ConfigError(f"eps: need at least {minimum} values, got {eps.size}")
    if np.any(eps <= 0.0):
        raise ConfigError("eps: values must be positive")
    ratios = eps[1:] / eps[:-1]
    if np.ptp(ratios) > 1e-9 * ratios.max():
        raise ConfigError("eps: values must form a geometric sequence")
    return eps


def linear_fit(x: np.ndarray, y: np.ndarray) -> Tuple[float, float, float]:
    """Slope, intercept and R^2 of a least-squares line."""
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    total = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum((y - pred) ** 2) / total if total > 0.0 else 1.0
    return float(slope), float(intercept), float(r2)


def fit_oscillation_rate(probe: OscillationProbe, eps_list: Sequence[float], jobs: int = 1) -> OscillationFit:
    """
    Fit the decay rate of the largest gap over the family.

    Args:
        probe: Field, domain and family
        eps_list: At least four eps values in geometric progression
        jobs: Worker threads

    Returns:
        The fit
    """
    eps = check_geometric(eps_list)
    cells = [(u, e) for e in eps for u in probe.family]

    def measure(cell):
        u, e = cell
        gap = oscillation_gap(probe, u, e)
        try:
            ratio = oscillation_ratio(probe, u, e)
        except ZeroDenominatorError:
            ratio = 0.0
        return gap, ratio

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(measure, cells))
    n = len(probe.family)
    gaps = np.array([max(r[0] for r in results[i * n:(i + 1) * n]) for i in range(eps.size)])
    ratios = [max(r[1] for r in results[i * n:(i + 1) * n]) for i in range(eps.size)]
    if np.all(gaps < GAP_FLOOR):
        raise DegenerateFitError("DEGENERATE_FIT: every gap is below the quadrature floor")
    usable = gaps >= GAP_FLOOR
    slope, intercept, r2 = linear_fit(np.log(eps[usable]), np.log(gaps[usable]))
    logger.info("%s oscillation slope %.3f (R^2 %.4f)", probe.trace_mode, slope, r2)
    return OscillationFit(
        slope=slope,
        intercept=intercept,
        r2=r2,
        eps=eps.tolist(),
        gaps=gaps.tolist(),
        ratios=ratios,
        mode=probe.trace_mode,
        family_size=n,
    )
