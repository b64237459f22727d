"""1D spectra for general p by generalized Pruefer shooting.

With u = r sin_p(theta) and A |u'|^(p-2) u' = K r^(p-1) phi_p(cos_p(theta)),
the eigenvalue equation

    -(A |u'|^(p-2) u')' + V |u|^(p-2) u = lam rho |u|^(p-2) u

becomes

    theta' = m |cos_p|^p + q |sin_p|^p,
    (ln r)' = phi_p(sin_p) cos_p (m - q),

with m = (K / A)^(1/(p-1)) and q = (lam rho - V) / ((p - 1) K). The terminal
phase theta(L) is increasing in lam, so the k-th eigenvalue is the unique
root of theta(L; lam) = target_k. Coefficients enter only through m and q,
so jumps of A, rho and V are bounded jumps of the phase speed. On segments
where all three are constant and q > 0 the phase is propagated exactly.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy import integrate, optimize

from homogeig.core.coefficients import CoefficientField, ScaledField
from homogeig.core.errors import ConfigError, NoConvergenceError, SolverError
from homogeig.core.mesh import Mesh1
from homogeig.core.problems import DiscreteFunction, ProblemInstance, functional_F
from homogeig.core.ptrig import PTrig, pi_p
from homogeig.core.spectrum import MULTIPLE, ROTATION, VARIATIONAL, Spectrum

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
DEFAULT_LAMBDA_CAP = 1e8
DEFAULT_N_THETA = 16
SOLVER_NAME = "prufer"
_MONOTONE_SLACK = 1e-8
_MAX_EXPANSIONS = 200


def _lower_ratio(num_lo: float, den_lo: float, den_hi: float) -> float:
    """Lower bound of V / rho given bounds of both."""
    return num_lo / den_hi if num_lo >= 0.0 else num_lo / den_lo


def comparison_bounds(prob: ProblemInstance, k: int) -> Tuple[float, float]:
    """
    Dirichlet eigenvalues of the constant-coefficient problems that enclose prob.

    Replacing A, rho and V by their bounds gives problems with closed-form
    spectra (p - 1) (k pi_p / L)^p A / rho + V / rho. The k-th eigenvalue of
    prob under Dirichlet conditions lies between them, and the upper value
    bounds the k-th eigenvalue under every other condition.

    Args:
        prob: 1D problem
        k: Eigenvalue index, counted from 1

    Returns:
        (lower, upper)
    """
    p, L = prob.p, prob.domain.lengths[0]
    kinetic = (p - 1.0) * (k * pi_p(p) / L) ** p
    rho_lo, rho_hi = prob.rho.lo, prob.rho.hi
    low_num = kinetic * prob.op.alpha + prob.V.lo
    high_num = kinetic * prob.op.beta + prob.V.hi
    lower = low_num / rho_hi if low_num >= 0.0 else low_num / rho_lo
    upper = high_num / rho_lo if high_num >= 0.0 else high_num / rho_hi
    return lower, upper


@dataclass
class Segment:
    """A piece of (0, L) between coefficient discontinuities."""

    a: float
    b: float
    constant: bool
    A: float = 0.0
    rho: float = 0.0
    V: float = 0.0


@dataclass
class ShootingResult:
    """Outcome of one converged shooting solve.

    Attributes:
        eigenvalue: The eigenvalue
        k: Eigenvalue index, also the rotation count of the phase
        width: Width of the certified bracket around the eigenvalue
        theta0: Initial phase
        target: Terminal phase the eigenvalue attains
        K: Flux scale used by the transformation
        x: Phase sample positions (segment endpoints)
        theta: Phase at the sample positions
        flags: Annotations attached to the eigenvalue
    """

    eigenvalue: float
    k: int
    width: float
    theta0: float
    target: float
    K: float
    x: np.ndarray
    theta: np.ndarray
    prob: ProblemInstance = field(repr=False, default=None)
    flags: Tuple[str, ...] = ()
    residual: float = 0.0


class PruferShooter:
    """Phase propagation for one 1D problem."""

    def __init__(self, prob: ProblemInstance, tol: float = DEFAULT_TOL):
        """
        Initialize the shooter.

        Args:
            prob: 1D problem with a scalar operator coefficient
            tol: Relative eigenvalue tolerance; the ODE runs at tol / 100
        """
        if prob.dim != 1:
            raise ConfigError("dimension: Pruefer shooting needs a 1D problem")
        if prob.op.matrix:
            raise ConfigError("A: Pruefer shooting needs a scalar coefficient")
        self.prob = prob
        self.p = prob.p
        self.L = prob.domain.lengths[0]
        self.trig = PTrig(self.p)
        self.tol = tol
        self.rtol = max(tol / 100.0, 1e-13)
        self.segments = self._segments()
        self.history: List[Tuple[float, float]] = []

    # -- coefficients ---------------------------------------------------------

    def _segments(self) -> List[Segment]:
        prob = self.prob
        law = prob.op.A
        law_field = isinstance(law, CoefficientField)
        cuts = [prob.rho.breakpoints(self.L), prob.V.breakpoints(self.L)]
        if law_field and law.kind == "piecewise":
            cuts.append(ScaledField(law, 1.0).breakpoints(self.L))
        points = np.unique(np.concatenate([[0.0, self.L]] + cuts))
        steady = (
            (prob.rho.is_averaged or prob.rho.base.kind != "trig")
            and (prob.V.is_averaged or prob.V.base.kind != "trig")
            and (not callable(law) or (law_field and law.kind != "trig"))
        )
        segments = []
        for a, b in zip(points[:-1], points[1:]):
            mid = 0.5 * (a + b)
            A, rho, V = self._coefficients(mid)
            segments.append(Segment(a, b, steady, A, rho, V))
        return segments

    def _coefficients(self, x: float) -> Tuple[float, float, float]:
        prob = self.prob
        return (
            float(prob.op.coefficient(np.asarray(x))),
            float(prob.rho(x)),
            float(prob.V(x)),
        )

    # -- propagation ----------------------------------------------------------

    def _speeds(self, lam: float, K: float, A: float, rho: float, V: float) -> Tuple[float, float]:
        m = (K / A) ** (1.0 / (self.p - 1.0))
        q = (lam * rho - V) / ((self.p - 1.0) * K)
        return m, q

    def _exact(self, seg: Segment, lam: float, K: float, theta: float, lnr: float, x: np.ndarray):
        """Closed-form phase/amplitude at positions x in the segment (q > 0)."""
        p, trig = self.p, self.trig
        m, q = self._speeds(lam, K, seg.A, seg.rho, seg.V)
        kappa = (q * m ** (p - 1.0)) ** (1.0 / p)
        sigma = kappa / m
        sp, cp, _, _ = trig.powers(theta)
        lnR = lnr + math.log(sp + sigma ** (-p) * cp) / p
        psi = trig.stretch(theta, sigma) + kappa * (np.asarray(x) - seg.a)
        theta_x = trig.stretch(psi, 1.0 / sigma)
        sp_psi, cp_psi, _, _ = trig.powers(psi)
        lnr_x = lnR + np.log(sp_psi + sigma**p * cp_psi) / p
        return theta_x, lnr_x

    def _rhs(self, seg: Segment, lam: float, K: float) -> Callable:
        p, trig = self.p, self.trig

        def rhs(x: float, y: np.ndarray) -> np.ndarray:
            if seg.constant:
                A, rho, V = seg.A, seg.rho, seg.V
            else:
                A, rho, V = self._coefficients(x)
            m, q = self._speeds(lam, K, A, rho, V)
            sp, cp, ss, sc = trig.powers(y[0])
            cross = ss * sp ** ((p - 1.0) / p) * sc * cp ** (1.0 / p)
            return np.array([m * cp + q * sp, cross * (m - q)])

        return rhs

    def _numeric(self, seg: Segment, lam: float, K: float, theta: float, lnr: float, x: np.ndarray):
        t_eval = np.asarray(x)
        sol = integrate.solve_ivp(
            self._rhs(seg, lam, K),
            (seg.a, seg.b),
            [theta, lnr],
            method="DOP853",
            rtol=self.rtol,
            atol=self.rtol,
            t_eval=t_eval,
        )
        if not sol.success:
            raise SolverError(f"phase integration failed on [{seg.a:.6g}, {seg.b:.6g}]: {sol.message}")
        return sol.y[0], sol.y[1]

    def propagate(
        self, lam: float, K: float, theta0: float, samples: Optional[np.ndarray] = None
    ) -> Tuple[float, float, np.ndarray, np.ndarray]:
        """
        Integrate the phase system across (0, L).

        Args:
            lam: Spectral parameter
            K: Flux scale
            theta0: Phase at x = 0
            samples: Optional sorted positions where phase and amplitude are reported

        Returns:
            (theta(L), ln r(L), theta(samples), ln r(samples))
        """
        theta, lnr = float(theta0), 0.0
        samples = np.zeros(0) if samples is None else np.asarray(samples, dtype=float)
        out_theta = np.empty(samples.size)
        out_lnr = np.empty(samples.size)
        out_theta[samples <= 0.0] = theta
        out_lnr[samples <= 0.0] = lnr
        for seg in self.segments:
            inside = (samples > seg.a) & (samples < seg.b)
            x = np.append(samples[inside], seg.b)
            m, q = self._speeds(lam, K, seg.A, seg.rho, seg.V)
            if seg.constant and q > 0.0:
                th, lr = self._exact(seg, lam, K, theta, lnr, x)
            else:
                th, lr = self._numeric(seg, lam, K, theta, lnr, x)
            out_theta[inside], out_lnr[inside] = th[:-1], lr[:-1]
            theta, lnr = float(th[-1]), float(lr[-1])
            at_end = samples == seg.b
            out_theta[at_end], out_lnr[at_end] = theta, lnr
        return theta, lnr, out_theta, out_lnr

    def phase(self, lam: float, K: float, theta0: float) -> float:
        value = self.propagate(lam, K, theta0)[0]
        self.history.append((lam, value))
        return value

    # -- boundary data --------------------------------------------------------

    def flux_scale(self, k: int) -> float:
        """K chosen so the phase speed is balanced for the k-th mode."""
        prob, p = self.prob, self.p
        A_bar = float(np.mean([s.A for s in self.segments]))
        rho_bar, V_bar = prob.rho.average, prob.V.average
        kinetic = (p - 1.0) * A_bar * (k * self.trig.pi_p / self.L) ** p
        lam_est = (kinetic + V_bar) / rho_bar
        floor = (p - 1.0) * A_bar / self.L**p
        kappa_p = max(lam_est * rho_bar - V_bar, floor) / ((p - 1.0) * A_bar)
        return A_bar * kappa_p ** ((p - 1.0) / p)

    def initial_phase(self, K: float) -> float:
        """Phase at x = 0 encoding the separated boundary condition."""
        tag = self.prob.bc.tag
        if tag == "dirichlet":
            return 0.0
        if tag == "neumann":
            return self.trig.half
        if tag == "robin":
            b_p = (self.prob.bc.beta / K) ** (self.p / (self.p - 1.0))
            if not np.isfinite(b_p):
                return 0.0
            return float(self.trig.phase_from_powers(1.0 / (1.0 + b_p), b_p / (1.0 + b_p)))
        raise ConfigError(f"bc.tag: {tag} has no separated initial phase")

    # -- root finding ---------------------------------------------------------

    def check_monotone(self) -> None:
        """Terminal phase must be nondecreasing in lam over every evaluation."""
        if len(self.history) < 2:
            return
        pts = np.array(sorted(self.history))
        drop = np.diff(pts[:, 1])
        slack = _MONOTONE_SLACK * (1.0 + np.abs(pts[1:, 1]))
        bad = np.flatnonzero(drop < -slack)
        if bad.size:
            i = bad[0]
            raise SolverError(
                f"terminal phase decreased between lambda={pts[i, 0]:.12g} "
                f"and {pts[i + 1, 0]:.12g}"
            )

    def bracket(
        self, residual: Callable[[float], float], k: int, lambda_cap: float
    ) -> Tuple[float, float]:
        """Establish lo < hi with residual(lo) < 0 < residual(hi)."""
        prob = self.prob
        lo = _lower_ratio(prob.V.lo, prob.rho.lo, prob.rho.hi) - 1.0
        expansions = 0
        while residual(lo) >= 0.0:
            lo -= 2.0 * (abs(lo) + 1.0)
            expansions += 1
            if expansions > _MAX_EXPANSIONS:
                raise NoConvergenceError(k, "no lower bracket")
        _, upper = comparison_bounds(prob, k)
        hi = max(upper + 1.0, lo + 1.0)
        if hi > lambda_cap:
            hi = lambda_cap
        while residual(hi) <= 0.0:
            if hi >= lambda_cap:
                raise NoConvergenceError(k, f"no sign change below lambda_cap={lambda_cap:g}")
            hi = min(2.0 * hi if hi > 0.0 else 1.0, lambda_cap)
        if hi <= lo:
            raise NoConvergenceError(k, f"lambda_cap={lambda_cap:g} lies below the spectrum")
        return lo, hi

    def root(
        self, residual: Callable[[float], float], k: int, lambda_cap: float
    ) -> Tuple[float, float]:
        """Eigenvalue and certified bracket width for a monotone residual."""
        lo, hi = self.bracket(residual, k, lambda_cap)
        lam = optimize.brentq(residual, lo, hi, xtol=self.tol / 4.0, rtol=self.tol / 4.0)
        w = 0.5 * self.tol * max(1.0, abs(lam))
        left, right = max(lam - w, lo), min(lam + w, hi)
        if residual(left) <= 0.0 <= residual(right):
            return lam, right - left
        logger.debug("certification failed at lambda=%.12g, bisecting", lam)
        a, b = lo, hi
        while b - a > self.tol * max(1.0, abs(0.5 * (a + b))):
            mid = 0.5 * (a + b)
            if residual(mid) < 0.0:
                a = mid
            else:
                b = mid
        return 0.5 * (a + b), b - a


def _certain_flags(p: float, k: int) -> Tuple[str, ...]:
    return (VARIATIONAL,) if k == 1 or p == 2.0 else (ROTATION,)


def shoot(
    prob: ProblemInstance,
    k: int,
    tol: float = DEFAULT_TOL,
    lambda_cap: float = DEFAULT_LAMBDA_CAP,
    shooter: Optional[PruferShooter] = None,
) -> ShootingResult:
    """
    The k-th eigenvalue under a separated boundary condition.

    Args:
        prob: 1D problem with Dirichlet, Neumann or Robin conditions
        k: Index, counted from 1
        tol: Relative tolerance on the eigenvalue
        lambda_cap: Largest admissible upper bracket
        shooter: Reusable shooter for prob

    Returns:
        The converged shooting result
    """
    shooter = shooter or PruferShooter(prob, tol)
    K = shooter.flux_scale(k)
    theta0 = shooter.initial_phase(K)
    target = k * shooter.trig.pi_p - theta0

    def residual(lam: float) -> float:
        return shooter.phase(lam, K, theta0) - target

    shooter.history = []
    lam, width = shooter.root(residual, k, lambda_cap)
    shooter.check_monotone()
    x = np.array([s.b for s in shooter.segments])
    _, _, theta, _ = shooter.propagate(lam, K, theta0, x)
    logger.debug("%s k=%d: lambda=%.12g (bracket %.2g)", prob.bc.label, k, lam, width)
    return ShootingResult(
        eigenvalue=lam,
        k=k,
        width=width,
        theta0=theta0,
        target=target,
        K=K,
        x=np.concatenate([[0.0], x]),
        theta=np.concatenate([[theta0], theta]),
        prob=prob,
        flags=(VARIATIONAL,),
    )


def solve_1d(
    prob: ProblemInstance,
    k_max: int,
    tol: float = DEFAULT_TOL,
    lambda_cap: float = DEFAULT_LAMBDA_CAP,
    n_theta: int = DEFAULT_N_THETA,
) -> Spectrum:
    """
    The first k_max eigenvalues of a 1D problem.

    Args:
        prob: 1D problem (Dirichlet, Neumann, Robin or NonFlux)
        k_max: Number of eigenvalues
        tol: Relative tolerance on each eigenvalue
        lambda_cap: Largest admissible upper bracket
        n_theta: Initial-phase grid size for the NonFlux search

    Returns:
        The spectrum, one shooting result per eigenvalue in ``meta["shots"]``
    """
    if k_max < 1:
        raise ConfigError(f"k_max: need at least one eigenvalue, got {k_max}")
    if prob.bc.tag == "nonflux":
        return solve_1d_nonflux(prob, k_max, tol, lambda_cap, n_theta)
    if prob.bc.tag not in ("dirichlet", "neumann", "robin"):
        raise ConfigError(f"bc.tag: {prob.bc.tag} is not solved in 1D")
    shooter = PruferShooter(prob, tol)
    shots = [shoot(prob, k, tol, lambda_cap, shooter) for k in range(1, k_max + 1)]
    values = np.array([s.eigenvalue for s in shots])
    logger.info(
        "1D %s eps=%s: %d eigenvalues, lambda_1=%.10g",
        prob.bc.label, prob.epsilon, k_max, values[0],
    )
    return Spectrum(
        eigenvalues=values,
        bc=prob.bc,
        epsilon=prob.epsilon,
        solver=SOLVER_NAME,
        tol=tol,
        errors=np.array([s.width for s in shots]),
        flags=[s.flags for s in shots],
        meta={"p": prob.p},
        eigenvectors=shots,
    )


class _PeriodicSearch:
    """lam*_j(theta0): the lam with theta(L) = theta0 + 2 j pi_p."""

    def __init__(self, shooter: PruferShooter, lambda_cap: float):
        self.shooter = shooter
        self.lambda_cap = lambda_cap
        self.cache: Dict[Tuple[int, float], float] = {}
        self.K: Dict[int, float] = {}

    def value(self, j: int, theta0: float) -> float:
        key = (j, round(theta0, 15))
        if key in self.cache:
            return self.cache[key]
        shooter = self.shooter
        K = self.K.setdefault(j, shooter.flux_scale(max(2 * j, 1)))
        target = theta0 + 2.0 * j * shooter.trig.pi_p
        history = shooter.history

        def residual(lam: float) -> float:
            value = shooter.propagate(lam, K, theta0)[0]
            history.append((lam, value))
            return value - target

        try:
            lam, _ = shooter.root(residual, 2 * j + 1, self.lambda_cap)
        except NoConvergenceError:
            if j > 0:
                raise
            lam = -math.inf
        shooter.check_monotone()
        shooter.history = []
        self.cache[key] = lam
        return lam

    def extremum(self, j: int, grid: np.ndarray, largest: bool) -> Tuple[float, float]:
        sign = -1.0 if largest else 1.0
        values = np.array([sign * self.value(j, t) for t in grid])
        i = int(np.argmin(values))
        step = grid[1] - grid[0]
        res = optimize.minimize_scalar(
            lambda t: sign * self.value(j, float(t)),
            bounds=(grid[i] - step, grid[i] + step),
            method="bounded",
            options={"xatol": math.sqrt(self.shooter.tol) * self.shooter.trig.pi_p},
        )
        if res.fun < values[i]:
            return sign * float(res.fun), float(res.x)
        return sign * values[i], float(grid[i])


def solve_1d_nonflux(
    prob: ProblemInstance,
    k_max: int,
    tol: float = DEFAULT_TOL,
    lambda_cap: float = DEFAULT_LAMBDA_CAP,
    n_theta: int = DEFAULT_N_THETA,
) -> Spectrum:
    """
    Spectrum under u(0) = u(L) and equal fluxes at both ends.

    lambda_1 is the largest lam*_0 over theta0; for j >= 1 the pair
    lambda_{2j}, lambda_{2j+1} is the min and max of lam*_j. Coinciding pairs
    are flagged MULTIPLE. Only lambda_1 (and every value at p = 2) is known to
    be a variational eigenvalue; the others are flagged ROTATION.
    """
    if prob.dim != 1:
        raise ConfigError("dimension: this solver needs a 1D problem")
    shooter = PruferShooter(prob, tol)
    search = _PeriodicSearch(shooter, lambda_cap)
    pi_p_value = shooter.trig.pi_p
    grid = (np.arange(n_theta) + 0.5) * pi_p_value / n_theta

    values: List[float] = []
    flags: List[Tuple[str, ...]] = []
    phases: List[float] = []
    top, theta_top = search.extremum(0, grid, largest=True)
    values.append(top)
    phases.append(theta_top)
    flags.append((VARIATIONAL,))
    j = 1
    while len(values) < k_max:
        low, theta_low = search.extremum(j, grid, largest=False)
        high, theta_high = search.extremum(j, grid, largest=True)
        pair_flags = _certain_flags(prob.p, 2)
        if high - low <= 10.0 * tol * max(1.0, abs(high)):
            pair_flags = pair_flags + (MULTIPLE,)
            logger.warning("nonflux pair j=%d is MULTIPLE at lambda=%.10g", j, high)
        values.extend([low, high])
        phases.extend([theta_low, theta_high])
        flags.extend([pair_flags, pair_flags])
        j += 1
    values, flags, phases = values[:k_max], flags[:k_max], phases[:k_max]

    order = np.argsort(values, kind="stable")
    values = np.asarray(values)[order]
    flags = [flags[i] for i in order]
    phases = [phases[i] for i in order]
    shots = []
    for k, (lam, theta0) in enumerate(zip(values, phases), start=1):
        jj = k // 2
        K = search.K.get(jj, shooter.flux_scale(max(2 * jj, 1)))
        theta_L, lnr_L, _, _ = shooter.propagate(lam, K, theta0)
        shots.append(
            ShootingResult(
                eigenvalue=float(lam),
                k=k,
                width=tol * max(1.0, abs(lam)),
                theta0=theta0,
                target=theta0 + 2.0 * jj * pi_p_value,
                K=K,
                x=np.array([0.0, shooter.L]),
                theta=np.array([theta0, theta_L]),
                prob=prob,
                flags=flags[k - 1],
                residual=float(lnr_L),
            )
        )
    logger.info("1D nonflux eps=%s: %d eigenvalues, lambda_1=%.10g", prob.epsilon, k_max, values[0])
    return Spectrum(
        eigenvalues=values,
        bc=prob.bc,
        epsilon=prob.epsilon,
        solver=SOLVER_NAME,
        tol=tol,
        errors=np.array([s.width for s in shots]),
        flags=flags,
        meta={"p": prob.p, "periodic_residual": [s.residual for s in shots]},
        eigenvectors=shots,
    )


def eigenfunction_1d(result: ShootingResult, n_points: int = 401) -> DiscreteFunction:
    """
    Reconstruct the eigenfunction of a shooting result.

    The function is sampled on n_points uniform points plus every coefficient
    discontinuity, normalized so that F(u, rho) = 1, with u'(0) >= 0 (or
    u(0) >= 0 when u'(0) = 0).

    Args:
        result: Converged shooting result
        n_points: Number of uniform sample points

    Returns:
        The piecewise-linear interpolant of the eigenfunction
    """
    prob = result.prob
    shooter = PruferShooter(prob)
    mesh = Mesh1.uniform(shooter.L, n_points - 1, [s.a for s in shooter.segments[1:]])
    x = mesh.nodes
    _, _, theta, lnr = shooter.propagate(result.eigenvalue, result.K, result.theta0, x)
    sp, _, sign_s, _ = shooter.trig.powers(theta)
    values = np.exp(lnr - lnr.max()) * sign_s * sp ** (1.0 / prob.p)
    u = DiscreteFunction(mesh, values)
    scale = functional_F(u, prob.rho, prob.p) ** (1.0 / prob.p)
    slope = float(shooter.trig.cos(result.theta0))
    start = float(shooter.trig.sin(result.theta0))
    sign = -1.0 if slope < 0.0 or (slope == 0.0 and start < 0.0) else 1.0
    return DiscreteFunction(mesh, sign * values / scale)


def count_sign_changes(u: DiscreteFunction, rel_tol: float = 1e-9) -> int:
    """Interior zeros of u, counted as sign changes of its nodal values."""
    v = u.values[1:-1]
    v = v[np.abs(v) > rel_tol * np.max(np.abs(u.values))]
    return int(np.count_nonzero(np.diff(np.sign(v)) != 0))
