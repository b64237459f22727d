"""Epsilon and k sweeps, rate fits and the boundary-condition ordering audit."""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from homogeig.core.coefficients import AVERAGED, Epsilon
from homogeig.core.errors import ConfigError, SolverError
from homogeig.core.fem2d import aligned_lines, reference_spectrum, solve_2d
from homogeig.core.mesh import Mesh2
from homogeig.core.oscillation import check_geometric, linear_fit
from homogeig.core.problems import BoundaryCondition, ProblemInstance
from homogeig.core.solver1d import solve_1d
from homogeig.core.spectrum import Spectrum

logger = logging.getLogger(__name__)

OK = "ok"
UNRESOLVED = "unresolved"
DEGENERATE = "DEGENERATE_FIT"

R2_THRESHOLD = 0.95
SLOPE_THRESHOLD = 0.9
CONSTANT_GROWTH_SLACK = 0.5
DIRICHLET_GROWTH_BAND = 0.15
STEKLOV_GROWTH_SLACK = 0.3
ORDERING_SLACK = 1e-8

# (lower, upper) pairs of the boundary-condition ordering chain
ORDERING = (("B", "N"), ("N", "P"), ("N", "R"), ("P", "D"), ("R", "D"), ("B", "S"))


@dataclass
class SolverSettings:
    """Tolerances and discretization knobs shared by every solve."""

    tol: float = 1e-9
    lambda_cap: float = 1e8
    mesh_n: int = 64
    richardson: bool = True
    dense_limit: int = 4000
    n_theta: int = 16
    fem_tol: float = 1e-8
    record_timing: bool = False
    budget: float = 0.1

    @classmethod
    def from_dict(cls, data: Optional[Dict] = None) -> "SolverSettings":
        data = dict(data or {})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"solver.{unknown[0]}: unknown key")
        settings = cls(**data)
        try:
            valid = settings.tol > 0.0 and settings.fem_tol > 0.0 and settings.budget > 0.0
        except TypeError:
            valid = False
        if not valid:
            raise ConfigError("solver.tol: tolerances must be positive")
        if not isinstance(settings.mesh_n, int) or settings.mesh_n < 1:
            raise ConfigError(f"solver.mesh_n: must be a positive integer, got {settings.mesh_n!r}")
        return settings

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class SweepRow:
    bc: str
    k: int
    eps: Optional[float]
    lam: float
    err_est: float
    solver: str
    tol: float
    wall_ms: float = 0.0
    status: str = OK

    @property
    def averaged(self) -> bool:
        return self.eps is None


@dataclass
class SweepTable:
    """Eigenvalues at every (bc, k, eps) next to the averaged limits.

    Attributes:
        family: Problem family id (the experiment name)
        dimension: Space dimension
        p: Exponent of the operator
        rows: Ordered rows; AVERAGED rows carry eps None
        config_hash: Digest of the run-config that produced the table
        settings: Solver tolerances used
    """

    family: str
    dimension: int
    p: float
    rows: List[SweepRow] = field(default_factory=list)
    config_hash: str = ""
    settings: Dict = field(default_factory=dict)

    def bcs(self) -> List[str]:
        return list(dict.fromkeys(r.bc for r in self.rows))

    def ks(self) -> List[int]:
        return sorted({r.k for r in self.rows})

    def averaged(self, bc: str, k: int) -> SweepRow:
        for row in self.rows:
            if row.bc == bc and row.k == k and row.averaged:
                return row
        raise ConfigError(f"table: no averaged row for bc={bc} k={k}")

    def oscillating(self, bc: str, k: int) -> List[SweepRow]:
        rows = [r for r in self.rows if r.bc == bc and r.k == k and not r.averaged]
        return sorted(rows, key=lambda r: -r.eps)

    def to_dict(self) -> Dict:
        return {
            "family": self.family,
            "dimension": self.dimension,
            "p": self.p,
            "config_hash": self.config_hash,
            "settings": self.settings,
            "rows": [asdict(r) for r in self.rows],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "SweepTable":
        try:
            rows = [SweepRow(**r) for r in data["rows"]]
            return cls(
                family=data["family"],
                dimension=int(data["dimension"]),
                p=float(data["p"]),
                rows=rows,
                config_hash=data.get("config_hash", ""),
                settings=data.get("settings", {}),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"table: malformed sweep table ({exc})") from exc


def _validate_eps(eps_list: Sequence[float]) -> List[float]:
    if not len(eps_list):
        raise ConfigError("sweep.eps: need at least one value")
    if len(eps_list) >= 2:
        return check_geometric(eps_list, minimum=2).tolist()
    if not eps_list[0] > 0.0:
        raise ConfigError("sweep.eps: values must be positive")
    return [float(eps_list[0])]


def common_mesh(prob: ProblemInstance, eps_list: Sequence[float], n: int, resolution: float = 4.0) -> Mesh2:
    """One mesh aligned with the discontinuity lines of every eps and resolving the smallest."""
    W, H = prob.domain.lengths
    oscillating = not (prob.rho.base.is_constant() and prob.V.base.is_constant())
    if eps_list and oscillating:
        n = max(n, int(np.ceil(resolution * np.sqrt(2.0) / min(eps_list))))
    lines = [[], []]
    for eps in eps_list:
        at_eps = prob.at(eps)
        for axis in (0, 1):
            lines[axis].append(aligned_lines(at_eps, axis))
    x_lines = np.unique(np.concatenate(lines[0])) if lines[0] else ()
    y_lines = np.unique(np.concatenate(lines[1])) if lines[1] else ()
    mesh = Mesh2.rectangle(W, H, max(1, int(round(n * W))), max(1, int(round(n * H))), x_lines, y_lines)
    logger.debug("common mesh %dx%d for %d scales", mesh.nx, mesh.ny, len(eps_list))
    return mesh


def solve_cell(
    prob: ProblemInstance,
    bc: BoundaryCondition,
    eps: Epsilon,
    k_max: int,
    settings: SolverSettings,
    mesh: Optional[Mesh2] = None,
    richardson: Optional[bool] = None,
) -> Spectrum:
    """The first k_max eigenvalues of prob under bc at scale eps."""
    instance = prob.at(eps).with_bc(bc)
    if instance.dim == 1:
        return solve_1d(instance, k_max, settings.tol, settings.lambda_cap, settings.n_theta)
    richardson = settings.richardson if richardson is None else richardson
    if richardson:
        return reference_spectrum(
            instance, k_max, mesh=mesh, n=settings.mesh_n,
            tol=settings.fem_tol, dense_limit=settings.dense_limit,
        )
    return solve_2d(instance, k_max, mesh, settings.fem_tol, settings.dense_limit)


def sweep(
    prob: ProblemInstance,
    bc_list: Sequence[BoundaryCondition],
    ks: Sequence[int],
    eps_list: Sequence[float],
    settings: Optional[SolverSettings] = None,
    jobs: int = 1,
    family: str = "",
    config_hash: str = "",
) -> SweepTable:
    """
    Solve every (bc, eps) cell plus the averaged limit and tabulate the ks.

    Args:
        prob: Problem family; its own bc and eps are ignored
        bc_list: Boundary conditions to sweep
        ks: Eigenvalue indices to tabulate
        eps_list: Scales 1/m in geometric progression
        settings: Solver settings
        jobs: Worker threads
        family: Family id stored in the table
        config_hash: Provenance digest stored in the table

    Returns:
        The table, rows ordered by bc, then averaged before eps descending, then k
    """
    settings = settings or SolverSettings()
    if not bc_list:
        raise ConfigError("problem.bcs: need at least one boundary condition")
    ks = sorted({int(k) for k in ks})
    if not ks or ks[0] < 1:
        raise ConfigError("sweep.ks: indices must be positive")
    eps_values = sorted(_validate_eps(eps_list), reverse=True)
    k_max = ks[-1]
    mesh = common_mesh(prob, eps_values, settings.mesh_n) if prob.dim == 2 else None
    scales: List[Epsilon] = [AVERAGED] + eps_values
    cells = [(bc, eps) for bc in bc_list for eps in scales]

    def run(cell: Tuple[BoundaryCondition, Epsilon]) -> Tuple[Spectrum, float]:
        bc, eps = cell
        start = time.perf_counter()
        try:
            spectrum = solve_cell(prob, bc, eps, k_max, settings, mesh)
        except SolverError as exc:
            label = "averaged" if eps is AVERAGED else eps
            raise SolverError(str(exc), cell=(bc.label, getattr(exc, "k", None), label)) from exc
        wall = (time.perf_counter() - start) * 1000.0 if settings.record_timing else 0.0
        logger.info("cell %s eps=%s solved (%s)", bc.label, spectrum.epsilon_label, spectrum.solver)
        return spectrum, wall

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(run, cells))

    rows: List[SweepRow] = []
    for (bc, eps), (spectrum, wall) in zip(cells, results):
        if len(spectrum) < k_max:
            raise SolverError(
                f"only {len(spectrum)} eigenvalues available", cell=(bc.label, k_max, eps)
            )
        for k in ks:
            rows.append(
                SweepRow(
                    bc=bc.label,
                    k=k,
                    eps=None if eps is AVERAGED else float(eps),
                    lam=spectrum[k],
                    err_est=float(spectrum.errors[k - 1]),
                    solver=spectrum.solver,
                    tol=float(spectrum.tol),
                    wall_ms=round(wall, 3),
                )
            )
    table = SweepTable(
        family=family,
        dimension=prob.dim,
        p=prob.p,
        rows=rows,
        config_hash=config_hash,
        settings=settings.to_dict(),
    )
    mark_unresolved(table, settings.budget)
    return table


def _solver_floor(row: SweepRow) -> float:
    return 10.0 * row.tol * max(1.0, abs(row.lam))


def mark_unresolved(table: SweepTable, budget: float) -> int:
    """
    Flag cells whose discretization error exceeds budget times the smallest homogenization error.

    Gaps at the solver floor do not set the smallest error; they are left to
    the fit, which reports them as degenerate.
    """
    marked = 0
    for bc in table.bcs():
        for k in table.ks():
            limit = table.averaged(bc, k)
            rows = table.oscillating(bc, k)
            gaps = [abs(r.lam - limit.lam) for r in rows if abs(r.lam - limit.lam) > _solver_floor(r)]
            if not gaps:
                continue
            smallest = min(gaps)
            for row in rows:
                if row.err_est + limit.err_est > budget * smallest:
                    row.status = UNRESOLVED
                    marked += 1
    if marked:
        logger.warning("%d sweep cells exceed the discretization budget and are UNRESOLVED", marked)
    return marked


def growth_references(tag: str, p: float, dim: int) -> Tuple[float, float]:
    """Reference exponents (lambda_k growth, C_k growth) for a boundary condition."""
    if tag == "S":
        ref = (p - 1.0) / (dim - 1.0)
        return ref, ref
    if tag == "B" and p < dim:
        boundary = (p - 1.0) / (dim - 1.0)
        return min(p / dim, boundary), 2.0 * boundary
    return p / dim, 2.0 * p / dim


@dataclass
class CellFit:
    """Fit of |lambda_k^eps - lambda_k| against eps for one (bc, k)."""

    bc: str
    k: int
    status: str
    eps: List[float]
    errors: List[float]
    slope: Optional[float] = None
    intercept: Optional[float] = None
    r2: Optional[float] = None
    rate_constant: Optional[float] = None
    sup_constant: Optional[float] = None
    eigen_constant: Optional[float] = None
    drift: Optional[float] = None
    passed: Optional[bool] = None


@dataclass
class GrowthFit:
    """Exponents of lambda_k and C_k against k for one boundary condition."""

    bc: str
    ks: List[int]
    lambdas: List[float]
    lambda_exponent: Optional[float]
    lambda_reference: float
    lambda_passed: Optional[bool]
    constant_exponent: Optional[float]
    constant_reference: float
    constant_passed: Optional[bool]


@dataclass
class RateReport:
    family: str
    dimension: int
    p: float
    config_hash: str
    cells: List[CellFit]
    growth: List[GrowthFit]

    def to_dict(self) -> Dict:
        return {
            "family": self.family,
            "dimension": self.dimension,
            "p": self.p,
            "config_hash": self.config_hash,
            "cells": [asdict(c) for c in self.cells],
            "growth": [asdict(g) for g in self.growth],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "RateReport":
        try:
            report = cls(
                family=data["family"],
                dimension=int(data["dimension"]),
                p=float(data["p"]),
                config_hash=data.get("config_hash", ""),
                cells=[CellFit(**c) for c in data["cells"]],
                growth=[GrowthFit(**g) for g in data["growth"]],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"report: malformed rate report ({exc})") from exc
        if not report.cells and not report.growth:
            raise ConfigError("report: rate report is empty")
        return report

    def cell(self, bc: str, k: int) -> CellFit:
        for c in self.cells:
            if c.bc == bc and c.k == k:
                return c
        raise KeyError((bc, k))


def _letter(label: str) -> str:
    return label[0]


def fit_cell(table: SweepTable, bc: str, k: int, min_points: int = 4) -> CellFit:
    """
    Log-log least squares of the homogenization error for one (bc, k).

    Cells whose errors sit at the solver floor are reported DEGENERATE_FIT.
    """
    limit = table.averaged(bc, k)
    rows = [r for r in table.oscillating(bc, k) if r.status == OK]
    eps = np.array([r.eps for r in rows], dtype=float)
    errors = np.array([abs(r.lam - limit.lam) for r in rows], dtype=float)
    floor = np.array([_solver_floor(r) + 10.0 * (r.err_est + limit.err_est) for r in rows])
    fit = CellFit(bc=bc, k=k, status=DEGENERATE, eps=eps.tolist(), errors=errors.tolist())
    usable = errors > floor
    if usable.sum() < min_points:
        logger.warning(
            "bc=%s k=%d: %s: %d of %d errors above the solver floor",
            bc, k, DEGENERATE, int(usable.sum()), len(rows),
        )
        return fit
    e, x = errors[usable], eps[usable]
    fit.slope, fit.intercept, fit.r2 = linear_fit(np.log(x), np.log(e))
    # C_k of |lambda_k^eps - lambda_k| ~ C_k eps^s_k
    fit.rate_constant = float(np.exp(fit.intercept))
    fit.sup_constant = float(np.max(e / x))
    lam = abs(limit.lam)
    scale = lam if _letter(bc) == "S" else lam**2 + lam
    fit.eigen_constant = float(np.max(e / (x * scale))) if scale > 0.0 else None
    fit.drift = linear_fit(1.0 / x, e / x)[0] if x.size >= 2 else 0.0
    fit.status = "fitted"
    if fit.r2 >= R2_THRESHOLD:
        fit.passed = fit.slope >= SLOPE_THRESHOLD
    return fit


def _growth(table: SweepTable, bc: str, cells: List[CellFit]) -> GrowthFit:
    ks = table.ks()
    lambdas = [table.averaged(bc, k).lam for k in ks]
    ref_lambda, ref_constant = growth_references(_letter(bc), table.p, table.dimension)
    lam_exp = lam_passed = None
    positive = [(k, v) for k, v in zip(ks, lambdas) if v > 0.0]
    if len(positive) >= 2:
        kk, vv = np.array(positive, dtype=float).T
        lam_exp = linear_fit(np.log(kk), np.log(vv))[0]
        if _letter(bc) == "D":
            lam_passed = abs(lam_exp - ref_lambda) <= DIRICHLET_GROWTH_BAND * ref_lambda
        elif _letter(bc) == "S":
            lam_passed = lam_exp <= (1.0 + STEKLOV_GROWTH_SLACK) * ref_lambda
    const_exp = const_passed = None
    fitted = [(c.k, c.rate_constant) for c in cells if c.rate_constant]
    if len(fitted) >= 2:
        kk, cc = np.array(fitted, dtype=float).T
        const_exp = linear_fit(np.log(kk), np.log(cc))[0]
        const_passed = const_exp <= ref_constant + CONSTANT_GROWTH_SLACK
    return GrowthFit(
        bc=bc,
        ks=ks,
        lambdas=lambdas,
        lambda_exponent=lam_exp,
        lambda_reference=ref_lambda,
        lambda_passed=lam_passed,
        constant_exponent=const_exp,
        constant_reference=ref_constant,
        constant_passed=const_passed,
    )


def fit_rate(table: SweepTable, min_points: int = 4) -> RateReport:
    """
    Rates per (bc, k) and growth exponents across k.

    Args:
        table: Complete sweep table
        min_points: Fewest usable eps values for a fit

    Returns:
        The rate report
    """
    cells: List[CellFit] = []
    growth: List[GrowthFit] = []
    for bc in table.bcs():
        fits = [fit_cell(table, bc, k, min_points) for k in table.ks()]
        cells += fits
        growth.append(_growth(table, bc, fits))
    fitted = [c for c in cells if c.status == "fitted"]
    logger.info("fitted %d of %d cells", len(fitted), len(cells))
    return RateReport(
        family=table.family,
        dimension=table.dimension,
        p=table.p,
        config_hash=table.config_hash,
        cells=cells,
        growth=growth,
    )


@dataclass
class OrderingCheck:
    k: int
    eps: Optional[float]
    lower: str
    upper: str
    lower_value: float
    upper_value: float
    passed: bool


def audit_ordering(spectra: Sequence[Spectrum], slack: float = ORDERING_SLACK) -> List[OrderingCheck]:
    """
    Check the ordering chain between spectra computed at one scale.

    Every available pair of B <= N, N <= P, N <= R, P <= D, R <= D and
    B <= S is compared for each shared k; failures are data.

    Args:
        spectra: Spectra on a common discretization
        slack: Relative slack, scaled by max(1, lambda)

    Returns:
        One check per (pair, k)
    """
    by_letter: Dict[str, List[Spectrum]] = {}
    for s in spectra:
        by_letter.setdefault(s.bc.letter, []).append(s)
    checks: List[OrderingCheck] = []
    for low_tag, high_tag in ORDERING:
        for low in by_letter.get(low_tag, []):
            for high in by_letter.get(high_tag, []):
                for k in range(1, min(len(low), len(high)) + 1):
                    a, b = low[k], high[k]
                    eps = None if low.epsilon is AVERAGED else float(low.epsilon)
                    passed = a <= b + slack * max(1.0, abs(a), abs(b))
                    checks.append(OrderingCheck(k, eps, low.bc.label, high.bc.label, a, b, passed))
    failures = [c for c in checks if not c.passed]
    if failures:
        logger.warning("%d ordering checks failed", len(failures))
    return checks


def ordering_spectra(
    prob: ProblemInstance,
    bc_list: Sequence[BoundaryCondition],
    eps: Epsilon,
    k_max: int,
    settings: Optional[SolverSettings] = None,
    jobs: int = 1,
) -> List[Spectrum]:
    """Spectra of every bc at one scale on a common mesh (2D) or a common tolerance (1D)."""
    settings = settings or SolverSettings()
    mesh = None
    if prob.dim == 2:
        scales = [] if eps is AVERAGED else [float(eps)]
        mesh = common_mesh(prob, scales, settings.mesh_n)

    def run(bc: BoundaryCondition) -> Spectrum:
        try:
            return solve_cell(prob, bc, eps, k_max, settings, mesh, richardson=False)
        except SolverError as exc:
            raise SolverError(str(exc), cell=(bc.label, getattr(exc, "k", None), eps)) from exc

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        return list(pool.map(run, bc_list))
