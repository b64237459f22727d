"""Command-line interface for homogenized eigenvalue experiments."""
import argparse
import logging
import re
import sys
import time
from json import JSONDecodeError
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from homogeig.cli.config import RunConfig, load_config
from homogeig.core.coefficients import AVERAGED
from homogeig.core.errors import (
    ConfigError,
    DegenerateFitError,
    HypothesisRejected,
    SolverError,
    ZeroDenominatorError,
)
from homogeig.core.harness import (
    RateReport,
    SweepTable,
    audit_ordering,
    common_mesh,
    fit_rate,
    ordering_spectra,
    solve_cell,
    sweep,
)
from homogeig.core.operators import CallableOperator, check_hypotheses
from homogeig.core.oscillation import OscillationProbe, averaging_constants, fit_oscillation_rate, young_bound
from homogeig.core.problems import BoundaryCondition
from homogeig.core.svg_plot import RatePlotGenerator
from homogeig.utils.file import (
    read_json,
    resolve_output_dir,
    run_directory,
    write_csv,
    write_json,
)

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("experiment", "bc", "k", "epsilon", "lambda", "tol", "solver", "wall_ms")


def _shifted_law(x: np.ndarray, xi: np.ndarray) -> np.ndarray:
    return xi + 0.1


SAMPLE_LAWS = {"shifted": _shifted_law}


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """Parse command-line arguments."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config",
        type=str,
        default="demo-1d",
        help="Run-config JSON path or a packaged demo (demo-1d, demo-2d)",
    )
    common.add_argument("--out", type=str, default=None, help="Output directory (HOMOGEIG_OUT overrides)")
    common.add_argument("--jobs", type=int, default=1, help="Worker threads for independent cells")
    common.add_argument("--seed", type=int, default=None, help="Override the run-config seed")
    common.add_argument("--no-cache", action="store_true", help="Recompute even when results are cached")
    common.add_argument("--verbose", action="store_true", help="Log progress at INFO level")

    parser = argparse.ArgumentParser(
        prog="homogeig",
        description="Eigenvalues of oscillating-coefficient problems and their homogenized limits",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", parents=[common], help="Solve one boundary condition at one scale")
    solve.add_argument("--bc", type=str, default=None, help="Boundary condition tag or letter")
    solve.add_argument("--beta", type=float, default=0.0, help="Robin coefficient")
    solve.add_argument("--eps", type=str, default="averaged", help="Scale eps or 'averaged'")
    solve.add_argument("--k-max", type=int, default=5, help="Number of eigenvalues")

    sub.add_parser("sweep", parents=[common], help="Eigenvalues over the configured eps and k")
    sub.add_parser("rates", parents=[common], help="Fit homogenization rates and growth exponents")
    sub.add_parser("audit", parents=[common], help="Check the boundary-condition ordering chain")
    sub.add_parser("oscillation", parents=[common], help="Fit the oscillating-integral decay")

    plot = sub.add_parser("plot", parents=[common], help="Render SVG plots of a rate report")
    plot.add_argument("--report", type=str, default=None, help="Rate report JSON (default: the run's rates.json)")

    check = sub.add_parser("check-operator", parents=[common], help="Sample the structural hypotheses")
    check.add_argument("--samples", type=int, default=1000, help="Number of sampled points")
    check.add_argument(
        "--law",
        type=str,
        choices=["config", *SAMPLE_LAWS],
        default="config",
        help="Check the configured operator or a sample law",
    )
    return parser.parse_args(argv)


def _run_dir(config: RunConfig, args: argparse.Namespace) -> Path:
    root = resolve_output_dir(args.out, config.output_dir)
    return run_directory(root, config.experiment, config.config_hash)


def _cached(path: Path, args: argparse.Namespace) -> bool:
    if path.exists() and not args.no_cache:
        print(f"cached: {path.parent}")
        logger.info("cache hit for %s", path)
        return True
    return False


def _eps_cell(eps: Optional[float]) -> str:
    return "averaged" if eps is None else repr(float(eps))


def _sweep_table(config: RunConfig, args: argparse.Namespace) -> SweepTable:
    directory = _run_dir(config, args)
    path = directory / "sweep.json"
    if _cached(path, args):
        return SweepTable.from_dict(read_json(path))
    table = sweep(
        config.problem,
        config.bcs,
        config.sweep["ks"],
        config.sweep["eps"],
        config.settings,
        jobs=args.jobs,
        family=config.experiment,
        config_hash=config.config_hash,
    )
    write_json(directory / "config.json", config.data)
    write_json(path, table.to_dict())
    write_csv(
        directory / "sweep.csv",
        CSV_COLUMNS,
        (
            (config.experiment, r.bc, r.k, _eps_cell(r.eps), r.lam, r.tol, r.solver, r.wall_ms)
            for r in table.rows
        ),
    )
    return table


def cmd_solve(args: argparse.Namespace) -> int:
    config = load_config(args.config, args.seed)
    if args.bc is None:
        bc = config.bcs[0]
    else:
        bc = BoundaryCondition.from_spec({"tag": args.bc, "beta": args.beta}, "--bc")
    if args.eps == "averaged":
        eps = AVERAGED
    else:
        try:
            eps = float(args.eps)
        except ValueError:
            raise ConfigError(f"--eps: expected a number or 'averaged', got {args.eps!r}") from None
        if not eps > 0.0:
            raise ConfigError(f"--eps: must be positive, got {eps}")
    if args.k_max < 1:
        raise ConfigError(f"--k-max: need at least one eigenvalue, got {args.k_max}")
    config.problem.validate_bc(bc)

    mesh = None
    if config.problem.dim == 2:
        mesh = common_mesh(config.problem, [] if eps is AVERAGED else [eps], config.settings.mesh_n)
    start = time.perf_counter()
    spectrum = solve_cell(config.problem, bc, eps, args.k_max, config.settings, mesh)
    wall = (time.perf_counter() - start) * 1000.0 if config.settings.record_timing else 0.0

    directory = _run_dir(config, args)
    stem = re.sub(r"[^A-Za-z0-9.-]+", "_", f"spectrum-{bc.label}-{spectrum.epsilon_label}").strip("_")
    write_json(directory / f"{stem}.json", spectrum.to_dict())
    eps_value = None if eps is AVERAGED else eps
    csv_path = write_csv(
        directory / f"{stem}.csv",
        CSV_COLUMNS,
        (
            (config.experiment, bc.label, k, _eps_cell(eps_value), spectrum[k], spectrum.tol,
             spectrum.solver, round(wall, 3))
            for k in range(1, len(spectrum) + 1)
        ),
    )
    print(f"{'k':>4}  {'lambda':>22}  flags")
    for k in range(1, len(spectrum) + 1):
        flags = ",".join(spectrum.flags[k - 1])
        print(f"{k:>4}  {spectrum[k]:>22.14g}  {flags}")
    print(f"Spectrum saved to: {csv_path}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    config = load_config(args.config, args.seed)
    table = _sweep_table(config, args)
    unresolved = sum(r.status != "ok" for r in table.rows)
    print(f"{len(table.rows)} rows, {unresolved} unresolved")
    print(f"Sweep saved to: {_run_dir(config, args) / 'sweep.csv'}")
    return 0


def cmd_rates(args: argparse.Namespace) -> int:
    config = load_config(args.config, args.seed)
    table = _sweep_table(config, args)
    path = _run_dir(config, args) / "rates.json"
    report = fit_rate(table)
    write_json(path, report.to_dict())
    for cell in report.cells:
        if cell.slope is None:
            print(f"{cell.bc:>8} k={cell.k:<3} {cell.status}")
        else:
            print(f"{cell.bc:>8} k={cell.k:<3} slope={cell.slope:.3f} R2={cell.r2:.4f} C={cell.rate_constant:.4g}")
    for g in report.growth:
        fitted = "n/a" if g.lambda_exponent is None else f"{g.lambda_exponent:.3f}"
        print(f"{g.bc:>8} lambda_k growth {fitted} (reference {g.lambda_reference:.3f})")
    print(f"Rates saved to: {path}")
    return 0


def cmd_audit(args: argparse.Namespace) -> int:
    config = load_config(args.config, args.seed)
    path = _run_dir(config, args) / "audit.json"
    if _cached(path, args):
        checks = read_json(path)["checks"]
    else:
        eps = config.audit["eps"]
        spectra = ordering_spectra(
            config.problem, config.bcs, eps, config.audit["k_max"], config.settings, jobs=args.jobs
        )
        checks = [vars(c) for c in audit_ordering(spectra)]
        write_json(path, {"config_hash": config.config_hash, "eps": eps, "checks": checks})
    for c in checks:
        mark = "pass" if c["passed"] else "FAIL"
        print(f"k={c['k']:<3} {c['lower']} <= {c['upper']}: {mark}")
    failed = sum(not c["passed"] for c in checks)
    print(f"{len(checks) - failed} of {len(checks)} ordering checks passed")
    return 0


def _oscillation_mode(config: RunConfig, mode: str, jobs: int) -> Dict:
    prob = config.problem
    probe = OscillationProbe(
        g=prob.rho.base,
        domain=prob.domain,
        p=prob.p,
        zero_trace=mode == "zero-trace",
        seed=config.seed,
    )
    probe.family = probe.family[: config.oscillation["family_size"]]
    result: Dict = {"mode": mode}
    try:
        result.update(fit_oscillation_rate(probe, config.oscillation["eps"], jobs).to_dict())
    except DegenerateFitError as exc:
        logger.warning("%s: %s", mode, exc)
        result["status"] = "DEGENERATE_FIT"
        return result
    result["status"] = "fitted"
    young = [young_bound(probe, u) for u in probe.family]
    result["young_worst"] = max(lhs / rhs for lhs, rhs in young if rhs > 0.0)
    eps = config.oscillation["eps"][-1]
    constants = []
    for u in probe.family:
        try:
            constants.append(averaging_constants(probe, u, eps, prob.V.average))
        except ZeroDenominatorError:
            continue
    if constants:
        result["averaging_constants"] = [max(c[0] for c in constants), max(c[1] for c in constants)]
    return result


def cmd_oscillation(args: argparse.Namespace) -> int:
    config = load_config(args.config, args.seed)
    path = _run_dir(config, args) / "oscillation.json"
    if _cached(path, args):
        results = read_json(path)["modes"]
    else:
        results = [_oscillation_mode(config, mode, args.jobs) for mode in config.oscillation["modes"]]
        write_json(path, {"config_hash": config.config_hash, "modes": results})
    for r in results:
        if r["status"] == "fitted":
            print(f"{r['mode']:>10}: slope={r['slope']:.3f} R2={r['r2']:.4f}")
        else:
            print(f"{r['mode']:>10}: {r['status']}")
    print(f"Oscillation report saved to: {path}")
    return 0


def cmd_plot(args: argparse.Namespace) -> int:
    if args.report:
        path = Path(args.report)
    else:
        path = _run_dir(load_config(args.config, args.seed), args) / "rates.json"
    try:
        report = RateReport.from_dict(read_json(path))
    except (OSError, JSONDecodeError, AttributeError) as exc:
        raise ConfigError(f"report: cannot read {path} ({exc})") from None
    generator = RatePlotGenerator()
    bcs = list(dict.fromkeys([c.bc for c in report.cells] + [g.bc for g in report.growth]))
    for bc in bcs:
        name = re.sub(r"[^A-Za-z0-9.-]+", "_", f"rates-{bc}").strip("_") + ".svg"
        output = generator.generate(report, bc, path.parent / name)
        print(f"Plot saved to: {output}")
    return 0


def cmd_check_operator(args: argparse.Namespace) -> int:
    config = load_config(args.config, args.seed)
    op = config.problem.op
    if args.law != "config":
        op = CallableOperator(SAMPLE_LAWS[args.law], p=2.0, alpha=1.0, beta=1.0, dim=op.dim, box=op.box)
    report = check_hypotheses(op, args.samples, config.seed, raise_on_reject=False)
    write_json(_run_dir(config, args) / f"hypotheses-{args.law}.json", report.to_dict())
    for h, value in sorted(report.residuals.items()):
        print(f"{h}: {value:.3e}")
    print(f"H8 alpha estimate: {report.h8_alpha:.6g}")
    if not report.passed:
        raise HypothesisRejected(report.rejected, report.residuals)
    return 0


COMMANDS: Dict[str, Callable[[argparse.Namespace], int]] = {
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "rates": cmd_rates,
    "audit": cmd_audit,
    "oscillation": cmd_oscillation,
    "plot": cmd_plot,
    "check-operator": cmd_check_operator,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the homogeig command line."""
    args = parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SolverError, HypothesisRejected) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
