"""Run-config loading, validation and hashing."""
import copy
import hashlib
import json
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from homogeig.core.coefficients import CoefficientField
from homogeig.core.errors import ConfigError
from homogeig.core.harness import SolverSettings
from homogeig.core.operators import OperatorSpec
from homogeig.core.problems import BoundaryCondition, Box, ProblemInstance

logger = logging.getLogger(__name__)

DEMOS = {"demo-1d": "demo_1d.json", "demo-2d": "demo_2d.json"}

TOP_LEVEL = ("experiment", "problem", "solver", "sweep", "audit", "oscillation", "output", "seed")
PROBLEM_KEYS = ("dimension", "domain", "operator", "rho", "V", "bcs")
OPERATOR_KEYS = ("p", "A", "alpha", "beta")
SWEEP_KEYS = ("ks", "eps")
AUDIT_KEYS = ("eps", "k_max")
OSCILLATION_KEYS = ("eps", "modes", "family_size")
OUTPUT_KEYS = ("dir",)
TRACE_MODES = ("zero-trace", "free-trace")

_UNIT = {"kind": "constant", "value": 1.0}


def _reject_unknown(section: Any, allowed, path: str) -> Dict:
    if section is None:
        return {}
    if not isinstance(section, dict):
        raise ConfigError(f"{path}: expected an object, got {type(section).__name__}")
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        prefix = f"{path}." if path else ""
        raise ConfigError(f"{prefix}{unknown[0]}: unknown key")
    return dict(section)


def _float_list(values: Any, path: str) -> List[float]:
    if not isinstance(values, list) or not values:
        raise ConfigError(f"{path}: expected a non-empty list of numbers")
    try:
        return [float(v) for v in values]
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: expected a non-empty list of numbers") from None


def normalize(data: Dict) -> Dict:
    """
    Validate a raw run-config and fill every default.

    Args:
        data: Parsed JSON document

    Returns:
        A new, fully populated config
    """
    data = _reject_unknown(copy.deepcopy(data), TOP_LEVEL, "")
    problem = _reject_unknown(data.get("problem"), PROBLEM_KEYS, "problem")
    dim = problem.get("dimension", 1)
    if dim not in (1, 2):
        raise ConfigError(f"problem.dimension: must be 1 or 2, got {dim}")
    domain = problem.get("domain", 1.0 if dim == 1 else [1.0, 1.0])
    domain = _float_list(domain if isinstance(domain, list) else [domain], "problem.domain")
    if len(domain) != dim or min(domain) <= 0.0:
        raise ConfigError(f"problem.domain: expected {dim} positive extents")
    operator = _reject_unknown(problem.get("operator"), OPERATOR_KEYS, "problem.operator")
    operator.setdefault("p", 2.0)
    operator.setdefault("A", dict(_UNIT))
    operator.setdefault("alpha", None)
    operator.setdefault("beta", None)
    bcs = problem.get("bcs", [{"tag": "dirichlet"}])
    if not isinstance(bcs, list) or not bcs:
        raise ConfigError("problem.bcs: expected a non-empty list")
    bcs = [BoundaryCondition.from_spec(bc, f"problem.bcs[{i}]").to_spec() for i, bc in enumerate(bcs)]
    problem = {
        "dimension": dim,
        "domain": domain,
        "operator": operator,
        "rho": problem.get("rho", dict(_UNIT)),
        "V": problem.get("V", dict(_UNIT)),
        "bcs": bcs,
    }

    solver = data.get("solver") or {}
    if not isinstance(solver, dict):
        raise ConfigError("solver: expected an object")
    solver = SolverSettings.from_dict(solver).to_dict()

    sweep = _reject_unknown(data.get("sweep"), SWEEP_KEYS, "sweep")
    ks = sweep.get("ks", [1, 2, 3, 4, 5])
    if not isinstance(ks, list) or not ks or any(not isinstance(k, int) or k < 1 for k in ks):
        raise ConfigError("sweep.ks: expected a non-empty list of positive integers")
    sweep = {"ks": ks, "eps": _float_list(sweep.get("eps", [1 / 8, 1 / 16, 1 / 32, 1 / 64]), "sweep.eps")}

    audit = _reject_unknown(data.get("audit"), AUDIT_KEYS, "audit")
    audit = {"eps": float(audit.get("eps", 0.125)), "k_max": int(audit.get("k_max", 6))}

    oscillation = _reject_unknown(data.get("oscillation"), OSCILLATION_KEYS, "oscillation")
    modes = oscillation.get("modes", list(TRACE_MODES))
    if not isinstance(modes, list) or any(m not in TRACE_MODES for m in modes):
        raise ConfigError(f"oscillation.modes: expected a subset of {list(TRACE_MODES)}")
    oscillation = {
        "eps": _float_list(oscillation.get("eps", [1 / 4, 1 / 8, 1 / 16, 1 / 32]), "oscillation.eps"),
        "modes": modes,
        "family_size": int(oscillation.get("family_size", 32)),
    }

    output = _reject_unknown(data.get("output"), OUTPUT_KEYS, "output")
    seed = data.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError(f"seed: expected an integer, got {seed!r}")
    experiment = data.get("experiment", "experiment")
    if not isinstance(experiment, str) or not experiment:
        raise ConfigError("experiment: expected a non-empty name")
    return {
        "experiment": experiment,
        "problem": problem,
        "solver": solver,
        "sweep": sweep,
        "audit": audit,
        "oscillation": oscillation,
        "output": {"dir": str(output.get("dir", "out"))},
        "seed": seed,
    }


def config_hash(config: Dict) -> str:
    """sha256 of the canonical JSON serialization."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _law(spec: Any, dim: int, path: str):
    if isinstance(spec, list):
        return [[CoefficientField.from_spec(a, dim, f"{path}[{i}][{j}]") for j, a in enumerate(row)]
                for i, row in enumerate(spec)]
    if isinstance(spec, (int, float)):
        return float(spec)
    return CoefficientField.from_spec(spec, dim, path)


@dataclass
class RunConfig:
    """A validated run-config and the objects it describes.

    Attributes:
        data: The normalized config document
        config_hash: Digest identifying the run
        problem: Problem family at the averaged scale under the first bc
        bcs: Boundary conditions to sweep
        settings: Solver settings
    """

    data: Dict
    config_hash: str
    problem: ProblemInstance
    bcs: List[BoundaryCondition]
    settings: SolverSettings

    @property
    def experiment(self) -> str:
        return self.data["experiment"]

    @property
    def seed(self) -> int:
        return self.data["seed"]

    @property
    def sweep(self) -> Dict:
        return self.data["sweep"]

    @property
    def audit(self) -> Dict:
        return self.data["audit"]

    @property
    def oscillation(self) -> Dict:
        return self.data["oscillation"]

    @property
    def output_dir(self) -> str:
        return self.data["output"]["dir"]


def build_config(data: Dict, seed: Optional[int] = None) -> RunConfig:
    """
    Validate a raw config and construct its problem family.

    Args:
        data: Parsed JSON document
        seed: Overrides the config seed when given

    Returns:
        The run-config
    """
    if seed is not None:
        data = dict(data, seed=seed)
    config = normalize(data)
    problem = config["problem"]
    dim = problem["dimension"]
    domain = Box(tuple(problem["domain"]))
    op_spec = problem["operator"]
    try:
        op = OperatorSpec(
            p=op_spec["p"],
            A=_law(op_spec["A"], dim, "problem.operator.A"),
            alpha=op_spec["alpha"],
            beta=op_spec["beta"],
            dim=dim,
            box=domain.lengths,
        )
    except ConfigError as exc:
        raise ConfigError(f"problem.operator.{exc}") from None
    rho = CoefficientField.from_spec(problem["rho"], dim, "problem.rho")
    V = CoefficientField.from_spec(problem["V"], dim, "problem.V")
    bcs = [BoundaryCondition.from_spec(bc, f"problem.bcs[{i}]") for i, bc in enumerate(problem["bcs"])]
    try:
        instance = ProblemInstance.build(domain, op, rho, V, bcs[0])
        for bc in bcs[1:]:
            instance.validate_bc(bc)
    except ConfigError as exc:
        raise ConfigError(f"problem.{exc}") from None
    return RunConfig(
        data=config,
        config_hash=config_hash(config),
        problem=instance,
        bcs=bcs,
        settings=SolverSettings.from_dict(config["solver"]),
    )


def load_config(source: Union[str, Path], seed: Optional[int] = None) -> RunConfig:
    """Load a run-config from a path or a packaged demo name."""
    try:
        if str(source) in DEMOS:
            text = (resources.files("homogeig") / "data" / DEMOS[str(source)]).read_text(encoding="utf-8")
        else:
            text = Path(source).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"config: cannot read {source} ({exc.strerror})") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON at line {exc.lineno} ({exc.msg})") from None
    config = build_config(data, seed)
    logger.info("loaded %s (hash %s)", source, config.config_hash[:12])
    return config
