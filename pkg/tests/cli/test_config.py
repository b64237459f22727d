"""Tests for run-config loading and validation."""
import json
from dataclasses import fields
from pathlib import Path

import pytest

from homogeig.cli.config import (
    AUDIT_KEYS,
    OPERATOR_KEYS,
    OSCILLATION_KEYS,
    OUTPUT_KEYS,
    PROBLEM_KEYS,
    SWEEP_KEYS,
    TOP_LEVEL,
    TRACE_MODES,
    build_config,
    config_hash,
    load_config,
    normalize,
)
from homogeig.core.errors import ConfigError
from homogeig.core.harness import SolverSettings


def test_defaults_are_filled():
    """Test the normalized form of an empty config."""
    config = normalize({})

    assert config["problem"]["dimension"] == 1
    assert config["problem"]["bcs"] == [{"tag": "dirichlet"}]
    assert config["problem"]["operator"]["p"] == 2.0
    assert config["sweep"]["ks"] == [1, 2, 3, 4, 5]
    assert config["oscillation"]["modes"] == ["zero-trace", "free-trace"]
    assert config["solver"]["tol"] == 1e-9
    assert config["output"]["dir"] == "out"


def test_hash_is_stable_and_sensitive():
    """Test that the digest depends on content, not on key order."""
    a = normalize({"experiment": "x", "seed": 1})
    b = normalize({"seed": 1, "experiment": "x"})

    assert config_hash(a) == config_hash(b)
    assert len(config_hash(a)) == 64
    assert config_hash(a) != config_hash(normalize({"experiment": "x", "seed": 2}))


@pytest.mark.parametrize(
    "data, path",
    [
        ({"colour": 1}, "colour"),
        ({"problem": {"shape": "disc"}}, "problem.shape"),
        ({"problem": {"operator": {"q": 2}}}, "problem.operator.q"),
        ({"solver": {"tolerance": 1e-3}}, "solver.tolerance"),
        ({"problem": {"bcs": [{"tag": "robin", "gamma": 1}]}}, r"problem.bcs\[0\].gamma"),
        ({"problem": {"rho": {"kind": "piecewise", "values": [1, 2], "phase": 0}}}, "problem.rho.phase"),
    ],
)
def test_unknown_keys_name_their_path(data, path):
    """Test that unknown keys are rejected with their dotted path."""
    with pytest.raises(ConfigError, match=path):
        build_config(data)


@pytest.mark.parametrize(
    "data",
    [
        {"problem": {"dimension": 3}},
        {"problem": {"dimension": 2, "domain": [1.0]}},
        {"problem": {"rho": {"kind": "piecewise", "values": [0.0, 1.0]}}},
        {"problem": {"operator": {"p": 1.0}}},
        {"sweep": {"ks": [0, 1]}},
        {"sweep": {"eps": []}},
        {"oscillation": {"modes": ["sideways"]}},
        {"seed": "zero"},
        {"problem": {"bcs": [{"tag": "steklov"}]}},
    ],
)
def test_invalid_values_are_config_errors(data):
    """Test that every invalid value is reported as ConfigError."""
    with pytest.raises(ConfigError):
        build_config(data)


def test_build_config_constructs_problem():
    """Test the problem family built from a config."""
    config = build_config(
        {
            "experiment": "two-phase",
            "problem": {
                "rho": {"kind": "piecewise", "values": [1.0, 3.0]},
                "bcs": [{"tag": "D"}, {"tag": "robin", "beta": 2.0}],
            },
        },
        seed=7,
    )

    assert config.experiment == "two-phase"
    assert config.seed == 7
    assert [bc.label for bc in config.bcs] == ["D", "R(2)"]
    assert config.problem.rho.average == pytest.approx(2.0)
    assert config.data["problem"]["bcs"][0] == {"tag": "dirichlet"}


@pytest.mark.parametrize("name", ["demo-1d", "demo-2d"])
def test_packaged_demos_load(name):
    """Test the bundled run-configs."""
    config = load_config(name)

    assert config.experiment == name
    assert len(config.sweep["eps"]) >= 4


def test_load_config_from_file(tmp_path):
    """Test reading a config file and reporting unreadable ones."""
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"experiment": "file"}))

    assert load_config(path).experiment == "file"
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.json")
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(path)


SCHEMA_PATH = Path(__file__).resolve().parents[2] / "docs" / "config_schema.json"


def schema_defaults(node, prefix=()):
    for key, sub in node.get("properties", {}).items():
        if "default" in sub:
            yield prefix + (key,), sub["default"]
        yield from schema_defaults(sub, prefix + (key,))


def test_published_schema_matches_validator():
    """Test that docs/config_schema.json lists the keys and defaults the loader accepts."""
    schema = json.loads(SCHEMA_PATH.read_text())
    props = schema["properties"]
    sections = {
        "problem": PROBLEM_KEYS,
        "sweep": SWEEP_KEYS,
        "audit": AUDIT_KEYS,
        "oscillation": OSCILLATION_KEYS,
        "output": OUTPUT_KEYS,
        "solver": tuple(f.name for f in fields(SolverSettings)),
    }

    assert set(props) == set(TOP_LEVEL)
    for name, keys in sections.items():
        assert set(props[name]["properties"]) == set(keys), name
    assert set(props["problem"]["properties"]["operator"]["properties"]) == set(OPERATOR_KEYS)
    assert props["oscillation"]["properties"]["modes"]["items"]["enum"] == list(TRACE_MODES)

    defaults = normalize({})
    for path, value in schema_defaults(schema):
        node = defaults
        for key in path:
            node = node[key]
        assert node == value, ".".join(path)
