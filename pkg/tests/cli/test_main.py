"""Tests for the homogeig command line."""
import json

import pytest

from homogeig.cli.main import main, parse_args
from homogeig.utils.file import OUTPUT_ENV


@pytest.fixture
def tmp_output_dir(tmp_path, monkeypatch):
    """Create a temporary output directory."""
    monkeypatch.delenv(OUTPUT_ENV, raising=False)
    output_dir = tmp_path / "output"
    output_dir.mkdir()
    return output_dir


@pytest.fixture
def config_path(tmp_path):
    """A small 1D run-config."""
    path = tmp_path / "small.json"
    path.write_text(
        json.dumps(
            {
                "experiment": "small",
                "problem": {
                    "rho": {"kind": "piecewise", "values": [1.0, 3.0]},
                    "V": {"kind": "piecewise", "values": [1.0, 2.0]},
                    "bcs": [{"tag": "D"}, {"tag": "N"}, {"tag": "R", "beta": 1.0}, {"tag": "P"}],
                },
                "solver": {"tol": 1e-10},
                "sweep": {"ks": [1, 2], "eps": [0.125, 0.0625, 0.03125, 0.015625]},
                "audit": {"eps": 0.125, "k_max": 3},
                "oscillation": {"eps": [0.25, 0.125, 0.0625, 0.03125], "family_size": 8},
            }
        )
    )
    return path


def run_dir(output_dir):
    (directory,) = [p for p in output_dir.iterdir() if p.is_dir()]
    return directory


def test_parse_args_defaults():
    """Test the shared flags of every subcommand."""
    args = parse_args(["solve"])

    assert args.config == "demo-1d"
    assert args.eps == "averaged"
    assert args.k_max == 5
    assert args.jobs == 1
    assert not args.no_cache


def test_solve_writes_spectrum(tmp_output_dir, config_path, capsys):
    """Test one solve at a scale and its artifacts."""
    code = main(["solve", "--config", str(config_path), "--out", str(tmp_output_dir), "--eps", "0.125",
                 "--k-max", "3"])

    assert code == 0
    directory = run_dir(tmp_output_dir)
    assert directory.name.startswith("small-")
    spectrum = json.loads((directory / "spectrum-D-0.125.json").read_text())
    assert len(spectrum["eigenvalues"]) == 3
    lines = (directory / "spectrum-D-0.125.csv").read_text().splitlines()
    assert lines[0] == "experiment,bc,k,epsilon,lambda,tol,solver,wall_ms"
    assert lines[1].startswith("small,D,1,0.125,")
    assert "Spectrum saved to:" in capsys.readouterr().out


def test_sweep_is_cached(tmp_output_dir, config_path, capsys):
    """Test that a second sweep reuses the stored table."""
    argv = ["sweep", "--config", str(config_path), "--out", str(tmp_output_dir)]

    assert main(argv) == 0
    first = (run_dir(tmp_output_dir) / "sweep.csv").read_bytes()
    capsys.readouterr()
    assert main(argv) == 0
    assert "cached:" in capsys.readouterr().out
    assert main(argv + ["--no-cache"]) == 0
    assert (run_dir(tmp_output_dir) / "sweep.csv").read_bytes() == first


def test_rates_then_plot(tmp_output_dir, config_path):
    """Test the rate report and one SVG per boundary condition."""
    argv = ["--config", str(config_path), "--out", str(tmp_output_dir)]

    assert main(["rates"] + argv) == 0
    directory = run_dir(tmp_output_dir)
    report = json.loads((directory / "rates.json").read_text())
    assert {c["bc"] for c in report["cells"]} == {"D", "N", "R(1)", "P"}
    assert main(["plot"] + argv) == 0
    assert (directory / "rates-D.svg").exists()
    assert (directory / "rates-R_1.svg").exists()


def test_reruns_are_byte_identical(tmp_path, config_path, monkeypatch):
    """Test that two fresh runs of rates and plot write the same files."""
    monkeypatch.delenv(OUTPUT_ENV, raising=False)
    outputs = []
    for name in ("first", "second"):
        out = tmp_path / name
        argv = ["--config", str(config_path), "--out", str(out)]
        assert main(["rates"] + argv) == 0
        assert main(["plot"] + argv) == 0
        outputs.append({p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()})

    first, second = outputs
    assert any(path.suffix == ".svg" for path in first)
    assert any(path.name == "rates.json" for path in first)
    assert first.keys() == second.keys()
    for path in first:
        assert first[path] == second[path], path


def test_audit_reports_ordering(tmp_output_dir, config_path, capsys):
    """Test the ordering audit output."""
    assert main(["audit", "--config", str(config_path), "--out", str(tmp_output_dir)]) == 0

    audit = json.loads((run_dir(tmp_output_dir) / "audit.json").read_text())
    assert len(audit["checks"]) == 4 * 3
    assert all(c["passed"] for c in audit["checks"])
    assert "12 of 12 ordering checks passed" in capsys.readouterr().out


def test_oscillation_report(tmp_output_dir, config_path):
    """Test both trace modes in the oscillation report."""
    assert main(["oscillation", "--config", str(config_path), "--out", str(tmp_output_dir)]) == 0

    report = json.loads((run_dir(tmp_output_dir) / "oscillation.json").read_text())
    assert [m["mode"] for m in report["modes"]] == ["zero-trace", "free-trace"]
    for mode in report["modes"]:
        assert mode["status"] == "fitted"
        assert mode["young_worst"] <= 1.0


def test_check_operator(tmp_output_dir, config_path, capsys):
    """Test the accepted configured law and the rejected sample law."""
    argv = ["check-operator", "--config", str(config_path), "--out", str(tmp_output_dir), "--samples", "200"]

    assert main(argv) == 0
    assert main(argv + ["--law", "shifted"]) == 2
    assert "REJECTED" in capsys.readouterr().err
    assert (run_dir(tmp_output_dir) / "hypotheses-shifted.json").exists()


def test_environment_overrides_out(tmp_output_dir, config_path, monkeypatch, tmp_path):
    """Test that HOMOGEIG_OUT wins over --out."""
    target = tmp_path / "env"
    monkeypatch.setenv(OUTPUT_ENV, str(target))

    assert main(["solve", "--config", str(config_path), "--out", str(tmp_output_dir), "--k-max", "1"]) == 0
    assert list(target.iterdir())
    assert not list(tmp_output_dir.iterdir())


@pytest.mark.parametrize(
    "argv",
    [
        ["solve", "--eps", "tiny"],
        ["solve", "--eps", "-0.5"],
        ["solve", "--bc", "sideways"],
        ["solve", "--config", "no-such-config.json"],
    ],
)
def test_invalid_input_exits_one(tmp_output_dir, argv, capsys):
    """Test that configuration errors exit with status 1."""
    assert main(argv + ["--out", str(tmp_output_dir)]) == 1
    assert capsys.readouterr().err.startswith("error: ")


def test_solver_failure_exits_two(tmp_output_dir, tmp_path, capsys):
    """Test that a solver failure exits with status 2."""
    path = tmp_path / "capped.json"
    path.write_text(json.dumps({"solver": {"lambda_cap": 5.0}}))

    assert main(["solve", "--config", str(path), "--out", str(tmp_output_dir), "--k-max", "3"]) == 2
    assert "NO_CONVERGENCE" in capsys.readouterr().err
