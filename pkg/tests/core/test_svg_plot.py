"""Tests for the rate-report SVG plots."""
import pytest

from homogeig.core.errors import ConfigError
from homogeig.core.harness import SweepRow, SweepTable, fit_rate
from homogeig.core.svg_plot import RatePlotGenerator


@pytest.fixture
def tmp_output_dir(tmp_path):
    """Create a temporary output directory."""
    output_dir = tmp_path / "output"
    output_dir.mkdir()
    return output_dir


@pytest.fixture
def report():
    rows = []
    for k in (1, 2, 3):
        limit = 10.0 * k**2
        rows.append(SweepRow("D", k, None, limit, 1e-12, "synthetic", 1e-12))
        for eps in (0.125, 0.0625, 0.03125, 0.015625):
            rows.append(SweepRow("D", k, eps, limit + 2.0 * k * eps, 1e-12, "synthetic", 1e-12))
    return fit_rate(SweepTable(family="two<phase", dimension=1, p=2.0, rows=rows))


def test_generate_rate_plot(tmp_output_dir, report):
    """Test generating the error and growth panels as SVG."""
    generator = RatePlotGenerator(width=800, height=400)
    output_path = tmp_output_dir / "rates-D.svg"

    result_path = generator.generate(report, "D", output_path)

    assert result_path.exists()
    with open(result_path, "r") as f:
        content = f.read()
        assert '<?xml version="1.0"' in content
        assert '<svg width="800" height="400"' in content
        assert content.count("<circle ") == 3 * 4 + 3
        assert "k=2 s=1.00" in content
        assert "reference slope 2.00, fitted 2.00" in content
        assert "<desc>two&lt;phase D</desc>" in content
        assert content.endswith("</svg>\n")


def test_custom_styling(tmp_output_dir, report):
    """Test custom styling options."""
    generator = RatePlotGenerator(line_width=2.5, background_color="#EEEEEE")

    content = generator.render(report, "D")

    assert 'stroke-width="2.5"' in content
    assert 'fill="#EEEEEE"' in content
    assert 'stroke-dasharray="6 4"' in content


def test_render_is_deterministic(report):
    """Test identical output for identical reports."""
    generator = RatePlotGenerator()

    assert generator.render(report, "D") == generator.render(report, "D")


def test_unknown_boundary_condition(report):
    """Test that a bc absent from the report raises an error."""
    with pytest.raises(ConfigError):
        RatePlotGenerator().render(report, "N")
