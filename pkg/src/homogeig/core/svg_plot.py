"""SVG plots of rate reports."""
import math
from html import escape
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from homogeig.core.errors import ConfigError
from homogeig.core.harness import RateReport
from homogeig.utils.file import write_text

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class _Panel:
    """A log-log plotting area inside the SVG canvas."""

    def __init__(self, left: float, top: float, width: float, height: float, xs: Sequence[float], ys: Sequence[float]):
        self.left, self.top, self.width, self.height = left, top, width, height
        lx = [math.log10(v) for v in xs if v > 0.0] or [0.0, 1.0]
        ly = [math.log10(v) for v in ys if v > 0.0] or [0.0, 1.0]
        self.x0, self.x1 = math.floor(min(lx)), math.ceil(max(lx))
        self.y0, self.y1 = math.floor(min(ly)), math.ceil(max(ly))
        if self.x1 == self.x0:
            self.x1 += 1
        if self.y1 == self.y0:
            self.y1 += 1

    def point(self, x: float, y: float) -> Tuple[float, float]:
        px = self.left + (math.log10(x) - self.x0) / (self.x1 - self.x0) * self.width
        py = self.top + self.height - (math.log10(y) - self.y0) / (self.y1 - self.y0) * self.height
        return px, py

    def frame(self, title: str, x_label: str, y_label: str) -> str:
        l, t, w, h = self.left, self.top, self.width, self.height
        svg = f'<rect x="{_fmt(l)}" y="{_fmt(t)}" width="{_fmt(w)}" height="{_fmt(h)}" fill="none" stroke="#000000" />\n'
        svg += f'<text x="{_fmt(l + w / 2)}" y="{_fmt(t - 10)}" text-anchor="middle">{title}</text>\n'
        svg += f'<text x="{_fmt(l + w / 2)}" y="{_fmt(t + h + 36)}" text-anchor="middle">{x_label}</text>\n'
        svg += (
            f'<text x="{_fmt(l - 40)}" y="{_fmt(t + h / 2)}" text-anchor="middle" '
            f'transform="rotate(-90 {_fmt(l - 40)} {_fmt(t + h / 2)})">{y_label}</text>\n'
        )
        for e in range(self.x0, self.x1 + 1):
            px = l + (e - self.x0) / (self.x1 - self.x0) * w
            svg += f'<text x="{_fmt(px)}" y="{_fmt(t + h + 16)}" text-anchor="middle" font-size="10">1e{e}</text>\n'
        for e in range(self.y0, self.y1 + 1):
            py = t + h - (e - self.y0) / (self.y1 - self.y0) * h
            svg += f'<text x="{_fmt(l - 4)}" y="{_fmt(py)}" text-anchor="end" font-size="10">1e{e}</text>\n'
        return svg


class RatePlotGenerator:
    """Generator for error-vs-eps and lambda_k-vs-k plots of one boundary condition."""

    def __init__(
        self,
        width: int = 900,
        height: int = 420,
        line_width: float = 1.5,
        background_color: str = "#FFFFFF",
    ):
        """
        Initialize the plot generator.

        Args:
            width: Width of the image in pixels
            height: Height of the image in pixels
            line_width: Width of fitted and reference lines
            background_color: Background color of the SVG
        """
        self.width = width
        self.height = height
        self.line_width = line_width
        self.background_color = background_color

    def generate(self, report: RateReport, bc: str, output_path: Path) -> Path:
        """
        Render the plots of one boundary condition and save them.

        Args:
            report: Rate report
            bc: Boundary-condition label present in the report
            output_path: Path to save the SVG

        Returns:
            Path to the generated SVG file
        """
        return write_text(output_path, self.render(report, bc))

    def render(self, report: RateReport, bc: str) -> str:
        cells = [c for c in report.cells if c.bc == bc]
        growth = next((g for g in report.growth if g.bc == bc), None)
        if not cells and growth is None:
            raise ConfigError(f"report: no data for bc={bc}")
        svg = self._svg_header(f"{report.family} {bc}")
        svg += self._error_panel(cells)
        if growth is not None:
            svg += self._growth_panel(growth.ks, growth.lambdas, growth.lambda_reference, growth.lambda_exponent)
        svg += self._svg_footer()
        return svg

    def _svg_header(self, title: str) -> str:
        """Generate SVG header."""
        return (
            f'<?xml version="1.0" encoding="UTF-8" standalone="no"?>\n'
            f'<svg width="{self.width}" height="{self.height}" '
            f'xmlns="http://www.w3.org/2000/svg" font-family="sans-serif" font-size="12">\n'
            f"<desc>{escape(title)}</desc>\n"
            f'<rect width="100%" height="100%" fill="{self.background_color}" />\n'
        )

    def _svg_footer(self) -> str:
        """Generate SVG footer."""
        return "</svg>\n"

    def _panel(self, index: int, xs: List[float], ys: List[float]) -> _Panel:
        w = (self.width - 180) / 2
        return _Panel(70 + index * (w + 90), 40, w, self.height - 110, xs, ys)

    def _error_panel(self, cells) -> str:
        xs = [e for c in cells for e in c.eps]
        ys = [e for c in cells for e in c.errors if e > 0.0]
        panel = self._panel(0, xs, ys)
        svg = panel.frame("|lambda_k^eps - lambda_k|", "eps", "error")
        for i, cell in enumerate(cells):
            color = PALETTE[i % len(PALETTE)]
            points = [(x, y) for x, y in zip(cell.eps, cell.errors) if x > 0.0 and y > 0.0]
            for x, y in points:
                px, py = panel.point(x, y)
                svg += f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="3" fill="{color}" />\n'
            if cell.slope is not None and points:
                lo, hi = min(x for x, _ in points), max(x for x, _ in points)
                ends = [panel.point(x, math.exp(cell.intercept) * x**cell.slope) for x in (lo, hi)]
                svg += self._line(ends, color)
            label = f"k={cell.k}" + (f" s={cell.slope:.2f}" if cell.slope is not None else "")
            svg += (
                f'<text x="{_fmt(panel.left + 6)}" y="{_fmt(panel.top + 14 + 14 * i)}" '
                f'fill="{color}" font-size="10">{label}</text>\n'
            )
        return svg

    def _growth_panel(self, ks: List[int], lambdas: List[float], reference: float, fitted: Optional[float]) -> str:
        points = [(float(k), v) for k, v in zip(ks, lambdas) if v > 0.0]
        panel = self._panel(1, [k for k, _ in points], [v for _, v in points])
        svg = panel.frame("lambda_k growth", "k", "lambda_k")
        for k, v in points:
            px, py = panel.point(k, v)
            svg += f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="3" fill="{PALETTE[0]}" />\n'
        if len(points) >= 2:
            (k0, v0), k1 = points[0], points[-1][0]
            ends = [panel.point(k0, v0), panel.point(k1, v0 * (k1 / k0) ** reference)]
            svg += self._line(ends, "#000000", dashed=True)
        label = f"reference slope {reference:.2f}"
        if fitted is not None:
            label += f", fitted {fitted:.2f}"
        svg += (
            f'<text x="{_fmt(panel.left + 6)}" y="{_fmt(panel.top + 14)}" font-size="10">{label}</text>\n'
        )
        return svg

    def _line(self, ends: List[Tuple[float, float]], color: str, dashed: bool = False) -> str:
        (x1, y1), (x2, y2) = ends
        dash = ' stroke-dasharray="6 4"' if dashed else ""
        return (
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
            f'stroke="{color}" stroke-width="{self.line_width}"{dash} />\n'
        )
