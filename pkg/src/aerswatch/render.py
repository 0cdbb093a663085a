"""Minimal static SVG renderings of the trend and boxplot datasets.

Plot-ready CSV is the primary output; these exist so a quarter's box plot
or the population ratio trend can be eyeballed without external tooling.
"""
from __future__ import annotations

from xml.sax.saxutils import escape

from .surveil import REFERENCE_RATIO, BoxplotSummary, QuarterTrend

_W, _H = 900, 360
_MARGIN = 50


def _scale(value: float, lo: float, hi: float, out_lo: float, out_hi: float) -> float:
    if hi <= lo:
        return (out_lo + out_hi) / 2
    return out_lo + (value - lo) / (hi - lo) * (out_hi - out_lo)


def _svg(body: list[str], width: int = _W, height: int = _H) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">'
    )
    return "\n".join([head, *body, "</svg>"]) + "\n"


def trend_svg(trends: list[QuarterTrend]) -> str:
    """Subjects-to-events ratio by quarter with the 1:2 reference line."""
    ratios = [(i, t.ratio) for i, t in enumerate(trends) if t.ratio is not None]
    top = max([r for _, r in ratios] + [REFERENCE_RATIO]) * 1.1 or 1.0
    x0, x1 = _MARGIN, _W - _MARGIN
    y0, y1 = _H - _MARGIN, _MARGIN
    n = max(len(trends) - 1, 1)

    def pt(i: int, r: float) -> str:
        x = _scale(i, 0, n, x0, x1)
        y = _scale(r, 0.0, top, y0, y1)
        return f"{x:.1f},{y:.1f}"

    ref_y = _scale(REFERENCE_RATIO, 0.0, top, y0, y1)
    body = [
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<line x1="{x0}" y1="{ref_y:.1f}" x2="{x1}" y2="{ref_y:.1f}" '
        f'stroke="gray" stroke-dasharray="6,4"/>',
        f'<text x="{x1 - 4}" y="{ref_y - 6:.1f}" font-size="11" fill="gray" '
        f'text-anchor="end">ratio {REFERENCE_RATIO}</text>',
    ]
    if ratios:
        points = " ".join(pt(i, r) for i, r in ratios)
        body.append(f'<polyline points="{points}" fill="none" stroke="steelblue" stroke-width="2"/>')
    for i, t in enumerate(trends):
        if len(trends) <= 20 or i % max(1, len(trends) // 10) == 0:
            x = _scale(i, 0, n, x0, x1)
            body.append(
                f'<text x="{x:.1f}" y="{_H - _MARGIN + 18}" font-size="10" '
                f'text-anchor="middle">{escape(str(t.quarter))}</text>'
            )
    body.append(
        f'<text x="{_MARGIN}" y="{_MARGIN - 14}" font-size="12">'
        f"subjects per reference event by quarter</text>"
    )
    return _svg(body)


def boxplot_svg(box: BoxplotSummary) -> str:
    """Single-quarter box plot of per-drug counts, outliers as circles."""
    width, height = 360, 420
    lo = 0.0
    values = [box.max] + [c for _, c in box.outliers]
    hi = max(values) * 1.1 or 1.0
    y0, y1 = height - _MARGIN, _MARGIN
    cx, half = width / 2, 50

    def y(v: float) -> float:
        return _scale(v, lo, hi, y0, y1)

    body = [
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{cx}" y1="{y(box.min):.1f}" x2="{cx}" y2="{y(box.p25):.1f}" stroke="black"/>',
        f'<line x1="{cx}" y1="{y(box.p75):.1f}" x2="{cx}" y2="{y(box.max):.1f}" stroke="black"/>',
        f'<line x1="{cx - 20}" y1="{y(box.min):.1f}" x2="{cx + 20}" y2="{y(box.min):.1f}" stroke="black"/>',
        f'<line x1="{cx - 20}" y1="{y(box.max):.1f}" x2="{cx + 20}" y2="{y(box.max):.1f}" stroke="black"/>',
        f'<rect x="{cx - half}" y="{y(box.p75):.1f}" width="{2 * half}" '
        f'height="{max(y(box.p25) - y(box.p75), 1):.1f}" fill="lightsteelblue" stroke="black"/>',
        f'<line x1="{cx - half}" y1="{y(box.median):.1f}" x2="{cx + half}" y2="{y(box.median):.1f}" '
        f'stroke="black" stroke-width="2"/>',
        f'<text x="{cx}" y="{height - _MARGIN + 22}" font-size="12" '
        f'text-anchor="middle">{escape(str(box.quarter))}</text>',
    ]
    for name, count in box.outliers:
        body.append(
            f'<circle cx="{cx:.1f}" cy="{y(count):.1f}" r="3" fill="none" stroke="firebrick">'
            f"<title>{escape(name)}: {count}</title></circle>"
        )
    body.append(
        f'<text x="{_MARGIN - 30}" y="{_MARGIN - 14}" font-size="12">'
        f"per-drug counts</text>"
    )
    return _svg(body, width, height)
