"""
Minimal deterministic SVG plots: stacked panels sharing one time axis.

Coordinates are printed with fixed precision so identical inputs always
give byte-identical files.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple
from xml.sax.saxutils import escape, quoteattr

WIDTH = 900
PANEL_HEIGHT = 170
MARGIN_LEFT = 70
MARGIN_RIGHT = 20
MARGIN_TOP = 40
PANEL_GAP = 45

COLORS = {
    "diameter": "#1f77b4",
    "momentum": "#2ca02c",
    "strain": "#d62728",
    "beat_duration": "#444444",
}


@dataclass
class Panel:
    title: str
    xs: Sequence[float]
    ys: Sequence[float]
    kind: str = "line"  # "line" | "scatter"
    color: str = "#1f77b4"
    ylabel: str = ""
    hline: Optional[Tuple[str, float]] = None  # (css class, y value)
    vmarkers: List[Tuple[str, float]] = field(default_factory=list)  # (css class, x value)
    points: List[Tuple[str, float, float]] = field(default_factory=list)  # (css class, x, y)
    bands: List[Tuple[float, float]] = field(default_factory=list)  # shaded x-intervals


def _f(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


def _nice_ticks(lo: float, hi: float, n: int = 5) -> List[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 10))
        t += step
    return ticks


def _label(v: float) -> str:
    return f"{v:g}" if abs(v) >= 1e-4 or v == 0 else f"{v:.1e}"


def render(panels: Sequence[Panel], title: str, metadata: Dict[str, str], xlabel: str = "time (s)") -> str:
    xs_all = [x for p in panels for x in list(p.xs) + [m[1] for m in p.vmarkers]]
    xs_all += [x for p in panels for b in p.bands for x in b]
    x0, x1 = (min(xs_all), max(xs_all)) if xs_all else (0.0, 1.0)
    if x1 <= x0:
        x1 = x0 + 1.0
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    height = MARGIN_TOP + len(panels) * (PANEL_HEIGHT + PANEL_GAP)

    def sx(x):
        return MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" '
        f'viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="11">',
        "<metadata>",
    ]
    for k in sorted(metadata):
        out.append(escape(f"{k}={metadata[k]}"))
    out.append("</metadata>")
    out.append(f'<rect x="0" y="0" width="{WIDTH}" height="{height}" fill="white"/>')
    out.append(f'<text x="{WIDTH // 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>')

    for i, p in enumerate(panels):
        top = MARGIN_TOP + i * (PANEL_HEIGHT + PANEL_GAP)
        bottom = top + PANEL_HEIGHT
        ys = list(p.ys) + [pt[2] for pt in p.points] + ([p.hline[1]] if p.hline else [])
        y0, y1 = (min(ys), max(ys)) if ys else (0.0, 1.0)
        pad = (y1 - y0) * 0.08 if y1 > y0 else max(abs(y1) * 0.1, 0.5)
        y0, y1 = y0 - pad, y1 + pad

        def sy(y, y0=y0, y1=y1, bottom=bottom):
            return bottom - (y - y0) / (y1 - y0) * PANEL_HEIGHT

        out.append(f'<g class="panel" id="panel-{i}">')
        out.append(f'<text x="{MARGIN_LEFT}" y="{top - 6}" font-size="12">{escape(p.title)}</text>')
        for a, b in p.bands:
            out.append(
                f'<rect class="band" x="{_f(sx(a))}" y="{top}" width="{_f(max(sx(b) - sx(a), 1.0))}" '
                f'height="{PANEL_HEIGHT}" fill="#f2c14e" fill-opacity="0.35"/>'
            )
        out.append(
            f'<rect x="{MARGIN_LEFT}" y="{top}" width="{plot_w}" height="{PANEL_HEIGHT}" '
            f'fill="none" stroke="#999"/>'
        )
        for t in _nice_ticks(y0, y1, 4):
            y = sy(t)
            out.append(f'<line x1="{MARGIN_LEFT - 4}" y1="{_f(y)}" x2="{MARGIN_LEFT}" y2="{_f(y)}" stroke="#999"/>')
            out.append(f'<text x="{MARGIN_LEFT - 6}" y="{_f(y + 4)}" text-anchor="end">{_label(t)}</text>')
        for t in _nice_ticks(x0, x1, 8):
            x = sx(t)
            out.append(f'<line x1="{_f(x)}" y1="{bottom}" x2="{_f(x)}" y2="{bottom + 4}" stroke="#999"/>')
            out.append(f'<text x="{_f(x)}" y="{bottom + 15}" text-anchor="middle">{_label(t)}</text>')
        if p.ylabel:
            out.append(
                f'<text x="14" y="{_f((top + bottom) / 2)}" text-anchor="middle" '
                f'transform="rotate(-90 14 {_f((top + bottom) / 2)})">{escape(p.ylabel)}</text>'
            )
        if p.kind == "line" and len(p.xs):
            pts = " ".join(f"{_f(sx(x))},{_f(sy(y))}" for x, y in zip(p.xs, p.ys))
            out.append(f'<polyline fill="none" stroke="{p.color}" stroke-width="1.2" points="{pts}"/>')
        elif p.kind == "scatter":
            for x, y in zip(p.xs, p.ys):
                out.append(f'<circle cx="{_f(sx(x))}" cy="{_f(sy(y))}" r="3" fill="{p.color}"/>')
        if p.hline:
            cls, v = p.hline
            out.append(
                f'<line class={quoteattr(cls)} data-value="{v!r}" x1="{MARGIN_LEFT}" y1="{_f(sy(v))}" '
                f'x2="{MARGIN_LEFT + plot_w}" y2="{_f(sy(v))}" stroke="#ff7f0e" stroke-dasharray="6,3"/>'
            )
        for cls, x in p.vmarkers:
            out.append(
                f'<line class={quoteattr(cls)} data-time="{x!r}" x1="{_f(sx(x))}" y1="{top}" '
                f'x2="{_f(sx(x))}" y2="{bottom}" stroke="#9467bd" stroke-width="1.5"/>'
            )
        for cls, x, y in p.points:
            out.append(
                f'<circle class={quoteattr(cls)} data-time="{x!r}" cx="{_f(sx(x))}" cy="{_f(sy(y))}" '
                f'r="4.5" fill="none" stroke="#ff7f0e" stroke-width="2"/>'
            )
        out.append("</g>")
    last_bottom = MARGIN_TOP + len(panels) * (PANEL_HEIGHT + PANEL_GAP) - PANEL_GAP
    out.append(
        f'<text x="{MARGIN_LEFT + plot_w // 2}" y="{last_bottom + 32}" text-anchor="middle">{escape(xlabel)}</text>'
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"
