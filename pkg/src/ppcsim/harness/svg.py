"""Minimal stacked-panel line plots written straight to SVG text."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

MAX_POINTS = 1500
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#7f7f7f")


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if not hi > lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        ticks.append(round(v, 10))
        v += step
    return ticks


def _thin(x: np.ndarray, *ys: np.ndarray):
    if x.size <= MAX_POINTS:
        return (x, *ys)
    idx = np.unique(np.linspace(0, x.size - 1, MAX_POINTS).astype(int))
    return (x[idx], *(y[idx] for y in ys))


@dataclass
class _Series:
    kind: str
    x: np.ndarray
    y: np.ndarray
    y2: Optional[np.ndarray]
    color: str
    label: Optional[str]
    width: float = 1.2
    opacity: float = 1.0


@dataclass
class Panel:
    title: str
    xlabel: str = ""
    ylabel: str = ""
    ylim: Optional[tuple[float, float]] = None
    logy: bool = False
    series: list = field(default_factory=list)

    def _add(self, kind, x, y, y2, color, label, **kw):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        y2 = None if y2 is None else np.asarray(y2, float)
        if color is None:
            color = PALETTE[len(self.series) % len(PALETTE)]
        self.series.append(_Series(kind, x, y, y2, color, label, **kw))
        return self

    def line(self, x, y, color=None, label=None, width=1.2):
        return self._add("line", x, y, None, color, label, width=width)

    def band(self, x, lo, hi, color=None, label=None, opacity=0.25):
        return self._add("band", x, lo, hi, color, label, opacity=opacity)

    def bars(self, x, y, color=None, label=None):
        return self._add("bars", x, y, None, color, label)

    def _yv(self, y):
        return np.log10(np.maximum(y, 1e-300)) if self.logy else y

    def _limits(self):
        xs = [s.x for s in self.series]
        ys = [self._yv(s.y) for s in self.series] + [
            self._yv(s.y2) for s in self.series if s.y2 is not None
        ]
        xall = np.concatenate(xs) if xs else np.zeros(1)
        yall = np.concatenate(ys) if ys else np.zeros(1)
        xall, yall = xall[np.isfinite(xall)], yall[np.isfinite(yall)]
        x0, x1 = (float(xall.min()), float(xall.max())) if xall.size else (0.0, 1.0)
        if self.ylim is not None:
            y0, y1 = (self._yv(np.array(self.ylim, float)))
        else:
            y0, y1 = (float(yall.min()), float(yall.max())) if yall.size else (0.0, 1.0)
            pad = 0.05 * (y1 - y0) if y1 > y0 else 0.5
            y0, y1 = y0 - pad, y1 + pad
        if x1 <= x0:
            x1 = x0 + 1
        return x0, x1, float(y0), float(y1)

    def render(
        self, left: float, top: float, width: float, height: float, clip: str = "clip0"
    ) -> list[str]:
        x0, x1, y0, y1 = self._limits()

        def px(x):
            return left + (x - x0) / (x1 - x0) * width

        def py(y):
            return top + height - (y - y0) / (y1 - y0) * height

        out = [
            f'<rect x="{left:.1f}" y="{top:.1f}" width="{width:.1f}" height="{height:.1f}" '
            'fill="white" stroke="#444" stroke-width="0.8"/>',
            f'<text x="{left:.1f}" y="{top - 6:.1f}" font-size="12" font-weight="bold">'
            f"{escape(self.title)}</text>",
        ]
        for t in nice_ticks(x0, x1):
            out.append(f'<line x1="{px(t):.1f}" y1="{top + height:.1f}" x2="{px(t):.1f}" '
                       f'y2="{top + height + 4:.1f}" stroke="#444"/>')
            out.append(f'<text x="{px(t):.1f}" y="{top + height + 15:.1f}" font-size="9" '
                       f'text-anchor="middle">{_fmt(t)}</text>')
        for t in nice_ticks(y0, y1, 4):
            label = _fmt(t) if not self.logy else f"1e{int(t)}" if t == int(t) else ""
            out.append(f'<line x1="{left - 4:.1f}" y1="{py(t):.1f}" x2="{left:.1f}" '
                       f'y2="{py(t):.1f}" stroke="#444"/>')
            out.append(f'<text x="{left - 6:.1f}" y="{py(t) + 3:.1f}" font-size="9" '
                       f'text-anchor="end">{label}</text>')
        if self.xlabel:
            out.append(f'<text x="{left + width / 2:.1f}" y="{top + height + 28:.1f}" '
                       f'font-size="10" text-anchor="middle">{escape(self.xlabel)}</text>')
        if self.ylabel:
            cx, cy = left - 38, top + height / 2
            out.append(f'<text x="{cx:.1f}" y="{cy:.1f}" font-size="10" text-anchor="middle" '
                       f'transform="rotate(-90 {cx:.1f} {cy:.1f})">{escape(self.ylabel)}</text>')

        out.append(f'<clipPath id="{clip}"><rect x="{left:.1f}" y="{top:.1f}" '
                   f'width="{width:.1f}" height="{height:.1f}"/></clipPath>')
        out.append(f'<g clip-path="url(#{clip})">')
        for s in self.series:
            out.extend(self._render_series(s, px, py))
        out.append("</g>")

        legend_y = top + 12
        for s in self.series:
            if not s.label:
                continue
            out.append(f'<line x1="{left + width - 110:.1f}" y1="{legend_y - 3:.1f}" '
                       f'x2="{left + width - 95:.1f}" y2="{legend_y - 3:.1f}" stroke="{s.color}" '
                       f'stroke-width="3" stroke-opacity="{max(s.opacity, 0.5)}"/>')
            out.append(f'<text x="{left + width - 90:.1f}" y="{legend_y:.1f}" font-size="9">'
                       f"{escape(s.label)}</text>")
            legend_y += 12
        return out

    def _render_series(self, s: _Series, px, py) -> list[str]:
        out = []
        if s.kind == "bars":
            base = py(max(0.0, self._limits()[2]))
            for x, y in zip(s.x, self._yv(s.y)):
                if np.isfinite(y):
                    out.append(f'<line x1="{px(x):.1f}" y1="{base:.1f}" x2="{px(x):.1f}" '
                               f'y2="{py(y):.1f}" stroke="{s.color}" stroke-width="2"/>')
            return out
        if s.kind == "band":
            x, lo, hi = _thin(s.x, self._yv(s.y), self._yv(s.y2))
            for seg in _segments(np.isfinite(lo) & np.isfinite(hi)):
                pts = [f"{px(a):.1f},{py(b):.1f}" for a, b in zip(x[seg], hi[seg])]
                pts += [f"{px(a):.1f},{py(b):.1f}" for a, b in zip(x[seg][::-1], lo[seg][::-1])]
                out.append(f'<polygon points="{" ".join(pts)}" fill="{s.color}" '
                           f'fill-opacity="{s.opacity}" stroke="none"/>')
            return out
        x, y = _thin(s.x, self._yv(s.y))
        for seg in _segments(np.isfinite(y)):
            pts = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(x[seg], y[seg]))
            out.append(f'<polyline points="{pts}" fill="none" stroke="{s.color}" '
                       f'stroke-width="{s.width}"/>')
        return out


def _segments(mask: np.ndarray) -> list[slice]:
    """Runs of True in ``mask`` as slices (NaN gaps break lines)."""
    edges = np.diff(np.r_[0, mask.astype(int), 0])
    starts, stops = np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)
    return [slice(a, b) for a, b in zip(starts, stops)]


class Figure:
    def __init__(self, title: str = "", width: int = 760, panel_height: int = 170):
        self.title = title
        self.width = width
        self.panel_height = panel_height
        self.panels: list[Panel] = []

    def panel(self, title: str, xlabel: str = "", ylabel: str = "", **kw) -> Panel:
        p = Panel(title, xlabel, ylabel, **kw)
        self.panels.append(p)
        return p

    def to_svg(self) -> str:
        margin_l, margin_r, head, gap = 70, 20, 40, 62
        inner_w = self.width - margin_l - margin_r
        height = head + len(self.panels) * (self.panel_height + gap)
        body = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{height}" '
            f'viewBox="0 0 {self.width} {height}" font-family="sans-serif">',
            f'<rect width="{self.width}" height="{height}" fill="white"/>',
        ]
        if self.title:
            body.append(f'<text x="{self.width / 2:.1f}" y="20" font-size="14" '
                        f'text-anchor="middle">{escape(self.title)}</text>')
        for i, p in enumerate(self.panels):
            top = head + i * (self.panel_height + gap) + 10
            body.extend(p.render(margin_l, top, inner_w, self.panel_height, f"clip{i}"))
        body.append("</svg>")
        return "\n".join(body) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_svg())
