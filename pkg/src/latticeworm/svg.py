"""Minimal SVG emission: a canvas of primitives plus a 2-D axes helper.

Figures are pure views of their CSV data; the exact CSV text is embedded in
each file's <desc> element so a figure can always be checked against the
numbers it plots.
"""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape


def _fmt(value: float) -> str:
    text = f"{value:.2f}"
    return text.rstrip("0").rstrip(".") if "." in text else text


class Canvas:
    def __init__(self, width: int, height: int):
        self.width = width
        self.height = height
        self._elements: list[str] = []
        self._desc: str | None = None

    def describe(self, text: str) -> None:
        """Attach the canonical data (CSV text) behind this figure."""
        self._desc = text

    def line(self, x1, y1, x2, y2, stroke="#000", width=1.0, dash=None) -> None:
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        self._elements.append(
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
            f'stroke="{stroke}" stroke-width="{width}"{dash_attr}/>'
        )

    def polyline(self, points, stroke="#000", width=1.5) -> None:
        pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)
        self._elements.append(
            f'<polyline points="{pts}" fill="none" stroke="{stroke}" stroke-width="{width}"/>'
        )

    def polygon(self, points, fill="#000", opacity=1.0) -> None:
        pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)
        self._elements.append(
            f'<polygon points="{pts}" fill="{fill}" fill-opacity="{opacity}" stroke="none"/>'
        )

    def rect(self, x, y, w, h, fill="#000", stroke="none", opacity=1.0) -> None:
        self._elements.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" height="{_fmt(h)}" '
            f'fill="{fill}" fill-opacity="{opacity}" stroke="{stroke}"/>'
        )

    def circle(self, cx, cy, r, fill="#000") -> None:
        self._elements.append(
            f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{_fmt(r)}" fill="{fill}"/>'
        )

    def text(self, x, y, content, size=11, anchor="start", fill="#222", rotate=None) -> None:
        transform = f' transform="rotate({rotate} {_fmt(x)} {_fmt(y)})"' if rotate else ""
        self._elements.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-size="{size}" '
            f'font-family="sans-serif" text-anchor="{anchor}" fill="{fill}"{transform}>'
            f"{escape(str(content))}</text>"
        )

    def to_string(self) -> str:
        parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
            f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">'
        ]
        if self._desc is not None:
            parts.append(f"<desc>{escape(self._desc)}</desc>")
        parts.append(f'<rect width="{self.width}" height="{self.height}" fill="#fff"/>')
        parts.extend(self._elements)
        parts.append("</svg>")
        return "\n".join(parts) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_string())


def nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    """Round tick positions covering [lo, hi]."""
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return []
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(target, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def tick_label(value: float) -> str:
    if value == int(value) and abs(value) < 1e6:
        return str(int(value))
    return f"{value:.4g}"


class Axes:
    """Maps data coordinates onto a margin-framed plot area and draws the
    frame, ticks, and labels."""

    def __init__(self, canvas: Canvas, x_range, y_range,
                 margin=(55, 15, 20, 45), x_label="", y_label="", title=""):
        self.canvas = canvas
        left, right, top, bottom = margin
        self.x0, self.x1 = float(x_range[0]), float(x_range[1])
        self.y0, self.y1 = float(y_range[0]), float(y_range[1])
        if self.x1 <= self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 <= self.y0:
            self.y1 = self.y0 + 1.0
        self.px0, self.px1 = left, canvas.width - right
        self.py0, self.py1 = canvas.height - bottom, top
        self._draw_frame(x_label, y_label, title)

    def x(self, value: float) -> float:
        frac = (value - self.x0) / (self.x1 - self.x0)
        return self.px0 + frac * (self.px1 - self.px0)

    def y(self, value: float) -> float:
        frac = (value - self.y0) / (self.y1 - self.y0)
        return self.py0 + frac * (self.py1 - self.py0)

    def point(self, xv: float, yv: float) -> tuple[float, float]:
        return self.x(xv), self.y(yv)

    def _draw_frame(self, x_label: str, y_label: str, title: str) -> None:
        c = self.canvas
        c.line(self.px0, self.py0, self.px1, self.py0, stroke="#444")
        c.line(self.px0, self.py0, self.px0, self.py1, stroke="#444")
        for t in nice_ticks(self.x0, self.x1):
            px = self.x(t)
            c.line(px, self.py0, px, self.py0 + 4, stroke="#444")
            c.text(px, self.py0 + 16, tick_label(t), size=9, anchor="middle")
        for t in nice_ticks(self.y0, self.y1):
            py = self.y(t)
            c.line(self.px0 - 4, py, self.px0, py, stroke="#444")
            c.text(self.px0 - 7, py + 3, tick_label(t), size=9, anchor="end")
        if x_label:
            c.text((self.px0 + self.px1) / 2, c.height - 8, x_label, anchor="middle")
        if y_label:
            c.text(14, (self.py0 + self.py1) / 2, y_label, anchor="middle", rotate=-90)
        if title:
            c.text((self.px0 + self.px1) / 2, 13, title, anchor="middle", size=12)

    def series(self, xs, ys, color: str) -> None:
        pts = [self.point(x, y) for x, y in zip(xs, ys)]
        if len(pts) == 1:
            self.canvas.circle(pts[0][0], pts[0][1], 2.0, fill=color)
        elif pts:
            self.canvas.polyline(pts, stroke=color)

    def band(self, xs, lower, upper, color: str, opacity=0.25) -> None:
        top = [self.point(x, y) for x, y in zip(xs, upper)]
        bottom = [self.point(x, y) for x, y in reversed(list(zip(xs, lower)))]
        if top and bottom:
            self.canvas.polygon(top + bottom, fill=color, opacity=opacity)

    def scatter(self, xs, ys, color: str, r=1.6) -> None:
        for x, y in zip(xs, ys):
            self.canvas.circle(self.x(x), self.y(y), r, fill=color)
