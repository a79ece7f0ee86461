"""Minimal static SVG writer; enough for scatter wheels, label maps and line charts."""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

SEPARABLE_COLOR = "#3b6fb6"
ENTANGLED_COLOR = "#d1495b"
LABEL_COLORS = (SEPARABLE_COLOR, ENTANGLED_COLOR)


def _n(x: float) -> str:
    return f"{x:.2f}".rstrip("0").rstrip(".")


def _attrs(kw: dict) -> str:
    return "".join(f' {k.rstrip("_").replace("_", "-")}="{escape(str(v))}"' for k, v in kw.items())


class Canvas:
    def __init__(self, width: float, height: float):
        self.width = width
        self.height = height
        self.items: list[str] = []

    def rect(self, x, y, w, h, **kw):
        self.items.append(f'<rect x="{_n(x)}" y="{_n(y)}" width="{_n(w)}" height="{_n(h)}"{_attrs(kw)}/>')

    def circle(self, cx, cy, r, **kw):
        self.items.append(f'<circle cx="{_n(cx)}" cy="{_n(cy)}" r="{_n(r)}"{_attrs(kw)}/>')

    def line(self, x1, y1, x2, y2, **kw):
        self.items.append(
            f'<line x1="{_n(x1)}" y1="{_n(y1)}" x2="{_n(x2)}" y2="{_n(y2)}"{_attrs(kw)}/>'
        )

    def polyline(self, points, **kw):
        pts = " ".join(f"{_n(x)},{_n(y)}" for x, y in points)
        self.items.append(f'<polyline points="{pts}" fill="none"{_attrs(kw)}/>')

    def text(self, x, y, s, size=11, anchor="start", **kw):
        self.items.append(
            f'<text x="{_n(x)}" y="{_n(y)}" font-size="{size}" text-anchor="{anchor}"'
            f' font-family="sans-serif"{_attrs(kw)}>{escape(str(s))}</text>'
        )

    def render(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_n(self.width)}" '
                f'height="{_n(self.height)}" viewBox="0 0 {_n(self.width)} {_n(self.height)}">')
        body = [f'<rect width="100%" height="100%" fill="white"/>', *self.items]
        return "\n".join([head, *body, "</svg>"]) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.render())


def legend(c: Canvas, x: float, y: float, entries) -> None:
    for k, (name, color) in enumerate(entries):
        c.rect(x, y + 16 * k - 9, 10, 10, fill=color)
        c.text(x + 15, y + 16 * k, name)


def label_wheel(thetas, ps, labels, mismatched, title: str) -> Canvas:
    """Polar scatter: angle 2*theta, radius p, colour = label, ring = mismatch."""
    size, r0 = 420, 170
    c = Canvas(size + 150, size + 30)
    cx, cy = size / 2, size / 2 + 20
    c.text(cx, 16, title, size=13, anchor="middle")
    for rr in (0.25, 0.5, 0.75, 1.0):
        c.circle(cx, cy, r0 * rr, fill="none", stroke="#cccccc")
    for t, p, lab, bad in zip(thetas, ps, labels, mismatched):
        ang = 2.0 * t
        x = cx + r0 * p * math.cos(ang)
        y = cy - r0 * p * math.sin(ang)
        c.circle(x, y, 2.2, fill=LABEL_COLORS[int(lab)])
        if bad:
            c.circle(x, y, 4.5, fill="none", stroke="black", stroke_width=1)
    c.text(cx + r0 + 4, cy + 4, "p = 1")
    c.text(cx, cy + r0 + 18, "angle 2θ, radius p", anchor="middle", size=10)
    legend(c, size + 10, 60, [("separable", SEPARABLE_COLOR), ("entangled", ENTANGLED_COLOR)])
    c.circle(size + 15, 101, 4.5, fill="none", stroke="black")
    c.text(size + 25, 105, "mismatch")
    return c


def bar_chart(names, values, title: str, lo: float = 0.0, hi: float = 1.0) -> Canvas:
    w, h, left, bottom = 120 * len(names) + 80, 300, 60, 250
    c = Canvas(w, h)
    c.text(w / 2, 18, title, size=13, anchor="middle")
    span = bottom - 40
    c.line(left, bottom, w - 10, bottom, stroke="black")
    c.line(left, bottom, left, 40, stroke="black")
    for k in range(6):
        v = lo + (hi - lo) * k / 5
        y = bottom - span * k / 5
        c.text(left - 5, y + 4, f"{v:.2f}", anchor="end", size=10)
    for i, (name, v) in enumerate(zip(names, values)):
        x = left + 20 + 120 * i
        bh = span * (min(max(v, lo), hi) - lo) / (hi - lo)
        c.rect(x, bottom - bh, 80, bh, fill="#6c8ebf")
        c.text(x + 40, bottom - bh - 5, f"{v:.4f}", anchor="middle", size=10)
        c.text(x + 40, bottom + 16, name, anchor="middle", size=10)
    return c


def label_grid(panels, row_names, col_names, title: str) -> Canvas:
    """Grid of label maps; ``panels[r][c]`` is (x positions, p values, labels, mismatched)."""
    pw, ph, gap, left, top = 150, 150, 20, 70, 50
    c = Canvas(left + len(col_names) * (pw + gap), top + len(row_names) * (ph + gap) + 20)
    c.text(c.width / 2, 18, title, size=13, anchor="middle")
    for j, name in enumerate(col_names):
        c.text(left + j * (pw + gap) + pw / 2, top - 8, name, anchor="middle")
    for i, name in enumerate(row_names):
        y0 = top + i * (ph + gap)
        c.text(left - 8, y0 + ph / 2, name, anchor="end")
        for j in range(len(col_names)):
            x0 = left + j * (pw + gap)
            c.rect(x0, y0, pw, ph, fill="none", stroke="#999999")
            xs, ps, labs, bad = panels[i][j]
            for x, p, lab, m in zip(xs, ps, labs, bad):
                px, py = x0 + 5 + (pw - 10) * x, y0 + ph - 5 - (ph - 10) * p
                c.rect(px - 1.5, py - 1, 3, 2, fill="black" if m else LABEL_COLORS[int(lab)])
    c.text(left, c.height - 6, "x: theta, y: p (0 to 1); black marks mismatches", size=10)
    return c


def line_chart(xs_labels, series, title: str, lo: float, hi: float) -> Canvas:
    """``series`` maps a name to (colour, values) over the categorical x positions."""
    w, h, left, bottom, right = 520, 320, 70, 270, 160
    c = Canvas(w, h)
    c.text((w - right) / 2 + left / 2, 18, title, size=13, anchor="middle")
    span_x = w - left - right
    span_y = bottom - 40
    c.line(left, bottom, left + span_x, bottom, stroke="black")
    c.line(left, bottom, left, 40, stroke="black")
    n = len(xs_labels)
    xpos = [left + 20 + (span_x - 40) * i / max(n - 1, 1) for i in range(n)]
    for x, name in zip(xpos, xs_labels):
        c.text(x, bottom + 16, name, anchor="middle", size=10)
    for k in range(6):
        v = lo + (hi - lo) * k / 5
        c.text(left - 5, bottom - span_y * k / 5 + 4, f"{v:.3f}", anchor="end", size=10)
    entries = []
    for name, (color, values) in series.items():
        pts = [(x, bottom - span_y * (min(max(v, lo), hi) - lo) / (hi - lo))
               for x, v in zip(xpos, values)]
        c.polyline(pts, stroke=color, stroke_width=2)
        for x, y in pts:
            c.circle(x, y, 3, fill=color)
        entries.append((name, color))
    legend(c, w - right + 15, 60, entries)
    return c
