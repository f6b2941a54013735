"""Tiny deterministic SVG emitter for the run figures.

Only the primitives the figures need: polylines (optionally dashed), point
markers (circle / plus / cross), straight lines, text, and a linear
data-to-pixel mapping with simple axes.  Output is a plain string built in a
fixed order, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import math


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class Figure:
    def __init__(
        self,
        xlim: tuple[float, float],
        ylim: tuple[float, float],
        width: int = 720,
        height: int = 540,
        margin: int = 56,
        title: str = "",
        xlabel: str = "",
        ylabel: str = "",
        equal_aspect: bool = False,
    ):
        self.width = width
        self.height = height
        self.margin = margin
        x0, x1 = xlim
        y0, y1 = ylim
        if x1 <= x0:
            x1 = x0 + 1.0
        if y1 <= y0:
            y1 = y0 + 1.0
        if equal_aspect:
            # widen the shorter data span so units map to equal pixel lengths
            avail_w = width - 2 * margin
            avail_h = height - 2 * margin
            sx = avail_w / (x1 - x0)
            sy = avail_h / (y1 - y0)
            if sx < sy:
                cy = 0.5 * (y0 + y1)
                half = 0.5 * avail_h / sx
                y0, y1 = cy - half, cy + half
            else:
                cx = 0.5 * (x0 + x1)
                half = 0.5 * avail_w / sy
                x0, x1 = cx - half, cx + half
        self.xlim = (x0, x1)
        self.ylim = (y0, y1)
        self.title = title
        self.xlabel = xlabel
        self.ylabel = ylabel
        self._body: list[str] = []

    def _px(self, x: float) -> float:
        x0, x1 = self.xlim
        return self.margin + (x - x0) / (x1 - x0) * (self.width - 2 * self.margin)

    def _py(self, y: float) -> float:
        y0, y1 = self.ylim
        return self.height - self.margin - (y - y0) / (y1 - y0) * (
            self.height - 2 * self.margin
        )

    def polyline(
        self,
        xs,
        ys,
        stroke: str = "#1f77b4",
        width: float = 1.2,
        dashed: bool = False,
        opacity: float = 1.0,
    ) -> None:
        pts = " ".join(
            f"{_fmt(self._px(x))},{_fmt(self._py(y))}"
            for x, y in zip(xs, ys)
            if math.isfinite(x) and math.isfinite(y)
        )
        if not pts:
            return
        dash = ' stroke-dasharray="6 4"' if dashed else ""
        op = f' stroke-opacity="{opacity:g}"' if opacity != 1.0 else ""
        self._body.append(
            f'<polyline fill="none" stroke="{stroke}" stroke-width="{width:g}"'
            f"{dash}{op} points=\"{pts}\"/>"
        )

    def line(self, x0, y0, x1, y1, stroke="#000000", width=1.0, dashed=False) -> None:
        dash = ' stroke-dasharray="6 4"' if dashed else ""
        self._body.append(
            f'<line x1="{_fmt(self._px(x0))}" y1="{_fmt(self._py(y0))}" '
            f'x2="{_fmt(self._px(x1))}" y2="{_fmt(self._py(y1))}" '
            f'stroke="{stroke}" stroke-width="{width:g}"{dash}/>'
        )

    def dot(self, x, y, radius=2.0, fill="#000000") -> None:
        self._body.append(
            f'<circle cx="{_fmt(self._px(x))}" cy="{_fmt(self._py(y))}" '
            f'r="{radius:g}" fill="{fill}"/>'
        )

    def marker_plus(self, x, y, size=3.0, stroke="#1f77b4") -> None:
        cx, cy = self._px(x), self._py(y)
        self._body.append(
            f'<path d="M {_fmt(cx - size)} {_fmt(cy)} H {_fmt(cx + size)} '
            f'M {_fmt(cx)} {_fmt(cy - size)} V {_fmt(cy + size)}" '
            f'stroke="{stroke}" stroke-width="1" fill="none"/>'
        )

    def marker_cross(self, x, y, size=3.0, stroke="#d62728") -> None:
        cx, cy = self._px(x), self._py(y)
        self._body.append(
            f'<path d="M {_fmt(cx - size)} {_fmt(cy - size)} L {_fmt(cx + size)} {_fmt(cy + size)} '
            f'M {_fmt(cx - size)} {_fmt(cy + size)} L {_fmt(cx + size)} {_fmt(cy - size)}" '
            f'stroke="{stroke}" stroke-width="1" fill="none"/>'
        )

    def text(self, x_px: float, y_px: float, s: str, size=12, anchor="start") -> None:
        self._body.append(
            f'<text x="{_fmt(x_px)}" y="{_fmt(y_px)}" font-size="{size}" '
            f'font-family="monospace" text-anchor="{anchor}">{s}</text>'
        )

    def _ticks(self, lo: float, hi: float, n: int = 5) -> list[float]:
        return [lo + (hi - lo) * i / (n - 1) for i in range(n)]

    def _axes(self) -> list[str]:
        out: list[str] = []
        m = self.margin
        w, h = self.width, self.height
        out.append(
            f'<rect x="{m}" y="{m}" width="{w - 2 * m}" height="{h - 2 * m}" '
            'fill="none" stroke="#444444" stroke-width="1"/>'
        )
        for xv in self._ticks(*self.xlim):
            px = self._px(xv)
            out.append(
                f'<line x1="{_fmt(px)}" y1="{h - m}" x2="{_fmt(px)}" y2="{h - m + 4}" '
                'stroke="#444444" stroke-width="1"/>'
            )
            out.append(
                f'<text x="{_fmt(px)}" y="{h - m + 16}" font-size="10" '
                f'font-family="monospace" text-anchor="middle">{xv:.3g}</text>'
            )
        for yv in self._ticks(*self.ylim):
            py = self._py(yv)
            out.append(
                f'<line x1="{m - 4}" y1="{_fmt(py)}" x2="{m}" y2="{_fmt(py)}" '
                'stroke="#444444" stroke-width="1"/>'
            )
            out.append(
                f'<text x="{m - 6}" y="{_fmt(py + 3)}" font-size="10" '
                f'font-family="monospace" text-anchor="end">{yv:.3g}</text>'
            )
        if self.title:
            out.append(
                f'<text x="{w // 2}" y="{m - 10}" font-size="13" '
                f'font-family="monospace" text-anchor="middle">{self.title}</text>'
            )
        if self.xlabel:
            out.append(
                f'<text x="{w // 2}" y="{h - 10}" font-size="11" '
                f'font-family="monospace" text-anchor="middle">{self.xlabel}</text>'
            )
        if self.ylabel:
            out.append(
                f'<text x="14" y="{h // 2}" font-size="11" font-family="monospace" '
                f'text-anchor="middle" transform="rotate(-90 14 {h // 2})">{self.ylabel}</text>'
            )
        return out

    def to_svg(self) -> str:
        head = (
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {self.width} {self.height}" '
            f'width="{self.width}" height="{self.height}">\n'
            '<rect width="100%" height="100%" fill="#ffffff"/>\n'
        )
        return head + "\n".join(self._axes() + self._body) + "\n</svg>\n"
