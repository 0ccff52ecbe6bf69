"""Minimal deterministic SVG plotting: axes, polylines, filled areas,
scatter markers, and cell maps. No plotting stack, no randomness; output
depends only on the data and an optional timestamp comment.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["Figure"]


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    if not (hi > lo):
        return [lo]
    raw = (hi - lo) / max(target, 2)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    first = math.ceil(lo / step) * step
    ticks = []
    v = first
    while v <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return ticks


_VIRIDIS = (
    (0.267, 0.005, 0.329),
    (0.270, 0.185, 0.475),
    (0.230, 0.322, 0.546),
    (0.173, 0.449, 0.558),
    (0.128, 0.567, 0.551),
    (0.158, 0.684, 0.502),
    (0.369, 0.789, 0.383),
    (0.678, 0.864, 0.190),
    (0.993, 0.906, 0.144),
)


def _colormap(v: float) -> str:
    v = min(max(v, 0.0), 1.0)
    pos = v * (len(_VIRIDIS) - 1)
    i = min(int(pos), len(_VIRIDIS) - 2)
    f = pos - i
    r, g, b = (
        (1 - f) * _VIRIDIS[i][k] + f * _VIRIDIS[i + 1][k] for k in range(3)
    )
    return f"#{int(255 * r):02x}{int(255 * g):02x}{int(255 * b):02x}"


@dataclass
class Figure:
    """One panel with linear or log axes and a draw-order element list."""

    width: int = 640
    height: int = 460
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    xlog: bool = False
    ylog: bool = False
    _elements: list = field(default_factory=list)
    _xdata: list = field(default_factory=list)
    _ydata: list = field(default_factory=list)
    margin_left: int = 72
    margin_right: int = 20
    margin_top: int = 36
    margin_bottom: int = 52

    def _track(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        ok = np.isfinite(x) & np.isfinite(y)
        if self.xlog:
            ok &= x > 0
        if self.ylog:
            ok &= y > 0
        self._xdata.extend(x[ok].tolist())
        self._ydata.extend(y[ok].tolist())
        return x, y, ok

    def line(self, x, y, color="#d62728", width=1.5, dash=None, label=None):
        x, y, ok = self._track(x, y)
        self._elements.append(("line", x[ok], y[ok], color, width, dash, label))

    def points(self, x, y, color="#000000", radius=2.5, label=None):
        x, y, ok = self._track(x, y)
        self._elements.append(("points", x[ok], y[ok], color, radius, label))

    def fill_under(self, x, y, color="#17becf", opacity=0.45, label=None):
        x, y, ok = self._track(x, y)
        self._elements.append(("fill", x[ok], y[ok], color, opacity, label))

    def vline(self, x, color="#444444", dash="4 3", label=None):
        self._elements.append(("vline", float(x), color, dash, label))

    def hline(self, y, color="#444444", dash="4 3", label=None):
        self._elements.append(("hline", float(y), color, dash, label))

    def cells(self, x_centers, y_centers, values, label=None):
        """Filled-rectangle map; values normalized over their finite range."""
        x = np.asarray(x_centers, dtype=float)
        y = np.asarray(y_centers, dtype=float)
        self._track(x, np.full_like(x, y[0]))
        self._track(np.full_like(y, x[0]), y)
        self._elements.append(("cells", x, y, np.asarray(values, dtype=float), label))

    def annotate(self, text, x, y, color="#000000"):
        self._elements.append(("annotate", str(text), float(x), float(y), color))

    # --- rendering ---

    def _edges(self, centers: np.ndarray) -> np.ndarray:
        mids = 0.5 * (centers[1:] + centers[:-1])
        first = centers[0] - (mids[0] - centers[0])
        last = centers[-1] + (centers[-1] - mids[-1])
        return np.concatenate(([first], mids, [last]))

    def _scales(self):
        xs = np.array(self._xdata) if self._xdata else np.array([0.0, 1.0])
        ys = np.array(self._ydata) if self._ydata else np.array([0.0, 1.0])
        xlo, xhi = float(xs.min()), float(xs.max())
        ylo, yhi = float(ys.min()), float(ys.max())
        if self.xlog:
            xlo, xhi = math.log10(xlo), math.log10(xhi)
        if self.ylog:
            ylo, yhi = math.log10(ylo), math.log10(yhi)
        for lo, hi in ((xlo, xhi),):
            if hi - lo < 1e-30:
                xlo, xhi = lo - 0.5, hi + 0.5
        if yhi - ylo < 1e-30:
            ylo, yhi = ylo - 0.5, yhi + 0.5
        xpad = 0.04 * (xhi - xlo)
        ypad = 0.06 * (yhi - ylo)
        xlo, xhi = xlo - xpad, xhi + xpad
        ylo, yhi = ylo - ypad, yhi + ypad
        x0, x1 = self.margin_left, self.width - self.margin_right
        y0, y1 = self.height - self.margin_bottom, self.margin_top

        def px(v):
            v = math.log10(v) if self.xlog else v
            return x0 + (v - xlo) / (xhi - xlo) * (x1 - x0)

        def py(v):
            v = math.log10(v) if self.ylog else v
            return y0 + (v - ylo) / (yhi - ylo) * (y1 - y0)

        return px, py, (xlo, xhi), (ylo, yhi)

    def _tick_values(self, lo, hi, log_scale):
        if not log_scale:
            return [(v, _fmt(v)) for v in nice_ticks(lo, hi)]
        ticks = []
        for p in range(math.floor(lo), math.ceil(hi) + 1):
            if lo <= p <= hi:
                ticks.append((p, f"1e{p:d}" if p not in (0, 1) else ("1" if p == 0 else "10")))
        if len(ticks) < 2:  # narrow log range: fall back to linear ticks in log space
            ticks = [(v, _fmt(10**v)) for v in nice_ticks(lo, hi, 4)]
        return ticks

    def render(self, path, timestamp: str | None = None) -> None:
        px, py, (xlo, xhi), (ylo, yhi) = self._scales()
        x0, x1 = self.margin_left, self.width - self.margin_right
        y0, y1 = self.height - self.margin_bottom, self.margin_top
        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
            f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">'
        ]
        if timestamp is not None:
            out.append(f"<!-- generated {timestamp} -->")
        out.append(f'<rect width="{self.width}" height="{self.height}" fill="white"/>')

        legend_items = []
        for el in self._elements:
            kind = el[0]
            if kind == "cells":
                _, xc, yc, vals, label = el
                finite = vals[np.isfinite(vals)]
                vmin = float(finite.min()) if finite.size else 0.0
                vmax = float(finite.max()) if finite.size else 1.0
                span = (vmax - vmin) or 1.0
                xe, ye = self._edges(xc), self._edges(yc)
                for i in range(yc.size):
                    for j in range(xc.size):
                        v = vals[i, j]
                        if not np.isfinite(v):
                            continue
                        cx0, cx1 = px(xe[j]), px(xe[j + 1])
                        cy0, cy1 = py(ye[i]), py(ye[i + 1])
                        out.append(
                            f'<rect x="{_fmt(min(cx0, cx1))}" y="{_fmt(min(cy0, cy1))}" '
                            f'width="{_fmt(abs(cx1 - cx0))}" height="{_fmt(abs(cy1 - cy0))}" '
                            f'fill="{_colormap((v - vmin) / span)}"/>'
                        )
                if label:
                    legend_items.append((label, "#808080"))
            elif kind == "fill":
                _, x, y, color, opacity, label = el
                if x.size >= 2:
                    pts = [f"{_fmt(px(x[0]))},{_fmt(py(0.0 if not self.ylog else min(y[y>0], default=1e-30)))}"]
                    pts += [f"{_fmt(px(xi))},{_fmt(py(yi))}" for xi, yi in zip(x, y)]
                    pts.append(f"{_fmt(px(x[-1]))},{_fmt(py(0.0 if not self.ylog else min(y[y>0], default=1e-30)))}")
                    out.append(
                        f'<polygon points="{" ".join(pts)}" fill="{color}" '
                        f'fill-opacity="{opacity}" stroke="none"/>'
                    )
                if label:
                    legend_items.append((label, color))
            elif kind == "line":
                _, x, y, color, width, dash, label = el
                if x.size >= 2:
                    pts = " ".join(
                        f"{_fmt(px(xi))},{_fmt(py(yi))}" for xi, yi in zip(x, y)
                    )
                    dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
                    out.append(
                        f'<polyline points="{pts}" fill="none" stroke="{color}" '
                        f'stroke-width="{width}"{dash_attr}/>'
                    )
                if label:
                    legend_items.append((label, color))
            elif kind == "points":
                _, x, y, color, radius, label = el
                for xi, yi in zip(x, y):
                    out.append(
                        f'<circle cx="{_fmt(px(xi))}" cy="{_fmt(py(yi))}" '
                        f'r="{radius}" fill="{color}"/>'
                    )
                if label:
                    legend_items.append((label, color))
            elif kind == "vline":
                _, xv, color, dash, label = el
                out.append(
                    f'<line x1="{_fmt(px(xv))}" y1="{y0}" x2="{_fmt(px(xv))}" y2="{y1}" '
                    f'stroke="{color}" stroke-dasharray="{dash}"/>'
                )
                if label:
                    legend_items.append((label, color))
            elif kind == "hline":
                _, yv, color, dash, label = el
                out.append(
                    f'<line x1="{x0}" y1="{_fmt(py(yv))}" x2="{x1}" y2="{_fmt(py(yv))}" '
                    f'stroke="{color}" stroke-dasharray="{dash}"/>'
                )
                if label:
                    legend_items.append((label, color))
            elif kind == "annotate":
                _, text, xv, yv, color = el
                out.append(
                    f'<text x="{_fmt(px(xv))}" y="{_fmt(py(yv))}" font-size="11" '
                    f'fill="{color}">{text}</text>'
                )

        # axes frame and ticks
        out.append(
            f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
            f'fill="none" stroke="black" stroke-width="1"/>'
        )
        for v, text in self._tick_values(xlo, xhi, self.xlog):
            sx = x0 + (v - xlo) / (xhi - xlo) * (x1 - x0)
            out.append(
                f'<line x1="{_fmt(sx)}" y1="{y0}" x2="{_fmt(sx)}" y2="{y0 + 5}" stroke="black"/>'
            )
            out.append(
                f'<text x="{_fmt(sx)}" y="{y0 + 18}" font-size="11" '
                f'text-anchor="middle">{text}</text>'
            )
        for v, text in self._tick_values(ylo, yhi, self.ylog):
            sy = y0 + (v - ylo) / (yhi - ylo) * (y1 - y0)
            out.append(
                f'<line x1="{x0 - 5}" y1="{_fmt(sy)}" x2="{x0}" y2="{_fmt(sy)}" stroke="black"/>'
            )
            out.append(
                f'<text x="{x0 - 8}" y="{_fmt(sy + 4)}" font-size="11" '
                f'text-anchor="end">{text}</text>'
            )
        if self.title:
            out.append(
                f'<text x="{(x0 + x1) / 2}" y="{y1 - 12}" font-size="14" '
                f'text-anchor="middle">{self.title}</text>'
            )
        if self.xlabel:
            out.append(
                f'<text x="{(x0 + x1) / 2}" y="{self.height - 14}" font-size="12" '
                f'text-anchor="middle">{self.xlabel}</text>'
            )
        if self.ylabel:
            out.append(
                f'<text x="16" y="{(y0 + y1) / 2}" font-size="12" text-anchor="middle" '
                f'transform="rotate(-90 16 {(y0 + y1) / 2})">{self.ylabel}</text>'
            )
        for k, (label, color) in enumerate(legend_items):
            ly = y1 + 14 + 16 * k
            out.append(
                f'<rect x="{x1 - 150}" y="{ly - 9}" width="12" height="9" fill="{color}"/>'
            )
            out.append(
                f'<text x="{x1 - 134}" y="{ly}" font-size="11">{label}</text>'
            )
        out.append("</svg>")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(out) + "\n")
