"""Tiny SVG 1.1 line-chart writer (axes, ticks, polylines, legend)."""

import math
from html import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _num(x):
    return f"{x:.2f}".rstrip("0").rstrip(".")


def nice_ticks(lo, hi, target=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / target
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks


class LineChart:
    """Collects series and renders them into a standalone SVG document."""

    def __init__(self, title="", xlabel="", ylabel="", width=640, height=420):
        self.title = title
        self.xlabel = xlabel
        self.ylabel = ylabel
        self.width = width
        self.height = height
        self.series = []
        self.hlines = []
        self.margin = (60, 130, 40, 50)  # left, right, top, bottom

    def add_series(self, label, xs, ys):
        pts = [(float(x), float(y)) for x, y in zip(xs, ys) if math.isfinite(y)]
        self.series.append((label, pts))

    def add_hline(self, y, label=None):
        self.hlines.append((float(y), label))

    def _ranges(self):
        xs = [x for _, pts in self.series for x, _ in pts]
        ys = [y for _, pts in self.series for _, y in pts] + [y for y, _ in self.hlines]
        if not xs:
            xs = [0.0, 1.0]
        if not ys:
            ys = [0.0, 1.0]
        x0, x1 = min(xs), max(xs)
        y0, y1 = min(ys), max(ys)
        if x1 == x0:
            x1 = x0 + 1.0
        pad = 0.05 * (y1 - y0) if y1 > y0 else 0.5
        return x0, x1, y0 - pad, y1 + pad

    def render(self):
        left, right, top, bottom = self.margin
        pw = self.width - left - right
        ph = self.height - top - bottom
        x0, x1, y0, y1 = self._ranges()

        def px(x):
            return left + (x - x0) / (x1 - x0) * pw

        def py(y):
            return top + (1.0 - (y - y0) / (y1 - y0)) * ph

        out = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{self.width}" '
            f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">',
            f'<rect x="0" y="0" width="{self.width}" height="{self.height}" fill="white"/>',
            f'<text x="{self.width / 2:.1f}" y="20" text-anchor="middle" font-family="sans-serif" '
            f'font-size="13">{escape(self.title)}</text>',
        ]
        out.append(f'<g class="axes" stroke="black" stroke-width="1">'
                   f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}"/>'
                   f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}"/></g>')
        ticks = ['<g class="ticks" font-family="sans-serif" font-size="10">']
        for t in nice_ticks(x0, x1):
            if x0 - 1e-12 <= t <= x1 + 1e-12:
                ticks.append(f'<line x1="{px(t):.2f}" y1="{top + ph}" x2="{px(t):.2f}" y2="{top + ph + 4}" stroke="black"/>'
                             f'<text x="{px(t):.2f}" y="{top + ph + 16}" text-anchor="middle">{t:g}</text>')
        for t in nice_ticks(y0, y1):
            if y0 - 1e-12 <= t <= y1 + 1e-12:
                ticks.append(f'<line x1="{left - 4}" y1="{py(t):.2f}" x2="{left}" y2="{py(t):.2f}" stroke="black"/>'
                             f'<text x="{left - 6}" y="{py(t) + 3:.2f}" text-anchor="end">{t:g}</text>')
        ticks.append("</g>")
        out.extend(ticks)
        out.append(f'<text x="{left + pw / 2:.1f}" y="{self.height - 10}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="12">{escape(self.xlabel)}</text>')
        out.append(f'<text x="14" y="{top + ph / 2:.1f}" text-anchor="middle" font-family="sans-serif" '
                   f'font-size="12" transform="rotate(-90 14 {top + ph / 2:.1f})">{escape(self.ylabel)}</text>')
        for y, label in self.hlines:
            out.append(f'<line class="reference" x1="{left}" y1="{py(y):.2f}" x2="{left + pw}" y2="{py(y):.2f}" '
                       f'stroke="gray" stroke-dasharray="4 3"/>')
        for i, (label, pts) in enumerate(self.series):
            color = PALETTE[i % len(PALETTE)]
            coords = " ".join(f"{_num(px(x))},{_num(py(y))}" for x, y in pts)
            out.append(f'<polyline class="series" data-label="{escape(label)}" fill="none" stroke="{color}" '
                       f'stroke-width="1.5" points="{coords}"/>')
        lx = left + pw + 15
        out.append('<g class="legend" font-family="sans-serif" font-size="11">')
        for i, (label, _) in enumerate(self.series):
            color = PALETTE[i % len(PALETTE)]
            ly = top + 10 + 18 * i
            out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>'
                       f'<text x="{lx + 26}" y="{ly + 4}">{escape(label)}</text>')
        out.append("</g>")
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.render())
