"""Minimal dependency-free SVG plots (scatter overlays and log-log lines)."""

import math
from xml.sax.saxutils import escape

W, H, PAD = 480, 480, 40
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _fmt(x):
    return f"{x:.3f}"


def _header(title, meta):
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f"<title>{escape(title)}</title>",
    ]
    if meta:
        out.append(f"<desc>{escape(meta)}</desc>")
    out.append(f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>')
    return out


def scatter(layers, radius, title="", meta="", circles=()):
    """Overlay of point sets in the square [-radius, radius]^2.

    ``layers`` is a list of (label, points, marker) with marker 'dot' or 'cross'.
    ``circles`` are extra radii drawn as outlines.
    """
    span = W - 2 * PAD

    def xy(z):
        return PAD + (z.real + radius) / (2 * radius) * span, PAD + (radius - z.imag) / (2 * radius) * span

    out = _header(title, meta)
    cx, cy = xy(0j)
    for rad in circles:
        rr = rad / (2 * radius) * span
        out.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{_fmt(rr)}" fill="none" stroke="#888"/>')
    for i, (label, pts, marker) in enumerate(layers):
        col = COLORS[i % len(COLORS)]
        out.append(f'<g id="{escape(label)}" stroke="{col}" fill="{col}">')
        for z in pts:
            x, y = xy(complex(z))
            if marker == "cross":
                out.append(
                    f'<path d="M{_fmt(x - 4)} {_fmt(y - 4)}L{_fmt(x + 4)} {_fmt(y + 4)}'
                    f'M{_fmt(x - 4)} {_fmt(y + 4)}L{_fmt(x + 4)} {_fmt(y - 4)}" fill="none"/>'
                )
            else:
                out.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="3"/>')
        out.append("</g>")
        out.append(f'<text x="{PAD}" y="{PAD - 12 - 14 * i}" fill="{col}" font-size="12">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def loglog(series, title="", meta="", xlabel="", ylabel=""):
    """Log-log line plot; ``series`` is a list of (label, xs, ys) with positive values."""
    xs = [x for _, sx, _ in series for x in sx]
    ys = [y for _, _, sy in series for y in sy if y > 0]
    lx0, lx1 = math.log10(min(xs)), math.log10(max(xs))
    ly0, ly1 = math.log10(min(ys)), math.log10(max(ys))
    if lx1 == lx0:
        lx0, lx1 = lx0 - 0.5, lx1 + 0.5
    if ly1 == ly0:
        ly0, ly1 = ly0 - 0.5, ly1 + 0.5
    span = W - 2 * PAD

    def xy(x, y):
        return (PAD + (math.log10(x) - lx0) / (lx1 - lx0) * span,
                H - PAD - (math.log10(y) - ly0) / (ly1 - ly0) * span)

    out = _header(title, meta)
    out.append(f'<path d="M{PAD} {PAD}V{H - PAD}H{W - PAD}" fill="none" stroke="black"/>')
    out.append(f'<text x="{W // 2}" y="{H - 8}" font-size="12">{escape(xlabel)}</text>')
    out.append(f'<text x="4" y="{PAD - 20}" font-size="12">{escape(ylabel)}</text>')
    for i, (label, sx, sy) in enumerate(series):
        col = COLORS[i % len(COLORS)]
        pts = [xy(x, y) for x, y in zip(sx, sy) if y > 0]
        if pts:
            d = "M" + "L".join(f"{_fmt(x)} {_fmt(y)}" for x, y in pts)
            out.append(f'<path d="{d}" fill="none" stroke="{col}"/>')
            for x, y in pts:
                out.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="3" fill="{col}"/>')
        out.append(f'<text x="{W - PAD - 120}" y="{PAD + 14 * i}" fill="{col}" font-size="12">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
