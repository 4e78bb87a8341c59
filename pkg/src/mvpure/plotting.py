"""Minimal self-contained SVG line plots."""

import math
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")
WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=160, top=40, bottom=55)


def _ticks(lo, hi, count=6):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(count - 1, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw), default=raw)
    start = math.floor(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 10))
        t += step
    return ticks


def line_plot(series, title="", xlabel="", ylabel="", hlines=()):
    """Render labelled ``(x, y)`` series as an SVG document string.

    Points with a non-finite ``y`` are skipped. ``hlines`` draws dashed
    horizontal reference lines.
    """
    pts = [
        (x, y)
        for data in series.values()
        for x, y in data
        if y is not None and math.isfinite(y)
    ]
    pts += [(p[0], h) for h in hlines for p in pts[:1]]
    xs = [p[0] for p in pts] or [0.0, 1.0]
    ys = [p[1] for p in pts] or [0.0, 1.0]
    xt, yt = _ticks(min(xs), max(xs)), _ticks(min(ys), max(ys))
    x0, x1, y0, y1 = xt[0], xt[-1], yt[0], yt[-1]
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(x):
        return MARGIN["left"] + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return MARGIN["top"] + (y1 - y) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in xt:
        out.append(f'<line x1="{sx(t):.1f}" y1="{MARGIN["top"] + ph}" x2="{sx(t):.1f}" y2="{MARGIN["top"] + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{sx(t):.1f}" y="{MARGIN["top"] + ph + 18}" text-anchor="middle">{t:g}</text>')
    for t in yt:
        out.append(f'<line x1="{MARGIN["left"] - 5}" y1="{sy(t):.1f}" x2="{MARGIN["left"]}" y2="{sy(t):.1f}" stroke="black"/>')
        out.append(f'<text x="{MARGIN["left"] - 8}" y="{sy(t) + 4:.1f}" text-anchor="end">{t:g}</text>')
    out.append(
        f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>'
    )
    out.append(
        f'<text x="18" y="{MARGIN["top"] + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 18 {MARGIN["top"] + ph / 2:.1f})">{escape(ylabel)}</text>'
    )
    for h in hlines:
        out.append(
            f'<line x1="{MARGIN["left"]}" y1="{sy(h):.1f}" x2="{MARGIN["left"] + pw}" y2="{sy(h):.1f}" '
            f'stroke="gray" stroke-dasharray="6,4"/>'
        )
    for i, (label, data) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        good = [(x, y) for x, y in data if y is not None and math.isfinite(y)]
        if good:
            path = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in good)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="2"/>')
            for x, y in good:
                out.append(f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="3" fill="{color}"/>')
        ly = MARGIN["top"] + 10 + 18 * i
        lx = MARGIN["left"] + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
