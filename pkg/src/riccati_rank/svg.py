"""Minimal SVG line plots (log10 or linear y-axis), one polyline per series."""

import math

_W, _H = 640, 420
_LEFT, _RIGHT, _TOP, _BOTTOM = 70, 20, 40, 50
_FLOOR = 1e-20
_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
            "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _fmt(v):
    return f"{v:.2f}"


def line_plot(path, series, title="", xlabel="", ylabel="", logy=True):
    """
    Write an SVG with one polyline per ``(label, xs, ys)`` in `series`.

    On a log axis values are clamped below at 1e-20 so collapsing series stay
    visible at the bottom of the plot.
    """
    pts = []
    for label, xs, ys in series:
        ys = [math.log10(max(float(y), _FLOOR)) if logy else float(y) for y in ys]
        pts.append((label, [float(x) for x in xs], ys))
    allx = [x for _, xs, _ in pts for x in xs] or [0.0, 1.0]
    ally = [y for _, _, ys in pts for y in ys if math.isfinite(y)] or [0.0, 1.0]
    x0, x1 = min(allx), max(allx)
    y0, y1 = math.floor(min(ally)), math.ceil(max(ally))
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1
    pw, ph = _W - _LEFT - _RIGHT, _H - _TOP - _BOTTOM

    def sx(x):
        return _LEFT + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return _TOP + (y1 - y) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
           f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="11">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<text x="{_W / 2}" y="22" text-anchor="middle" font-size="14">{title}</text>',
           f'<rect x="{_LEFT}" y="{_TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    step = max(1, int(math.ceil((y1 - y0) / 10)))
    for t in range(int(y0), int(y1) + 1, step):
        y = sy(t)
        lab = f"1e{t}" if logy else f"{t:g}"
        out.append(f'<line x1="{_LEFT - 4}" y1="{_fmt(y)}" x2="{_LEFT}" y2="{_fmt(y)}" stroke="black"/>')
        out.append(f'<text x="{_LEFT - 6}" y="{_fmt(y + 4)}" text-anchor="end">{lab}</text>')
    for i in range(6):
        xv = x0 + (x1 - x0) * i / 5
        x = sx(xv)
        out.append(f'<line x1="{_fmt(x)}" y1="{_TOP + ph}" x2="{_fmt(x)}" y2="{_TOP + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{_fmt(x)}" y="{_TOP + ph + 16}" text-anchor="middle">{xv:.4g}</text>')
    out.append(f'<text x="{_LEFT + pw / 2}" y="{_H - 12}" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="16" y="{_TOP + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {_TOP + ph / 2})">{ylabel}</text>')
    for i, (label, xs, ys) in enumerate(pts):
        coords = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in zip(xs, ys) if math.isfinite(y))
        color = _PALETTE[i % len(_PALETTE)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1" points="{coords}">'
                   f'<title>{label}</title></polyline>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
