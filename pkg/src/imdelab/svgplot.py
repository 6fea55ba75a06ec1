"""Minimal standalone SVG line/phase plots.

Figures are batch artifacts (trajectory overlays, loss curves), so a
hand-rolled writer keeps the package free of plotting dependencies.
"""

import math

__all__ = ["line_plot"]

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_W, _H = 640, 440
_ML, _MR, _MT, _MB = 62, 16, 34, 46


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1, 2, 5, 10):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-12 * step:
        out.append(round(v, 12))
        v += step
    return out


def _fmt(v):
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        return f"{v:.1e}"
    return f"{v:g}"


def line_plot(path, series, title="", xlabel="", ylabel="", logy=False):
    """Write an SVG with one polyline per series.

    Each series is a dict with keys x, y (sequences) and optional label.
    """
    def ty(v):
        return math.log10(v) if logy else v

    xs = [float(x) for s in series for x in s["x"]]
    ys = [ty(float(y)) for s in series for y in s["y"]
          if not logy or y > 0]
    if not xs or not ys:
        raise ValueError("nothing to plot")
    xlo, xhi = min(xs), max(xs)
    ylo, yhi = min(ys), max(ys)
    if xhi == xlo:
        xhi = xlo + 1.0
    if yhi == ylo:
        yhi = ylo + 1.0
    pw = _W - _ML - _MR
    ph = _H - _MT - _MB

    def px(x):
        return _ML + (x - xlo) / (xhi - xlo) * pw

    def py(y):
        return _MT + (yhi - y) / (yhi - ylo) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<rect x="{_ML}" y="{_MT}" width="{pw}" height="{ph}" fill="none" '
        f'stroke="#333"/>',
    ]
    if title:
        parts.append(f'<text x="{_W / 2}" y="20" text-anchor="middle" '
                     f'font-size="14">{title}</text>')
    for tx in _ticks(xlo, xhi):
        parts.append(f'<line x1="{px(tx):.1f}" y1="{_MT + ph}" '
                     f'x2="{px(tx):.1f}" y2="{_MT + ph + 4}" stroke="#333"/>')
        parts.append(f'<text x="{px(tx):.1f}" y="{_MT + ph + 18}" '
                     f'text-anchor="middle">{_fmt(tx)}</text>')
    for tv in _ticks(ylo, yhi):
        label = _fmt(10 ** tv) if logy else _fmt(tv)
        parts.append(f'<line x1="{_ML - 4}" y1="{py(tv):.1f}" x2="{_ML}" '
                     f'y2="{py(tv):.1f}" stroke="#333"/>')
        parts.append(f'<text x="{_ML - 7}" y="{py(tv) + 4:.1f}" '
                     f'text-anchor="end">{label}</text>')
    if xlabel:
        parts.append(f'<text x="{_ML + pw / 2}" y="{_H - 10}" '
                     f'text-anchor="middle">{xlabel}</text>')
    if ylabel:
        parts.append(f'<text x="16" y="{_MT + ph / 2}" text-anchor="middle" '
                     f'transform="rotate(-90 16 {_MT + ph / 2})">{ylabel}</text>')

    for i, s in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        pts = []
        for x, y in zip(s["x"], s["y"]):
            if logy and y <= 0:
                continue
            pts.append(f"{px(float(x)):.2f},{py(ty(float(y))):.2f}")
        parts.append(f'<polyline points="{" ".join(pts)}" fill="none" '
                     f'stroke="{color}" stroke-width="1.4"/>')
        label = s.get("label")
        if label:
            yleg = _MT + 16 + 16 * i
            parts.append(f'<line x1="{_ML + pw - 120}" y1="{yleg}" '
                         f'x2="{_ML + pw - 96}" y2="{yleg}" stroke="{color}" '
                         f'stroke-width="2"/>')
            parts.append(f'<text x="{_ML + pw - 90}" y="{yleg + 4}">{label}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
