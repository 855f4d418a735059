"""Minimal static SVG line charts. No plotting dependency; CSV carries the data."""

from __future__ import annotations

import math

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 70, 20, 30, 50


def _ticks(lo, hi, n=6):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(n - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min(s for s in (mag, 2 * mag, 2.5 * mag, 5 * mag, 10 * mag) if s >= raw)
    t0 = math.ceil(lo / step) * step
    out = []
    t = t0
    while t <= hi + 1e-12 * step:
        out.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return out


def _fmt(v):
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        return f"{v:.1e}"
    return f"{v:g}"


def line_chart(path, series, title="", xlabel="", ylabel="", log_y=False):
    """Write a line chart to ``path``.

    ``series`` is a list of (label, xs, ys); y values <= 0 are dropped when
    log_y is set.
    """
    pts = []
    for _, xs, ys in series:
        for x, y in zip(xs, ys):
            if log_y and y <= 0:
                continue
            pts.append((float(x), math.log10(y) if log_y else float(y)))
    if not pts:
        pts = [(0.0, 0.0), (1.0, 1.0)]
    xlo = min(p[0] for p in pts); xhi = max(p[0] for p in pts)
    ylo = min(p[1] for p in pts); yhi = max(p[1] for p in pts)
    if xhi == xlo:
        xhi = xlo + 1.0
    if yhi == ylo:
        yhi = ylo + 1.0
    pad = 0.05 * (yhi - ylo)
    ylo -= pad; yhi += pad

    def sx(x):
        return _ML + (x - xlo) / (xhi - xlo) * (_W - _ML - _MR)

    def sy(y):
        return _H - _MB - (y - ylo) / (yhi - ylo) * (_H - _MT - _MB)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
           f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
           f'<rect width="{_W}" height="{_H}" fill="white"/>']
    # axes and ticks
    out.append(f'<line x1="{_ML}" y1="{_H-_MB}" x2="{_W-_MR}" y2="{_H-_MB}" stroke="black"/>')
    out.append(f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H-_MB}" stroke="black"/>')
    for t in _ticks(xlo, xhi):
        out.append(f'<line x1="{sx(t):.1f}" y1="{_H-_MB}" x2="{sx(t):.1f}" y2="{_H-_MB+5}" stroke="black"/>')
        out.append(f'<text x="{sx(t):.1f}" y="{_H-_MB+18}" text-anchor="middle">{_fmt(t)}</text>')
    for t in _ticks(ylo, yhi):
        lab = _fmt(10.0 ** t) if log_y else _fmt(t)
        out.append(f'<line x1="{_ML-5}" y1="{sy(t):.1f}" x2="{_ML}" y2="{sy(t):.1f}" stroke="black"/>')
        out.append(f'<text x="{_ML-8}" y="{sy(t)+4:.1f}" text-anchor="end">{lab}</text>')
    if title:
        out.append(f'<text x="{(_ML+_W-_MR)/2}" y="{_MT-10}" text-anchor="middle" font-size="14">{title}</text>')
    if xlabel:
        out.append(f'<text x="{(_ML+_W-_MR)/2}" y="{_H-12}" text-anchor="middle">{xlabel}</text>')
    if ylabel:
        out.append(f'<text x="16" y="{(_MT+_H-_MB)/2}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {(_MT+_H-_MB)/2})">{ylabel}</text>')
    for i, (label, xs, ys) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        coords = []
        for x, y in zip(xs, ys):
            if log_y:
                if y <= 0:
                    continue
                y = math.log10(y)
            coords.append(f"{sx(float(x)):.1f},{sy(float(y)):.1f}")
        if coords:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                       f'points="{" ".join(coords)}"/>')
        if label:
            yleg = _MT + 16 + 16 * i
            out.append(f'<line x1="{_W-_MR-120}" y1="{yleg-4}" x2="{_W-_MR-95}" y2="{yleg-4}" '
                       f'stroke="{color}" stroke-width="1.5"/>')
            out.append(f'<text x="{_W-_MR-90}" y="{yleg}">{label}</text>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out))
