"""Minimal standalone SVG emitters for line plots and heatmaps."""

from __future__ import annotations

import math

_W, _H = 640, 440
_ML, _MR, _MT, _MB = 70, 20, 36, 58


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    step = (hi - lo) / (n - 1)
    return [lo + k * step for k in range(n)]


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def _header(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="20" text-anchor="middle" font-size="15" '
        f'font-family="sans-serif">{title}</text>',
    ]


def _axes(xlo, xhi, ylo, yhi, xlabel, ylabel) -> list[str]:
    parts = [
        f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" '
        f'height="{_H - _MT - _MB}" fill="none" stroke="black"/>',
        f'<text x="{(_ML + _W - _MR) / 2}" y="{_H - 12}" text-anchor="middle" '
        f'font-size="12" font-family="sans-serif">{xlabel}</text>',
        f'<text x="16" y="{(_MT + _H - _MB) / 2}" text-anchor="middle" '
        f'font-size="12" font-family="sans-serif" '
        f'transform="rotate(-90 16 {(_MT + _H - _MB) / 2})">{ylabel}</text>',
    ]
    for tx in _ticks(xlo, xhi):
        px = _ML + (tx - xlo) / max(xhi - xlo, 1e-300) * (_W - _ML - _MR)
        parts.append(f'<line x1="{px:.1f}" y1="{_H - _MB}" x2="{px:.1f}" '
                     f'y2="{_H - _MB + 5}" stroke="black"/>')
        parts.append(f'<text x="{px:.1f}" y="{_H - _MB + 18}" text-anchor="middle" '
                     f'font-size="10" font-family="sans-serif">{_fmt(tx)}</text>')
    for ty in _ticks(ylo, yhi):
        py = _H - _MB - (ty - ylo) / max(yhi - ylo, 1e-300) * (_H - _MT - _MB)
        parts.append(f'<line x1="{_ML - 5}" y1="{py:.1f}" x2="{_ML}" '
                     f'y2="{py:.1f}" stroke="black"/>')
        parts.append(f'<text x="{_ML - 8}" y="{py + 3:.1f}" text-anchor="end" '
                     f'font-size="10" font-family="sans-serif">{_fmt(ty)}</text>')
    return parts


def line_plot(path, xs, ys, title="", xlabel="x", ylabel="y",
              logx=False, logy=False, extra_series=None) -> None:
    """Write a polyline plot; ``extra_series`` is a list of (xs, ys, color)."""
    series = [(list(xs), list(ys), "steelblue")] + list(extra_series or [])
    tx = (lambda v: math.log10(v)) if logx else (lambda v: v)
    ty = (lambda v: math.log10(v)) if logy else (lambda v: v)
    all_x = [tx(v) for s in series for v in s[0]]
    all_y = [ty(v) for s in series for v in s[1]]
    xlo, xhi = min(all_x), max(all_x)
    ylo, yhi = min(all_y), max(all_y)
    if yhi == ylo:
        ylo, yhi = ylo - 1.0, yhi + 1.0
    if xhi == xlo:
        xlo, xhi = xlo - 1.0, xhi + 1.0
    parts = _header(title)
    parts += _axes(xlo, xhi, ylo, yhi,
                   f"log10({xlabel})" if logx else xlabel,
                   f"log10({ylabel})" if logy else ylabel)
    for sx, sy, color in series:
        pts = []
        for vx, vy in zip(sx, sy):
            px = _ML + (tx(vx) - xlo) / (xhi - xlo) * (_W - _ML - _MR)
            py = _H - _MB - (ty(vy) - ylo) / (yhi - ylo) * (_H - _MT - _MB)
            pts.append(f"{px:.2f},{py:.2f}")
        parts.append(f'<polyline points="{" ".join(pts)}" fill="none" '
                     f'stroke="{color}" stroke-width="1.5"/>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


def heatmap(path, xs, ys, cells, title="", xlabel="x", ylabel="y") -> None:
    """Categorical heatmap; ``cells[(x, y)]`` maps to a color name."""
    xs, ys = sorted(set(xs)), sorted(set(ys))
    nx, ny = len(xs), len(ys)
    cw = (_W - _ML - _MR) / max(nx, 1)
    ch = (_H - _MT - _MB) / max(ny, 1)
    parts = _header(title)
    for i, vx in enumerate(xs):
        for j, vy in enumerate(ys):
            color = cells.get((vx, vy), "lightgray")
            px = _ML + i * cw
            py = _H - _MB - (j + 1) * ch
            parts.append(f'<rect x="{px:.1f}" y="{py:.1f}" width="{cw:.1f}" '
                         f'height="{ch:.1f}" fill="{color}" stroke="white"/>')
    for i, vx in enumerate(xs):
        parts.append(f'<text x="{_ML + (i + 0.5) * cw:.1f}" y="{_H - _MB + 14}" '
                     f'text-anchor="middle" font-size="10" '
                     f'font-family="sans-serif">{_fmt(vx)}</text>')
    for j, vy in enumerate(ys):
        parts.append(f'<text x="{_ML - 6}" y="{_H - _MB - (j + 0.5) * ch + 3:.1f}" '
                     f'text-anchor="end" font-size="10" '
                     f'font-family="sans-serif">{_fmt(vy)}</text>')
    parts.append(f'<text x="{(_ML + _W - _MR) / 2}" y="{_H - 12}" text-anchor="middle" '
                 f'font-size="12" font-family="sans-serif">{xlabel}</text>')
    parts.append(f'<text x="16" y="{(_MT + _H - _MB) / 2}" text-anchor="middle" '
                 f'font-size="12" font-family="sans-serif" '
                 f'transform="rotate(-90 16 {(_MT + _H - _MB) / 2})">{ylabel}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
