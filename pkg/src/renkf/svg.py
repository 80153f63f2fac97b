"""Minimal SVG 1.1 line plots and heatmaps.

CSV is the canonical output; these are quick-look figures with no
plotting dependency.
"""

from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f4e79", "#d1495b", "#66a182", "#edae49", "#8d6a9f", "#00798c", "#555555")

_W, _H = 720, 300
_PAD = dict(left=60, right=20, top=30, bottom=40)


def _header(width, height):
    return [f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
            f'width="{width}" height="{height}" viewBox="0 0 {width} {height}" '
            f'font-family="sans-serif" font-size="11">',
            f'<rect width="{width}" height="{height}" fill="white"/>']


def _ticks(lo, hi, n=5):
    if hi == lo:
        return [lo]
    return list(np.linspace(lo, hi, n))


def _num(v):
    return f"{v:.4g}"


def line_plot(path, x, series, title="", xlabel="t [s]", ylabel="", vlines=(),
              max_points=2000):
    """One panel of line series.

    ``series`` maps a legend label to a y array (same length as ``x``);
    ``vlines`` are x positions drawn as dashed guides.  Long series are
    decimated to ``max_points`` for file size.
    """
    x = np.asarray(x, dtype=float)
    stride = max(1, int(np.ceil(x.size / max_points)))
    xs = x[::stride]
    ys = {k: np.asarray(v, dtype=float)[::stride] for k, v in series.items()}
    finite = np.concatenate([v[np.isfinite(v)] for v in ys.values()] or [np.zeros(1)])
    y_lo, y_hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    x_lo, x_hi = float(xs.min()), float(xs.max())
    if x_hi == x_lo:
        x_hi = x_lo + 1.0

    pw = _W - _PAD["left"] - _PAD["right"]
    ph = _H - _PAD["top"] - _PAD["bottom"]

    def px(v):
        return _PAD["left"] + (v - x_lo) / (x_hi - x_lo) * pw

    def py(v):
        return _PAD["top"] + (1.0 - (v - y_lo) / (y_hi - y_lo)) * ph

    out = _header(_W, _H)
    out.append(f'<text x="{_W / 2:.1f}" y="18" text-anchor="middle">{escape(title)}</text>')
    out.append(f'<rect x="{_PAD["left"]}" y="{_PAD["top"]}" width="{pw}" height="{ph}" '
               f'fill="none" stroke="#999"/>')
    for t in _ticks(x_lo, x_hi):
        out.append(f'<text x="{px(t):.1f}" y="{_H - _PAD["bottom"] + 14}" '
                   f'text-anchor="middle">{_num(t)}</text>')
    for t in _ticks(y_lo, y_hi):
        out.append(f'<text x="{_PAD["left"] - 4}" y="{py(t) + 4:.1f}" '
                   f'text-anchor="end">{_num(t)}</text>')
    out.append(f'<text x="{_W / 2:.1f}" y="{_H - 6}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="12" y="{_H / 2:.1f}" transform="rotate(-90 12 {_H / 2:.1f})" '
               f'text-anchor="middle">{escape(ylabel)}</text>')
    for v in vlines:
        if x_lo <= v <= x_hi:
            out.append(f'<line x1="{px(v):.1f}" x2="{px(v):.1f}" y1="{_PAD["top"]}" '
                       f'y2="{_PAD["top"] + ph}" stroke="#444" stroke-dasharray="4 3"/>')
    for i, (label, y) in enumerate(ys.items()):
        colour = PALETTE[i % len(PALETTE)]
        ok = np.isfinite(y)
        pts = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(xs[ok], y[ok]))
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1" points="{pts}"/>')
        ly = _PAD["top"] + 12 + 13 * i
        out.append(f'<line x1="{_W - 150}" x2="{_W - 130}" y1="{ly - 4}" y2="{ly - 4}" '
                   f'stroke="{colour}" stroke-width="2"/>')
        out.append(f'<text x="{_W - 125}" y="{ly}">{escape(label)}</text>')
    out.append("</svg>")
    _write(path, out)


def _colour(v, lo, hi):
    """Blue (low) to yellow (high); NaN is grey."""
    if not np.isfinite(v):
        return "#bbbbbb"
    s = 0.0 if hi == lo else (v - lo) / (hi - lo)
    s = min(max(s, 0.0), 1.0)
    r = int(30 + s * 220)
    g = int(60 + s * 170)
    b = int(140 - s * 110)
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap(path, values, row_labels, col_labels, title="", xlabel="", ylabel="",
            mark_min=True):
    """Cell grid of ``values`` (rows x cols) with the finite minimum starred."""
    values = np.asarray(values, dtype=float)
    n_r, n_c = values.shape
    cell = 56
    left, top = 70, 40
    width = left + n_c * cell + 20
    height = top + n_r * cell + 50
    finite = values[np.isfinite(values)]
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    out = _header(width, height)
    out.append(f'<text x="{width / 2:.1f}" y="18" text-anchor="middle">{escape(title)}</text>')
    for i in range(n_r):
        for j in range(n_c):
            v = values[i, j]
            x, y = left + j * cell, top + (n_r - 1 - i) * cell
            out.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                       f'fill="{_colour(v, lo, hi)}" stroke="white"/>')
            text = "fail" if not np.isfinite(v) else _num(v)
            out.append(f'<text x="{x + cell / 2}" y="{y + cell / 2 + 4}" '
                       f'text-anchor="middle">{text}</text>')
    if mark_min and finite.size:
        i, j = np.unravel_index(np.nanargmin(np.where(np.isfinite(values), values, np.nan)),
                                values.shape)
        x, y = left + j * cell + cell / 2, top + (n_r - 1 - i) * cell + 12
        out.append(f'<text x="{x}" y="{y}" text-anchor="middle" font-size="14" '
                   f'fill="white">&#9733;</text>')
    for j, lab in enumerate(col_labels):
        out.append(f'<text x="{left + j * cell + cell / 2}" y="{top + n_r * cell + 14}" '
                   f'text-anchor="middle">{escape(str(lab))}</text>')
    for i, lab in enumerate(row_labels):
        out.append(f'<text x="{left - 6}" y="{top + (n_r - 1 - i) * cell + cell / 2 + 4}" '
                   f'text-anchor="end">{escape(str(lab))}</text>')
    out.append(f'<text x="{left + n_c * cell / 2}" y="{height - 10}" '
               f'text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="14" y="{top + n_r * cell / 2}" '
               f'transform="rotate(-90 14 {top + n_r * cell / 2})" '
               f'text-anchor="middle">{escape(ylabel)}</text>')
    out.append("</svg>")
    _write(path, out)


def _write(path, lines):
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
