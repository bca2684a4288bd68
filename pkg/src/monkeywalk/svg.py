"""Minimal self-contained SVG line plots (ECDF overlays and trend curves)."""
from __future__ import annotations

import math

import numpy as np

W, H = 560, 380
ML, MR, MT, MB = 64, 16, 34, 48
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    step = 10 ** math.floor(math.log10((hi - lo) / n))
    for m in (1, 2, 5, 10):
        if (hi - lo) / (step * m) <= n:
            step *= m
            break
    start = math.ceil(lo / step) * step
    return np.arange(start, hi + step / 2, step)


def line_plot(series, title="", xlabel="", ylabel="", logx=False):
    """series: list of (label, x, y); returns the SVG document as a string."""
    xs = np.concatenate([np.asarray(x, float) for _, x, _ in series])
    ys = np.concatenate([np.asarray(y, float) for _, _, y in series])
    tx = np.log10 if logx else (lambda v: np.asarray(v, float))
    xlo, xhi = float(tx(xs).min()), float(tx(xs).max())
    ylo, yhi = float(ys.min()), float(ys.max())
    if xhi == xlo:
        xlo, xhi = xlo - 1, xhi + 1
    if yhi == ylo:
        ylo, yhi = ylo - 1, yhi + 1
    pad = 0.05 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad

    def px(v):
        return ML + (tx(v) - xlo) / (xhi - xlo) * (W - ML - MR)

    def py(v):
        return H - MB - (np.asarray(v, float) - ylo) / (yhi - ylo) * (H - MT - MB)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'font-family="sans-serif" font-size="11">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2:.1f}" y="20" text-anchor="middle" font-size="13">{_esc(title)}</text>',
           f'<line x1="{ML}" y1="{H - MB}" x2="{W - MR}" y2="{H - MB}" stroke="black"/>',
           f'<line x1="{ML}" y1="{MT}" x2="{ML}" y2="{H - MB}" stroke="black"/>']
    for t in _ticks(xlo, xhi):
        x = ML + (t - xlo) / (xhi - xlo) * (W - ML - MR)
        lab = f"1e{t:g}" if logx else f"{t:g}"
        out.append(f'<line x1="{x:.1f}" y1="{H - MB}" x2="{x:.1f}" y2="{H - MB + 4}" stroke="black"/>')
        out.append(f'<text x="{x:.1f}" y="{H - MB + 16}" text-anchor="middle">{lab}</text>')
    for t in _ticks(ylo, yhi):
        y = float(py(t))
        out.append(f'<line x1="{ML - 4}" y1="{y:.1f}" x2="{ML}" y2="{y:.1f}" stroke="black"/>')
        out.append(f'<text x="{ML - 6}" y="{y + 4:.1f}" text-anchor="end">{t:.4g}</text>')
    out.append(f'<text x="{(ML + W - MR) / 2:.1f}" y="{H - 10}" text-anchor="middle">{_esc(xlabel)}</text>')
    out.append(f'<text x="14" y="{(MT + H - MB) / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {(MT + H - MB) / 2:.1f})">{_esc(ylabel)}</text>')
    for k, (label, x, y) in enumerate(series):
        c = COLORS[k % len(COLORS)]
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px(np.asarray(x, float)), py(y)))
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{W - MR - 4}" y="{MT + 14 * (k + 1)}" text-anchor="end" fill="{c}">'
                   f'{_esc(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def ecdf_series(label, sample, points=400):
    """Step ECDF thinned to at most ``points`` vertices."""
    x = np.sort(np.asarray(sample, float))
    n = x.size
    idx = np.unique(np.linspace(0, n - 1, min(points, n)).astype(int))
    return label, np.repeat(x[idx], 2)[1:], np.repeat((idx + 1) / n, 2)[:-1]


def ecdf_plot(samples, title=""):
    """samples: dict label -> 1-d array."""
    return line_plot([ecdf_series(k, v) for k, v in samples.items()], title, "x", "ECDF")


def _esc(s):
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
