"""Static SVG of eigenvalue branches against t, written by hand for byte stability."""
from __future__ import annotations

import numpy as np

WIDTH, HEIGHT = 800, 500
MARGIN = 60
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
          "#bcbd22", "#17becf")


def _fmt(v):
    return f"{v:.2f}"


def sweep_svg(report):
    """One polyline per branch, the zero line, and a vertical rule at each critical value.

    The vertical range is clipped to ``[min lambda, max(0, lambda_k(b)) + span]``
    because branches blow up as the domain shrinks.
    """
    ts = np.array([s.t for s in report.samples])
    lam = np.array([s.eigenvalues for s in report.samples], dtype=np.float64)
    finite = lam[np.isfinite(lam)]
    t0, t1 = report.t_range
    final = lam[-1][np.isfinite(lam[-1])]
    y_lo = float(min(finite.min(), 0.0)) if finite.size else -1.0
    top = float(max(final.max(), 0.0)) if final.size else 1.0
    y_hi = top + max(top - y_lo, 1.0)
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad
    w, h = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def X(t):
        return MARGIN + w * (t - t0) / (t1 - t0)

    def Y(v):
        return MARGIN + h * (y_hi - np.clip(v, y_lo, y_hi)) / (y_hi - y_lo)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{w}" height="{h}" fill="none" stroke="black"/>',
    ]
    for tj in report.catalog_values:
        if t0 <= tj <= t1:
            x = _fmt(X(tj))
            out.append(f'<line x1="{x}" y1="{MARGIN}" x2="{x}" y2="{MARGIN + h}" stroke="#999" stroke-dasharray="4 3"/>')
    if y_lo <= 0.0 <= y_hi:
        y = _fmt(Y(0.0))
        out.append(f'<line x1="{MARGIN}" y1="{y}" x2="{MARGIN + w}" y2="{y}" stroke="black" stroke-width="1.5"/>')
    for i in range(lam.shape[1]):
        ok = np.isfinite(lam[:, i])
        if ok.sum() < 2:
            continue
        pts = " ".join(f"{_fmt(X(t))},{_fmt(Y(v))}" for t, v in zip(ts[ok], lam[ok, i]))
        color = COLORS[i % len(COLORS)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')
        out.append(f'<text x="{WIDTH - MARGIN + 5}" y="{_fmt(Y(lam[ok, i][-1]) + 4)}" font-size="11" fill="{color}">'
                   f"&#955;{i + 1}</text>")
    out.append(f'<text x="{MARGIN}" y="{HEIGHT - 20}" font-size="12">t = {t0:.4g}</text>')
    out.append(f'<text x="{MARGIN + w}" y="{HEIGHT - 20}" font-size="12" text-anchor="end">t = {t1:.4g}</text>')
    out.append(f'<text x="{MARGIN - 5}" y="{MARGIN + 4}" font-size="12" text-anchor="end">{y_hi:.3g}</text>')
    out.append(f'<text x="{MARGIN - 5}" y="{MARGIN + h + 4}" font-size="12" text-anchor="end">{y_lo:.3g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
