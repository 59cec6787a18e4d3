"""Minimal dependency-free SVG renderings of the report artifacts.

The CSV files are the authoritative outputs; these renderings exist so a run
can be eyeballed without a plotting stack. All output is deterministic.
"""

import numpy as np

__all__ = ["heatmap_svg", "spectra_svg", "histogram_svg"]

_CELL_LIMIT = 200


def _provenance(config_hash: str, seed: int) -> str:
    return f"<!-- config_hash={config_hash} seed={int(seed)} -->"


def _downsample(M: np.ndarray, limit: int) -> np.ndarray:
    """Block-average so no side exceeds ``limit`` cells."""
    rows, cols = M.shape
    br = -(-rows // limit)
    bc = -(-cols // limit)
    if br == 1 and bc == 1:
        return M
    out_r = -(-rows // br)
    out_c = -(-cols // bc)
    out = np.empty((out_r, out_c))
    for i in range(out_r):
        for j in range(out_c):
            out[i, j] = M[i * br : (i + 1) * br, j * bc : (j + 1) * bc].mean()
    return out


def heatmap_svg(M, title: str, config_hash: str = "", seed: int = 0) -> str:
    M = np.asarray(M, dtype=float)
    D = _downsample(M, _CELL_LIMIT)
    rows, cols = D.shape
    lo, hi = float(D.min()), float(D.max())
    span = hi - lo if hi > lo else 1.0
    cell = max(2, 600 // max(rows, cols))
    w, h = cols * cell, rows * cell
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h + 20}" viewBox="0 0 {w} {h + 20}">',
        _provenance(config_hash, seed),
        f'<text x="2" y="12" font-size="11" font-family="monospace">{title}</text>',
        f'<g transform="translate(0,20)">',
    ]
    for i in range(rows):
        for j in range(cols):
            v = (D[i, j] - lo) / span
            shade = int(round(255 * (1.0 - v)))
            parts.append(
                f'<rect x="{j * cell}" y="{i * cell}" width="{cell}" height="{cell}" '
                f'fill="rgb({shade},{shade},{shade})"/>'
            )
    parts.append("</g></svg>")
    return "\n".join(parts)


def spectra_svg(spectra, title: str, config_hash: str = "", seed: int = 0) -> str:
    """Grouped bar chart: one group of singular-value bars per class."""
    spectra = [np.asarray(s, dtype=float) for s in spectra]
    hi = max((float(s.max()) for s in spectra if s.size), default=1.0)
    hi = hi if hi > 0 else 1.0
    bar_w, gap, plot_h = 6, 14, 220
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"]
    x = 4
    bars = []
    for ci, s in enumerate(spectra):
        color = colors[ci % len(colors)]
        for v in s:
            bh = int(round(plot_h * v / hi))
            bars.append(
                f'<rect x="{x}" y="{20 + plot_h - bh}" width="{bar_w}" height="{bh}" fill="{color}"/>'
            )
            x += bar_w + 1
        x += gap
    w = x + 4
    return "\n".join(
        [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{plot_h + 30}" viewBox="0 0 {w} {plot_h + 30}">',
            _provenance(config_hash, seed),
            f'<text x="2" y="12" font-size="11" font-family="monospace">{title} (max {hi:.4g})</text>',
            *bars,
            "</svg>",
        ]
    )


def histogram_svg(values, title: str, bins: int = 40, config_hash: str = "", seed: int = 0) -> str:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        counts, edges = np.zeros(1), np.array([0.0, 1.0])
    else:
        counts, edges = np.histogram(values, bins=bins)
    peak = float(counts.max()) if counts.max() > 0 else 1.0
    bar_w, plot_h = 12, 200
    w = bar_w * len(counts) + 8
    bars = []
    for i, c in enumerate(counts):
        bh = int(round(plot_h * c / peak))
        bars.append(
            f'<rect x="{4 + i * bar_w}" y="{20 + plot_h - bh}" width="{bar_w - 1}" height="{bh}" fill="#1f77b4"/>'
        )
    label = f"{title} [{edges[0]:.4g}, {edges[-1]:.4g}] n={values.size}"
    return "\n".join(
        [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{plot_h + 30}" viewBox="0 0 {w} {plot_h + 30}">',
            _provenance(config_hash, seed),
            f'<text x="2" y="12" font-size="11" font-family="monospace">{label}</text>',
            *bars,
            "</svg>",
        ]
    )
