"""Self-contained SVG charts of the sweep aggregates.

Two line charts (RPE ratio and SSIM ratio versus cutoff frequency) mirror
the study's result layout: log-scaled x-axis, one series per node count
with a shaded 95% confidence band, and dashed vertical lines at each node
count's recoverable-frequency limit plus the unconstrained bound 0.5 in
gray. The files embed no external assets and carry stable element classes
("series", "ci-band", "nyquist-line") so they can be inspected
programmatically.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path

from .motion import nyquist_limit
from .sweep import SweepResult

__all__ = ["emit_plots", "render_chart"]

log = logging.getLogger(__name__)

WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 30, 40, 55
SERIES_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min(s * mag for s in (1, 2, 5, 10) if s * mag >= raw)
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12 * span:
        ticks.append(round(t, 12))
        t += step
    return ticks


def render_chart(
    series: dict[int, list[tuple[float, float, float]]],
    n_projections: int,
    title: str,
    y_label: str,
) -> str:
    """Build one SVG chart.

    `series` maps node count -> list of (f_c, mean, ci_half_width), sorted
    by f_c. Node counts with no points are skipped with a warning.
    """
    populated = {k: v for k, v in series.items() if v}
    for k in series:
        if k not in populated:
            log.warning("series for %d nodes is empty, skipping", k)
    if not populated:
        raise ValueError("no data to plot")

    xs = [p[0] for pts in populated.values() for p in pts]
    ys = [p[1] + s * p[2] for pts in populated.values() for p in pts for s in (-1, 1)]
    x_lo, x_hi = math.log10(min(xs)), math.log10(max(xs))
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    pad = 0.08 * (max(ys) - min(ys) or 1.0)
    y_lo, y_hi = min(ys) - pad, max(1.0, max(ys)) + pad
    y_lo = min(y_lo, 1.0 - pad)

    def sx(f: float) -> float:
        return MARGIN_L + (math.log10(f) - x_lo) / (x_hi - x_lo) * (
            WIDTH - MARGIN_L - MARGIN_R
        )

    def sy(v: float) -> float:
        return HEIGHT - MARGIN_B - (v - y_lo) / (y_hi - y_lo) * (
            HEIGHT - MARGIN_T - MARGIN_B
        )

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{title}</text>',
    ]

    # axes frame
    x0, x1 = MARGIN_L, WIDTH - MARGIN_R
    y0, y1 = HEIGHT - MARGIN_B, MARGIN_T
    parts.append(
        f'<path class="axis" d="M {x0} {y1} L {x0} {y0} L {x1} {y0}" '
        'fill="none" stroke="black" stroke-width="1"/>'
    )
    # log-decade x ticks
    for exp in range(math.floor(x_lo), math.ceil(x_hi) + 1):
        f = 10.0**exp
        if not (10**x_lo / 1.001 <= f <= 10**x_hi * 1.001):
            continue
        parts.append(
            f'<line class="tick" x1="{sx(f):.2f}" y1="{y0}" '
            f'x2="{sx(f):.2f}" y2="{y0 + 5}" stroke="black"/>'
            f'<text x="{sx(f):.2f}" y="{y0 + 20}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{f:g}</text>'
        )
    for tick in _nice_ticks(y_lo, y_hi):
        parts.append(
            f'<line class="tick" x1="{x0 - 5}" y1="{sy(tick):.2f}" '
            f'x2="{x0}" y2="{sy(tick):.2f}" stroke="black"/>'
            f'<text x="{x0 - 9}" y="{sy(tick) + 4:.2f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{tick:g}</text>'
        )
    parts.append(
        f'<text x="{(x0 + x1) / 2}" y="{HEIGHT - 14}" text-anchor="middle" '
        'font-family="sans-serif" font-size="13">'
        "cutoff frequency (fraction of sampling rate)</text>"
        f'<text x="20" y="{(y0 + y1) / 2}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13" '
        f'transform="rotate(-90 20 {(y0 + y1) / 2})">{y_label}</text>'
    )

    # recoverable-frequency limits per node count, plus the sampling bound
    limit_freqs = [
        (nyquist_limit(n_nodes, n_projections), SERIES_COLORS[i % len(SERIES_COLORS)])
        for i, n_nodes in enumerate(sorted(populated))
    ] + [(0.5, "#888888")]
    for f_limit, color in limit_freqs:
        if not (10**x_lo / 1.001 <= f_limit <= 10**x_hi * 1.001):
            continue
        parts.append(
            f'<line class="nyquist-line" x1="{sx(f_limit):.2f}" y1="{y1}" '
            f'x2="{sx(f_limit):.2f}" y2="{y0}" stroke="{color}" '
            'stroke-width="1" stroke-dasharray="6 4"/>'
        )

    for i, n_nodes in enumerate(sorted(populated)):
        pts = sorted(populated[n_nodes])
        color = SERIES_COLORS[i % len(SERIES_COLORS)]
        upper = [(sx(f), sy(m + c)) for f, m, c in pts]
        lower = [(sx(f), sy(m - c)) for f, m, c in reversed(pts)]
        band = " ".join(f"{px:.2f},{py:.2f}" for px, py in upper + lower)
        parts.append(
            f'<polygon class="ci-band" data-nodes="{n_nodes}" points="{band}" '
            f'fill="{color}" fill-opacity="0.15" stroke="none"/>'
        )
        line = " ".join(f"{sx(f):.2f},{sy(m):.2f}" for f, m, _ in pts)
        parts.append(
            f'<polyline class="series" data-nodes="{n_nodes}" points="{line}" '
            f'fill="none" stroke="{color}" stroke-width="1.8"/>'
        )
        parts.append(
            f'<text class="legend" x="{x1 - 8}" y="{y1 + 16 + 16 * i}" '
            f'text-anchor="end" font-family="sans-serif" font-size="12" '
            f'fill="{color}">{n_nodes} nodes</text>'
        )

    parts.append("</svg>")
    return "\n".join(parts)


def emit_plots(result: SweepResult, out_dir) -> list[Path]:
    """Write `rpe_ratio.svg` and `ssim_ratio.svg` under `out_dir`."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, title, y_label in (
        ("rpe_ratio", "Reprojection error after/before", "RPE ratio"),
        ("ssim_ratio", "SSIM after/before", "SSIM ratio"),
    ):
        series: dict[int, list[tuple[float, float, float]]] = {}
        for row in result.aggregates:
            series.setdefault(int(row["n_nodes"]), []).append(
                (row["f_c"], row[f"mean_{name}"], row[f"ci_{name}"])
            )
        svg = render_chart(series, result.n_projections, title, y_label)
        path = out_dir / f"{name}.svg"
        path.write_text(svg)
        written.append(path)
    return written
