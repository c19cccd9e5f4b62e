"""Minimal self-contained SVG line charts for result files."""

from __future__ import annotations

from html import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f")


def line_chart(path, series: dict, title: str = "", xlabel: str = "", ylabel: str = "",
               width: int = 640, height: int = 400) -> None:
    """Write ``series`` (name -> (xs, ys)) as a polyline chart."""
    pad_l, pad_r, pad_t, pad_b = 60, 20, 30, 45
    xs = [x for v in series.values() for x in v[0]]
    ys = [y for v in series.values() for y in v[1]]
    x0, x1 = (min(xs), max(xs)) if xs else (0.0, 1.0)
    y0, y1 = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b

    def sx(x):
        return pad_l + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return pad_t + ph - (y - y0) / (y1 - y0) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
        f'<rect x="{pad_l}" y="{pad_t}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>',
        f'<text x="{width / 2}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<text x="{pad_l + pw / 2}" y="{height - 8}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="14" y="{pad_t + ph / 2}" text-anchor="middle" transform="rotate(-90 14 {pad_t + ph / 2})">{escape(ylabel)}</text>',
        f'<text x="{pad_l}" y="{height - 28}" text-anchor="middle">{x0:.3g}</text>',
        f'<text x="{pad_l + pw}" y="{height - 28}" text-anchor="middle">{x1:.3g}</text>',
        f'<text x="{pad_l - 4}" y="{pad_t + ph}" text-anchor="end">{y0:.3g}</text>',
        f'<text x="{pad_l - 4}" y="{pad_t + 10}" text-anchor="end">{y1:.3g}</text>',
    ]
    for k, (name, (sxs, sys_)) in enumerate(series.items()):
        colour = PALETTE[k % len(PALETTE)]
        points = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in zip(sxs, sys_))
        parts.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{points}"/>')
        if len(series) <= 8:
            parts.append(f'<text x="{pad_l + pw - 4}" y="{pad_t + 14 + 13 * k}" text-anchor="end" '
                         f'fill="{colour}">{escape(str(name))}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
