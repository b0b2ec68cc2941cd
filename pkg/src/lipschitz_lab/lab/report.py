"""CSV tables, SVG line plots and the verdict summary."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from xml.sax.saxutils import escape

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, columns, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in columns])
    return path


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    step = 10 ** math.floor(math.log10((hi - lo) / n))
    for m in (1, 2, 5, 10):
        if (hi - lo) / (step * m) <= n:
            step *= m
            break
    t = math.ceil(lo / step) * step
    out = []
    while t <= hi + 1e-12 * step:
        out.append(round(t, 12))
        t += step
    return out


def svg_line_plot(path, series: dict, xlabel="x", ylabel="y", title="", width=640, height=420) -> Path:
    """Polyline plot of named (xs, ys) series with labeled axes."""
    L, R, T, B = 70, 20, 40, 55
    xs = [x for s in series.values() for x in s[0]]
    ys = [y for s in series.values() for y in s[1]]
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    pad = 0.05 * (y1 - y0 or 1.0)
    y0, y1 = y0 - pad, y1 + pad
    px = lambda x: L + (x - x0) / (x1 - x0) * (width - L - R)
    py = lambda y: height - B - (y - y0) / (y1 - y0) * (height - T - B)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="15" font-family="sans-serif">{escape(title)}</text>',
        f'<line x1="{L}" y1="{height - B}" x2="{width - R}" y2="{height - B}" stroke="black"/>',
        f'<line x1="{L}" y1="{T}" x2="{L}" y2="{height - B}" stroke="black"/>',
    ]
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{px(t):.2f}" y1="{height - B}" x2="{px(t):.2f}" y2="{height - B + 5}" stroke="black"/>')
        out.append(f'<text x="{px(t):.2f}" y="{height - B + 18}" text-anchor="middle" font-size="11" '
                   f'font-family="sans-serif">{t:g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{L - 5}" y1="{py(t):.2f}" x2="{L}" y2="{py(t):.2f}" stroke="black"/>')
        out.append(f'<text x="{L - 8}" y="{py(t) + 4:.2f}" text-anchor="end" font-size="11" '
                   f'font-family="sans-serif">{t:g}</text>')
    out.append(f'<text x="{(L + width - R) / 2:.1f}" y="{height - 12}" text-anchor="middle" font-size="13" '
               f'font-family="sans-serif">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{(T + height - B) / 2:.1f}" text-anchor="middle" font-size="13" font-family="sans-serif" '
               f'transform="rotate(-90 16 {(T + height - B) / 2:.1f})">{escape(ylabel)}</text>')
    for i, (name, (sx, sy)) in enumerate(series.items()):
        c = COLORS[i % len(COLORS)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(sx, sy))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{c}" stroke-width="2"/>')
        for x, y in zip(sx, sy):
            out.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" fill="{c}"/>')
        ly = T + 8 + 16 * i
        out.append(f'<line x1="{width - R - 150}" y1="{ly}" x2="{width - R - 130}" y2="{ly}" stroke="{c}" stroke-width="2"/>')
        out.append(f'<text x="{width - R - 125}" y="{ly + 4}" font-size="11" font-family="sans-serif">{escape(name)}</text>')
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n")
    return path


def write_summary(path, results) -> Path:
    """One line per check: suite, check, verdict, detail."""
    lines = []
    for res in results:
        for c in res.checks:
            lines.append(f"{res.name}\t{c.name}\t{c.verdict}\t{c.detail}")
    n_fail = sum(c.verdict == "fail" for r in results for c in r.checks)
    n_skip = sum(c.verdict == "skipped" for r in results for c in r.checks)
    n_pass = sum(c.verdict == "pass" for r in results for c in r.checks)
    lines.append(f"total\tpass={n_pass}\tfail={n_fail}\tskipped={n_skip}")
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def emit_report(results, outdir) -> list[Path]:
    """Write every table and plot of the results plus summary.txt; returns the paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for res in results:
        for name, (columns, rows) in sorted(res.tables.items()):
            paths.append(write_csv(outdir / f"{name}.csv", columns, rows))
        for name, spec in sorted(res.plots.items()):
            paths.append(svg_line_plot(outdir / f"{name}.svg", **spec))
    paths.append(write_summary(outdir / "summary.txt", results))
    return paths
