"""Static outputs: CSV tables, an SVG chart of rho(k), a markdown summary."""
from __future__ import annotations

import csv
import io
import math
from html import escape
from typing import Sequence

from .atlas import RhoPoint

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def csv_text(header_comment: str, columns: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(f"# {header_comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow(["" if v is None else _cell(v) for v in row])
    return buf.getvalue()


def _cell(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def read_csv(text: str) -> tuple[str, list[dict]]:
    lines = text.splitlines()
    comment = lines[0][2:] if lines and lines[0].startswith("# ") else ""
    body = lines[1:] if comment else lines
    return comment, list(csv.DictReader(body))


def rho_svg(series: dict[str, list[RhoPoint]], title: str = "integrability fraction", desc: str = "") -> str:
    """Line chart with binomial error bars, one series per basis."""
    W, H = 640, 400
    left, right, top, bottom = 60, 150, 40, 50
    pw, ph = W - left - right, H - top - bottom
    pts = [p for s in series.values() for p in s if p.n_total]
    kmax = max((p.k for p in pts), default=1)
    ymax = max((p.rho + p.rho_err for p in pts), default=0.0)
    ymax = max(0.05, math.ceil(ymax * 20) / 20)

    def sx(k: float) -> float:
        return left + (k - 1) / max(kmax - 1, 1) * pw

    def sy(v: float) -> float:
        return top + ph - v / ymax * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" '
           'font-family="sans-serif" font-size="12">',
           f"<title>{escape(title)}</title>"]
    if desc:
        out.append(f"<desc>{escape(desc)}</desc>")
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>')
    nticks = int(round(ymax / 0.05))
    step = 1 if nticks <= 8 else 2
    for i in range(0, nticks + 1, step):
        v = i * 0.05
        y = sy(v)
        out.append(f'<line x1="{left - 4}" y1="{y:.1f}" x2="{left}" y2="{y:.1f}" stroke="#444"/>')
        out.append(f'<text x="{left - 8}" y="{y + 4:.1f}" text-anchor="end">{v:.2f}</text>')
    for k in range(1, kmax + 1):
        x = sx(k)
        out.append(f'<line x1="{x:.1f}" y1="{top + ph}" x2="{x:.1f}" y2="{top + ph + 4}" stroke="#444"/>')
        out.append(f'<text x="{x:.1f}" y="{top + ph + 18}" text-anchor="middle">{k}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{H - 10}" text-anchor="middle">complexity k</text>')
    out.append(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2:.1f})">rho(k)</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="24" text-anchor="middle" font-size="14">{escape(title)}</text>')
    for i, (name, points) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = [p for p in points if p.n_total]
        path = " ".join(f"{sx(p.k):.1f},{sy(p.rho):.1f}" for p in pts)
        out.append(f'<g class="series" stroke="{color}" fill="{color}">')
        if path:
            out.append(f'<polyline points="{path}" fill="none" stroke-width="2"/>')
        for p in pts:
            x = sx(p.k)
            lo, hi = sy(max(p.rho - p.rho_err, 0.0)), sy(p.rho + p.rho_err)
            out.append(f'<line x1="{x:.1f}" y1="{lo:.1f}" x2="{x:.1f}" y2="{hi:.1f}"/>')
            out.append(f'<line x1="{x - 3:.1f}" y1="{lo:.1f}" x2="{x + 3:.1f}" y2="{lo:.1f}"/>')
            out.append(f'<line x1="{x - 3:.1f}" y1="{hi:.1f}" x2="{x + 3:.1f}" y2="{hi:.1f}"/>')
            out.append(f'<circle cx="{x:.1f}" cy="{sy(p.rho):.1f}" r="3"/>')
        ly = top + 16 + 18 * i
        out.append(f'<line x1="{left + pw + 12}" y1="{ly}" x2="{left + pw + 32}" y2="{ly}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 38}" y="{ly + 4}" stroke="none">{escape(name)}</text>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def markdown_table(columns: Sequence[str], rows: Sequence[Sequence]) -> str:
    lines = ["| " + " | ".join(columns) + " |", "|" + "---|" * len(columns)]
    for row in rows:
        lines.append("| " + " | ".join(_md(v) for v in row) + " |")
    return "\n".join(lines)


def _md(v) -> str:
    if isinstance(v, float):
        return "n/a" if math.isnan(v) else f"{v:.4g}"
    return str(v).replace("|", "\\|")
