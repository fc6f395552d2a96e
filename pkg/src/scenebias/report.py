"""Trait-index tables (CSV, aligned text) and grouped-bar SVG charts."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from xml.sax.saxutils import escape

from .rank import TraitIndices
from .xform import BLUR, LIGHT

__all__ = ["ReportRow", "format_percent", "amount_label", "table_csv", "table_text", "table_svg"]

TABLE_HEADER = ("detector", "kind", "amount", "top_F", "top_G", "top_H", "lowest_F", "lowest_G", "lowest_H")
_TOP_COLOURS = ("#1b7837", "#5aae61", "#a6dba0")
_LOW_COLOURS = ("#b2182b", "#ef8a62", "#fddbc7")


@dataclass(frozen=True)
class ReportRow:
    detector: str
    kind: str
    param: float
    top: TraitIndices
    lowest: TraitIndices

    @property
    def percentages(self) -> tuple[Fraction, ...]:
        return self.top.percentages() + self.lowest.percentages()


def format_percent(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"{float(value):.2f}".rstrip("0").rstrip(".")


def amount_label(kind: str, param: float) -> str:
    """Blur sigma as '2.0'; light factor 0.6 as reduction '40%'."""
    if kind == BLUR:
        return f"{param:.1f}"
    if kind == LIGHT:
        return f"{round((1.0 - param) * 100, 6):g}%"
    raise ValueError(f"unknown transformation kind {kind!r}")


def table_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TABLE_HEADER)
    for r in rows:
        writer.writerow([r.detector, r.kind, amount_label(r.kind, r.param)] + [format_percent(p) for p in r.percentages])
    return buf.getvalue()


def table_text(rows, kind: str, j: int) -> str:
    """Aligned grid: detector rows x amounts, top and lowest F G H side by side."""
    title = {BLUR: "Blur", LIGHT: "Light Reduct."}[kind]
    det_w = max([len(title), len("Detector")] + [len(r.detector) for r in rows]) + 2
    amt_w = max([len("Amount")] + [len(amount_label(r.kind, r.param)) for r in rows]) + 2
    cell = 6
    block = 3 * cell
    top_title = f"TOP {j}"
    low_title = f"LOWEST {j}"
    lines = [
        f"{title:<{det_w}}{'':<{amt_w}}{top_title:^{block}}  {low_title:^{block}}",
        f"{'Detector':<{det_w}}{'Amount':<{amt_w}}"
        + "".join(f"{c:>{cell}}" for c in "FGH") + "  " + "".join(f"{c:>{cell}}" for c in "FGH"),
    ]
    previous = None
    for r in rows:
        name = r.detector if r.detector != previous else ""
        previous = r.detector
        cells = [format_percent(p) for p in r.percentages]
        lines.append(
            f"{name:<{det_w}}{amount_label(r.kind, r.param):<{amt_w}}"
            + "".join(f"{c:>{cell}}" for c in cells[:3]) + "  "
            + "".join(f"{c:>{cell}}" for c in cells[3:])
        )
    return "\n".join(line.rstrip() for line in lines) + "\n"


def _num(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def table_svg(rows, kind: str, j: int) -> str:
    """Grouped bar chart: one group per (detector, amount), six bars per group."""
    bar_w, bar_gap, group_gap = 8, 1, 14
    group_w = 6 * bar_w + 5 * bar_gap + 6  # extra gap between top and lowest halves
    left, right, top, plot_h = 48, 16, 40, 200
    bottom = 70
    width = max(left + right + max(1, len(rows)) * (group_w + group_gap), left + right + 6 * 70)
    height = top + plot_h + bottom
    title = {BLUR: "Gaussian blur", LIGHT: "Uniform light reduction"}[kind]
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="10">',
        f'<text x="{left}" y="16" font-size="13">{escape(title)}: trait indices (%), top {j} vs lowest {j}</text>',
    ]
    for tick in (0, 25, 50, 75, 100):
        y = top + plot_h - plot_h * tick / 100
        out.append(f'<line x1="{left}" y1="{_num(y)}" x2="{width - right}" y2="{_num(y)}" stroke="#dddddd"/>')
        out.append(f'<text x="{left - 6}" y="{_num(y + 3)}" text-anchor="end">{tick}</text>')
    for g, r in enumerate(rows):
        x0 = left + g * (group_w + group_gap) + group_gap / 2
        for b, (pct, colour) in enumerate(zip(r.percentages, _TOP_COLOURS + _LOW_COLOURS)):
            x = x0 + b * (bar_w + bar_gap) + (6 if b >= 3 else 0)
            h = plot_h * float(pct) / 100
            series = ("top" if b < 3 else "lowest") + " " + "FGH"[b % 3]
            out.append(
                f'<rect x="{_num(x)}" y="{_num(top + plot_h - h)}" width="{bar_w}" height="{_num(h)}" '
                f'fill="{colour}"><title>{escape(r.detector)} {escape(amount_label(r.kind, r.param))} '
                f'{series}: {format_percent(pct)}</title></rect>'
            )
        cx = x0 + group_w / 2
        out.append(f'<text x="{_num(cx)}" y="{top + plot_h + 14}" text-anchor="middle">{escape(amount_label(r.kind, r.param))}</text>')
        out.append(f'<text x="{_num(cx)}" y="{top + plot_h + 28}" text-anchor="middle">{escape(r.detector)}</text>')
    ly = height - 18
    for i, (name, colour) in enumerate(zip(["top F", "top G", "top H", "lowest F", "lowest G", "lowest H"], _TOP_COLOURS + _LOW_COLOURS)):
        lx = left + i * 70
        out.append(f'<rect x="{lx}" y="{ly - 8}" width="10" height="10" fill="{colour}"/>')
        out.append(f'<text x="{lx + 14}" y="{ly + 1}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
