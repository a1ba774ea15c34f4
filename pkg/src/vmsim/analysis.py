"""Aggregation of batch results and deterministic report rendering.

Groups successful result rows by controller combination, computes means and
population standard deviations of the headline metrics, and renders a
markdown or self-contained HTML report, optionally with a horizontal bar
chart of mean active-server demand (plain SVG, no plotting dependency, so
identical input yields identical bytes).
"""

from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass

from vmsim.runner import CSV_HEADER

GROUP_KEY = ("initial_placement", "reallocation", "placement", "estimator")


class AnalysisError(Exception):
    pass


class EmptyInput(AnalysisError):
    pass


class HeaderMismatch(AnalysisError):
    pass


@dataclass(frozen=True)
class AggregateRow:
    initial_placement: str
    reallocation: str
    placement: str
    estimator: str
    n: int
    mean_active_servers: float
    sd_active_servers: float
    mean_cpu_util_pct: float
    sd_cpu_util_pct: float
    mean_sla_violation_rate: float
    sd_sla_violation_rate: float
    migrations_total: int

    @property
    def key(self) -> tuple[str, str, str, str]:
        return (self.initial_placement, self.reallocation, self.placement,
                self.estimator)


def read_results_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise HeaderMismatch(f"unexpected header {header!r}")
        return [dict(zip(CSV_HEADER, row)) for row in reader]


def aggregate(rows) -> list[AggregateRow]:
    """Group success rows by controller combination.

    Rows with status other than 'ok' are excluded; the result is sorted by
    mean active-server demand ascending (the efficiency ranking), with the
    group key as tie-break.
    """
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        if row.get("status") != "ok":
            continue
        key = tuple(row[k] for k in GROUP_KEY)
        groups.setdefault(key, []).append(row)
    if not groups:
        raise EmptyInput("no successful result rows to aggregate")

    def stats(values):
        return (statistics.fmean(values),
                statistics.pstdev(values) if len(values) > 1 else 0.0)

    out = []
    for key, members in groups.items():
        servers = [float(m["avg_active_servers"]) for m in members]
        util = [float(m["avg_cpu_util_pct"]) for m in members]
        sla = [float(m["sla_violation_rate"]) for m in members]
        mean_srv, sd_srv = stats(servers)
        mean_util, sd_util = stats(util)
        mean_sla, sd_sla = stats(sla)
        out.append(AggregateRow(
            initial_placement=key[0], reallocation=key[1], placement=key[2],
            estimator=key[3], n=len(members),
            mean_active_servers=mean_srv, sd_active_servers=sd_srv,
            mean_cpu_util_pct=mean_util, sd_cpu_util_pct=sd_util,
            mean_sla_violation_rate=mean_sla, sd_sla_violation_rate=sd_sla,
            migrations_total=sum(int(m["migration_count"]) for m in members),
        ))
    out.sort(key=lambda r: (r.mean_active_servers, r.key))
    return out


_COLUMNS = [
    ("initial", lambda r: r.initial_placement),
    ("reallocation", lambda r: r.reallocation),
    ("placement", lambda r: r.placement),
    ("estimator", lambda r: r.estimator),
    ("n", lambda r: str(r.n)),
    ("servers_mean", lambda r: f"{r.mean_active_servers:.4f}"),
    ("servers_sd", lambda r: f"{r.sd_active_servers:.4f}"),
    ("util_mean", lambda r: f"{r.mean_cpu_util_pct:.4f}"),
    ("util_sd", lambda r: f"{r.sd_cpu_util_pct:.4f}"),
    ("sla_mean", lambda r: f"{r.mean_sla_violation_rate:.4f}"),
    ("sla_sd", lambda r: f"{r.sd_sla_violation_rate:.4f}"),
    ("migrations", lambda r: str(r.migrations_total)),
]


def render_svg(rows) -> str:
    """Horizontal bar chart of mean active servers per combination."""
    bar_h, gap, label_w, chart_w = 18, 6, 340, 280
    width = label_w + chart_w + 60
    height = (bar_h + gap) * len(rows) + gap
    peak = max(r.mean_active_servers for r in rows) or 1.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="monospace" font-size="11">'
    ]
    for i, row in enumerate(rows):
        y = gap + i * (bar_h + gap)
        label = "/".join(row.key)
        w = row.mean_active_servers / peak * chart_w
        parts.append(f'<text x="4" y="{y + 13}">{label}</text>')
        parts.append(f'<rect x="{label_w}" y="{y}" width="{w:.2f}" '
                     f'height="{bar_h}" fill="#4878a8"/>')
        parts.append(f'<text x="{label_w + w + 4:.2f}" y="{y + 13}">'
                     f'{row.mean_active_servers:.3f}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_report(rows, fmt: str = "markdown", svg_document: str | None = None,
                  svg_filename: str | None = None) -> str:
    """Render the aggregate table; deterministic for identical input.

    For HTML the chart is inlined when ``svg_document`` is given; markdown
    references ``svg_filename`` instead, since markdown cannot embed SVG.
    """
    if not rows:
        raise EmptyInput("nothing to render")
    if fmt == "markdown":
        header = "| " + " | ".join(name for name, _ in _COLUMNS) + " |"
        rule = "|" + "|".join(" --- " for _ in _COLUMNS) + "|"
        lines = ["# Simulation results", "", header, rule]
        for row in rows:
            lines.append("| " + " | ".join(fn(row) for _, fn in _COLUMNS) + " |")
        if svg_filename:
            lines += ["", f"![Mean active servers]({svg_filename})"]
        return "\n".join(lines) + "\n"
    if fmt == "html":
        cells = "".join(f"<th>{name}</th>" for name, _ in _COLUMNS)
        body = [f"<tr>{cells}</tr>"]
        for row in rows:
            cells = "".join(f"<td>{fn(row)}</td>" for _, fn in _COLUMNS)
            body.append(f"<tr>{cells}</tr>")
        table = "<table>\n" + "\n".join(body) + "\n</table>"
        chart = ("\n" + svg_document) if svg_document else ""
        return ("<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">"
                "<title>Simulation results</title></head>\n<body>\n"
                "<h1>Simulation results</h1>\n" + table + chart + "\n</body></html>\n")
    raise ValueError(f"unknown report format {fmt!r}")
