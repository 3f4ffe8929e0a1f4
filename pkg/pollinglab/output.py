"""
Row rendering: CSV with a stable header and '.' decimals, or a fixed-width table.

The pretty format lays table1 / table3 out as switch-over rows by arrival-scv columns
and table2 as one row per (c2_A, I_A, I_B); simulated cells read mean±half-width.

Floats are written with 12 significant digits and no locale, so reruns with the
same config produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
import logging
import os
from pathlib import Path
from typing import Any, Optional, Sequence

from pollinglab.experiments import ExperimentResult

logger = logging.getLogger(__name__)


def format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.12g}"
    if isinstance(value, complex):
        return f"{value.real:.12g}{value.imag:+.12g}j"
    return str(value)


def _pretty_value(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.4f}" if abs(value) < 1e5 else f"{value:.4g}"
    return format_value(value)


def render_csv(result: ExperimentResult) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(result.columns)
    for row in result.rows:
        writer.writerow([format_value(row.get(column)) for column in result.columns])
    return buffer.getvalue()


EXACT_FOOTNOTE = "* exact value, not simulated"
VISIT_ORDER_TITLES = {"cyclic": "Cyclic", "longest-queue": "Longest queue"}


def _label(value: Any) -> str:
    return f"{value:g}" if isinstance(value, float) else format_value(value)


def _estimate(value: Optional[float], half_width: Optional[float], exact: Optional[float] = None) -> str:
    """mean±half-width for a simulated cell; exact values carry a '*'."""
    if value is None:
        return "" if exact is None else f"{exact:.4f}*"
    text = f"{value:.4f}" if half_width is None else f"{value:.4f}±{half_width:.4f}"
    return text if exact is None else f"{text} ({exact:.4f}*)"


def _unique(values: Sequence[Any]) -> list[Any]:
    return list(dict.fromkeys(values))


def _framed(
    title: str,
    header: Sequence[str],
    groups: Sequence[Sequence[Sequence[str]]],
    footnote: bool,
) -> str:
    body = [line for group in groups for line in group]
    widths = [max(len(line[k]) for line in [header, *body]) for k in range(len(header))]
    rule = "  ".join("-" * w for w in widths)

    def join(line: Sequence[str]) -> str:
        return "  ".join(v.rjust(w) for v, w in zip(line, widths)).rstrip()

    lines = [title, join(header), rule]
    for index, group in enumerate(groups):
        if index:
            lines.append(rule)
        lines.extend(join(line) for line in group)
    if footnote:
        lines.extend(["", EXACT_FOOTNOTE])
    return "\n".join(lines) + "\n"


def _pretty_symmetric_table(result: ExperimentResult) -> str:
    """Switch-over rows by arrival-scv columns, one cell per (S_i, c2_A)."""
    rows = result.rows
    scvs = _unique([row["arrival_scv"] for row in rows])
    cells = {(row["switchover"], row["arrival_scv"]): row for row in rows}
    body = []
    for switchover in _unique([row["switchover"] for row in rows]):
        line = [f"S_i={_label(switchover)}"]
        for scv in scvs:
            row = cells.get((switchover, scv))
            line.append(
                ""
                if row is None
                else _estimate(row.get("scv_sim"), row.get("scv_half_width"), row.get("scv_analytic"))
            )
        body.append(line)
    title = VISIT_ORDER_TITLES.get(rows[0].get("visit_order"), str(rows[0].get("visit_order")))
    header = ["", *(f"c2_A={_label(scv)}" for scv in scvs)]
    exact = any(row.get("scv_analytic") is not None for row in rows)
    return _framed(title, header, [body], exact)


def _pretty_table2(result: ExperimentResult) -> str:
    """One row per (c2_A, I_A, I_B), grouped by c2_A."""
    groups: dict[Any, list[list[str]]] = {}
    for row in result.rows:
        groups.setdefault(row["arrival_scv"], []).append(
            [
                _label(row["arrival_scv"]),
                _label(row["imbalance_arrival"]),
                _label(row["imbalance_service"]),
                _estimate(row.get("wait_scv_sim"), row.get("wait_scv_half_width")),
                _estimate(row.get("scv_sim"), row.get("scv_half_width"), row.get("scv_analytic")),
            ]
        )
    header = ["c2_A", "I_A", "I_B", "c2_W1", "c2_P"]
    exact = any(row.get("scv_analytic") is not None for row in result.rows)
    return _framed("Cyclic", header, list(groups.values()), exact)


PIVOTED_LAYOUTS = {
    "table1": _pretty_symmetric_table,
    "table2": _pretty_table2,
    "table3": _pretty_symmetric_table,
}


def render_pretty(result: ExperimentResult, columns: Optional[Sequence[str]] = None) -> str:
    """
    Fixed-width table; columns that are empty in every row are dropped.

    Table kinds get the grid layouts in PIVOTED_LAYOUTS unless columns are given.
    """
    layout = PIVOTED_LAYOUTS.get(result.kind)
    if columns is None and layout is not None and result.rows:
        return layout(result)
    chosen = list(columns) if columns is not None else [
        c for c in result.columns if any(row.get(c) is not None for row in result.rows)
    ]
    cells = [[_pretty_value(row.get(c)) for c in chosen] for row in result.rows]
    widths = [max([len(c)] + [len(line[k]) for line in cells]) for k, c in enumerate(chosen)]
    lines = [
        "  ".join(c.rjust(w) for c, w in zip(chosen, widths)),
        "  ".join("-" * w for w in widths),
    ]
    lines.extend("  ".join(v.rjust(w) for v, w in zip(line, widths)) for line in cells)
    return "\n".join(lines) + "\n"


def render(result: ExperimentResult, output_format: str) -> str:
    if output_format == "csv":
        return render_csv(result)
    if output_format == "pretty":
        return render_pretty(result)
    raise ValueError(f"unknown output format: {output_format!r}")


def write_output(text: str, path: Optional[str]) -> Optional[Path]:
    """Write text to path (parents created) atomically; None writes nothing and returns None."""
    if path is None:
        return None
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    temp = target.with_name(target.name + ".tmp")
    temp.write_text(text, encoding="utf-8", newline="")
    os.replace(temp, target)
    logger.info("Wrote output", extra={"path": str(target), "bytes": len(text)})
    return target
