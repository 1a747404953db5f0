"""Multi-system comparison tables for the two audiobook metrics.

Higher is better for both metrics. The best value per metric is marked,
and the runner-up is marked second; ties share the best marker and leave
second vacant.
"""

from __future__ import annotations

from dataclasses import dataclass

from .metrics import EvalReport

METRIC_COLUMNS = (
    ("speaker_similarity", "Speaker Similarity"),
    ("turning_points", "Turning Points"),
)


@dataclass(frozen=True)
class MetricCell:
    value: float | None
    rank: str = ""  # "best" | "second" | ""


def _rank_metric(values: dict[str, float | None]) -> dict[str, MetricCell]:
    present = {name: v for name, v in values.items() if v is not None}
    cells = {name: MetricCell(value=v) for name, v in values.items()}
    if not present:
        return cells
    best_value = max(present.values())
    best_names = [name for name, v in present.items() if v == best_value]
    for name in best_names:
        cells[name] = MetricCell(value=present[name], rank="best")
    if len(best_names) == 1:
        rest = {name: v for name, v in present.items() if name not in best_names}
        if rest:
            second_value = max(rest.values())
            for name, v in rest.items():
                if v == second_value:
                    cells[name] = MetricCell(value=v, rank="second")
    return cells


def compare_report(reports: dict[str, EvalReport]) -> dict:
    """Rank systems per metric; returns a machine-readable structure."""
    if not reports:
        raise ValueError("compare_report needs at least one report")
    table: dict[str, dict[str, dict]] = {}
    for key, _label in METRIC_COLUMNS:
        values = {
            name: getattr(report, key) for name, report in reports.items()
        }
        ranked = _rank_metric(values)
        for name, cell in ranked.items():
            table.setdefault(name, {})[key] = {"value": cell.value, "rank": cell.rank}
    return {"systems": list(reports), "metrics": table}


def _format_value(value: float | None) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, int) or float(value).is_integer():
        return f"{int(value)}"
    return f"{value:.3f}".rstrip("0").rstrip(".")


def render_table(comparison: dict) -> str:
    """Plain-text table with [best] / [second] markers."""
    systems = comparison["systems"]
    metrics = comparison["metrics"]
    headers = ["System"] + [label for _key, label in METRIC_COLUMNS]
    rows = []
    for name in systems:
        row = [name]
        for key, _label in METRIC_COLUMNS:
            cell = metrics[name][key]
            text = _format_value(cell["value"])
            if cell["rank"] == "best":
                text += " [best]"
            elif cell["rank"] == "second":
                text += " [second]"
            row.append(text)
        rows.append(row)
    widths = [max(len(r[i]) for r in [headers] + rows) for i in range(len(headers))]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))
    return "\n".join(lines)
