"""Deterministic report rendering for benchmark results.

Markdown tables follow the published layout: group, agent time/cost sums,
human time/cost sums, then the two ratios. Byte-stable output: same rows in,
same bytes out.
"""

from __future__ import annotations

from typing import Iterable

from .bench import BenchmarkRecord, MetricRow, floor_dollars, ratio, round_ratio

REPORT_COLUMNS = (
    "group",
    "t_cai_s",
    "c_cai_usd",
    "t_human_s",
    "c_human_usd",
    "t_ratio",
    "c_ratio",
    "solved",
    "pass@1",
)

GRID_CATEGORIES = ("misc", "rev", "pwn", "web", "forensics")


def _fmt_seconds(value: float | None) -> str:
    if value is None:
        return "-"
    return str(int(round(value)))


def _fmt_cost(value: float | None) -> str:
    if value is None:
        return "-"
    text = f"{value:.2f}".rstrip("0").rstrip(".")
    return text or "0"


def _fmt_human_cost(value: float | None) -> str:
    if value is None:
        return "-"
    return str(floor_dollars(value))


def _fmt_ratio(value: float | None) -> str:
    if value is None:
        return "-"
    return round_ratio(value)


def _cells(row: MetricRow) -> list[str]:
    return [
        row.group_key,
        _fmt_seconds(row.sum_t_cai),
        _fmt_cost(row.sum_c_cai),
        _fmt_seconds(row.sum_t_human),
        _fmt_human_cost(row.sum_c_human),
        _fmt_ratio(row.t_ratio),
        _fmt_ratio(row.c_ratio),
        f"{row.solved_count}/{row.record_count}",
        f"{row.pass_at_1:.2f}",
    ]


def render_report(rows: list[MetricRow], format: str = "markdown") -> str:
    if not rows:
        raise ValueError("rows must be nonempty")
    if format == "markdown":
        lines = [
            "| " + " | ".join(REPORT_COLUMNS) + " |",
            "|" + "|".join(" --- " for _ in REPORT_COLUMNS) + "|",
        ]
        lines += ["| " + " | ".join(_cells(row)) + " |" for row in rows]
        return "\n".join(lines) + "\n"
    if format == "csv":
        raw_rows = [
            [
                row.group_key,
                str(row.sum_t_cai),
                str(row.sum_c_cai),
                "" if row.sum_t_human is None else str(row.sum_t_human),
                "" if row.sum_c_human is None else str(row.sum_c_human),
                "" if row.t_ratio is None else str(row.t_ratio),
                "" if row.c_ratio is None else str(row.c_ratio),
                str(row.solved_count),
                f"{row.pass_at_1:.6f}",
            ]
            for row in rows
        ]
        header = ",".join(REPORT_COLUMNS)
        return "\n".join([header] + [",".join(cells) for cells in raw_rows]) + "\n"
    raise ValueError(f"unknown report format: {format!r}")


def render_model_grid(
    records: Iterable[BenchmarkRecord],
    categories: tuple[str, ...] = GRID_CATEGORIES,
) -> str:
    """Model-by-category markdown grid: solved counts, time sums over solved
    challenges, and per-category time ratios; one three-row block per model."""
    records = list(records)
    by_model: dict[str, list[BenchmarkRecord]] = {}
    for record in records:
        by_model.setdefault(record.model or "unknown", []).append(record)

    def total_solved(model: str) -> int:
        return sum(1 for r in by_model[model] if r.solved)

    models = sorted(by_model, key=lambda m: (-total_solved(m), m))
    header = ["model", "metric", *categories, "total", "cost_usd"]
    lines = [
        "| " + " | ".join(header) + " |",
        "|" + "|".join(" --- " for _ in header) + "|",
    ]
    for model in models:
        model_records = by_model[model]
        solved_cells: list[str] = []
        time_cells: list[str] = []
        ratio_cells: list[str] = []
        for category in categories:
            solved = [r for r in model_records if r.category == category and r.solved]
            solved_cells.append(str(len(solved)))
            if solved:
                t_sum = sum(r.t_cai_seconds for r in solved)
                time_cells.append(_fmt_seconds(t_sum))
                with_human = [r for r in solved if r.t_human_seconds is not None]
                if with_human and t_sum > 0:
                    human_sum = sum(r.t_human_seconds for r in with_human)
                    cai_sum = sum(r.t_cai_seconds for r in with_human)
                    ratio_cells.append(round_ratio(ratio(human_sum, cai_sum)) if cai_sum > 0 else "-")
                else:
                    ratio_cells.append("-")
            else:
                time_cells.append("-")
                ratio_cells.append("-")
        total_cost = sum(r.c_cai_dollars for r in model_records)
        lines.append(
            "| " + " | ".join([model, "ctfs_solved", *solved_cells, str(total_solved(model)), _fmt_cost(total_cost)]) + " |"
        )
        lines.append("| " + " | ".join(["", "t_cai_s", *time_cells, "-", "-"]) + " |")
        lines.append("| " + " | ".join(["", "t_ratio", *ratio_cells, "-", "-"]) + " |")
    return "\n".join(lines) + "\n"
