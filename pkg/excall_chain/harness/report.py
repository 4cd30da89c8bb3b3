"""CSV rows and a text summary for experiment reports."""

import csv
import io
from collections import defaultdict
from pathlib import Path
from statistics import mean
from typing import Optional

from ..config import Implementation
from .experiment import ExperimentReport, RunResult

CSV_COLUMNS = ["impl", "initiators", "iterations", "repeat", "wall_ms", "blocks", "failed_txs"]


def csv_rows(report: ExperimentReport) -> list[dict]:
    return [
        {
            "impl": run.impl.value,
            "initiators": run.initiators,
            "iterations": run.iterations,
            "repeat": run.repeat,
            "wall_ms": round(run.wall_ms, 3),
            "blocks": run.blocks,
            "failed_txs": run.failed_txs,
        }
        for run in report.runs
    ]


def render_csv(report: ExperimentReport) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(csv_rows(report))
    return buffer.getvalue()


def _group(runs: list[RunResult]) -> dict[tuple, list[RunResult]]:
    groups: dict[tuple, list[RunResult]] = defaultdict(list)
    for run in runs:
        groups[(run.impl, run.initiators, run.iterations)].append(run)
    return groups


def ratios(report: ExperimentReport) -> dict[tuple[int, int], float]:
    """mean wall_ms of the external-call runs over the standard runs, per (initiators, iterations)."""
    groups = _group(report.runs)
    found = {}
    for (impl, initiators, iterations), runs in groups.items():
        if impl is not Implementation.EXCALL:
            continue
        standard = groups.get((Implementation.STANDARD, initiators, iterations))
        if standard:
            baseline = mean(run.wall_ms for run in standard)
            if baseline > 0:
                found[(initiators, iterations)] = mean(run.wall_ms for run in runs) / baseline
    return found


def summary_lines(report: ExperimentReport) -> list[str]:
    lines = []
    for (impl, initiators, iterations), runs in sorted(
        _group(report.runs).items(), key=lambda item: (item[0][1], item[0][2], item[0][0].value)
    ):
        times = [run.wall_ms for run in runs]
        label = f"{impl.value} initiators={initiators} iterations={iterations}"
        lines.append(f"{label} min wall_ms={min(times):.0f}")
        lines.append(f"{label} max wall_ms={max(times):.0f}")
        if not all(run.complete for run in runs):
            lines.append(f"{label} INCOMPLETE")
    for (initiators, iterations), ratio in sorted(ratios(report).items()):
        lines.append(f"ratio excall/standard initiators={initiators} iterations={iterations}: {ratio:.3f}")
    return lines


def emit_report(report: ExperimentReport, out: Optional[Path] = None) -> tuple[str, str]:
    """
    Render report as CSV and summary text, writing the CSV to out if given.

    Returns:
        (csv_text, summary_text). An empty report gives a header-only CSV.
    """
    text = render_csv(report)
    if out is not None:
        Path(out).write_text(text, encoding="utf-8")
    return text, "\n".join(summary_lines(report))
