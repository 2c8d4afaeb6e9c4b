"""Report serialization: per-bin CSV, Markdown summaries, plot-data CSV, and
learning-curve CSV.  All output is deterministic byte-for-byte for a fixed
report (sorted keys, fixed float formatting, "\\n" newlines)."""

from __future__ import annotations

import json
from pathlib import Path

from .logic import RELATIONS
from .training import BaselineReport, EvalReport


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def report_csv_text(report: EvalReport) -> str:
    """Rows = bins; marks which bins were inside the training cutoff."""
    lines = ["bin,count,accuracy,seen_in_training"]
    for b in sorted(report.per_bin_counts):
        seen = int(report.cutoff is not None and b <= report.cutoff)
        lines.append(
            f"{b},{report.per_bin_counts[b]},{_fmt(report.per_bin_accuracy[b])},{seen}"
        )
    lines.append(f"overall,{sum(report.per_bin_counts.values())},{_fmt(report.overall_accuracy)},")
    lines.append(f"train,,{_fmt(report.train_accuracy)},")
    return "\n".join(lines) + "\n"


def plot_csv_text(report: EvalReport) -> str:
    """(bin, accuracy, cutoff) rows for external plotting of accuracy-by-bin
    curves with a training-cutoff marker."""
    cutoff = "" if report.cutoff is None else str(report.cutoff)
    lines = ["bin,accuracy,cutoff"]
    for b in sorted(report.per_bin_accuracy):
        lines.append(f"{b},{_fmt(report.per_bin_accuracy[b])},{cutoff}")
    return "\n".join(lines) + "\n"


def grid_csv_text(reports: list[EvalReport]) -> str:
    """Rows = bins, one accuracy column per model report."""
    if not reports:
        raise ValueError("need at least one report")
    bins = sorted({b for r in reports for b in r.per_bin_accuracy})
    header = "bin," + ",".join(
        f"{r.model_kind}_cutoff{r.cutoff}" if r.cutoff is not None else r.model_kind
        for r in reports
    )
    lines = [header]
    for b in bins:
        cells = [
            _fmt(r.per_bin_accuracy[b]) if b in r.per_bin_accuracy else ""
            for r in reports
        ]
        lines.append(f"{b}," + ",".join(cells))
    lines.append(
        "overall," + ",".join(_fmt(r.overall_accuracy) for r in reports)
    )
    return "\n".join(lines) + "\n"


def curve_csv_text(points: list[tuple[int, float]]) -> str:
    lines = ["size,accuracy"]
    for size, acc in points:
        lines.append(f"{size},{_fmt(acc)}")
    return "\n".join(lines) + "\n"


def confusion_markdown(report: EvalReport) -> str:
    labels = [r.label for r in RELATIONS]
    lines = ["| gold \\ predicted | " + " | ".join(labels) + " |"]
    lines.append("|---" * (len(labels) + 1) + "|")
    for i, row in enumerate(report.confusion):
        lines.append(f"| {labels[i]} | " + " | ".join(str(c) for c in row) + " |")
    return "\n".join(lines)


def report_markdown_text(report: EvalReport, baseline: BaselineReport | None = None) -> str:
    """Human-readable summary with the full resolved configuration."""
    lines = [f"# {report.model_kind} (training bins 0..{report.cutoff})", ""]
    lines.append("## Configuration")
    lines.append("```json")
    lines.append(json.dumps(report.config, sort_keys=True, indent=2))
    lines.append("```")
    lines.append("")
    lines.append("## Accuracy by bin")
    lines.append("")
    header = "| bin | examples | accuracy |"
    if baseline is not None:
        header += " most-frequent baseline |"
    lines.append(header)
    lines.append("|---|---|---|" + ("---|" if baseline is not None else ""))
    for b in sorted(report.per_bin_counts):
        row = f"| {b} | {report.per_bin_counts[b]} | {_fmt(report.per_bin_accuracy[b])} |"
        if baseline is not None:
            row += f" {_fmt(baseline.per_bin_accuracy.get(b, 0.0))} |"
        lines.append(row)
    lines.append("")
    lines.append(f"- overall accuracy (bins 1-12): {_fmt(report.overall_accuracy)}")
    lines.append(f"- training accuracy: {_fmt(report.train_accuracy)}")
    if report.bin0_accuracy is not None:
        lines.append(
            f"- bin 0 (excluded from aggregates): {_fmt(report.bin0_accuracy)} "
            f"over {report.bin0_count} examples"
        )
    if baseline is not None:
        lines.append(
            f"- most-frequent baseline: predicts {baseline.majority.label!r}, "
            f"overall {_fmt(baseline.overall_accuracy)}"
        )
    if report.history:
        lines.append(
            f"- training loss: {_fmt(report.history[0])} (epoch 1) -> "
            f"{_fmt(report.history[-1])} (epoch {len(report.history)})"
        )
    lines.append("")
    lines.append("## Confusion (test bins 1-12)")
    lines.append("")
    lines.append(confusion_markdown(report))
    lines.append("")
    return "\n".join(lines)


def write_text(path: str | Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def dataset_stats_markdown(
    config_echo: dict,
    train_bin_counts: dict[int, int],
    test_bin_counts: dict[int, int],
    class_counts: dict,
    majority_share: float,
) -> str:
    lines = ["# Dataset statistics", ""]
    lines.append("## Configuration")
    lines.append("```json")
    lines.append(json.dumps(config_echo, sort_keys=True, indent=2))
    lines.append("```")
    lines.append("")
    lines.append("## Examples per bin")
    lines.append("")
    lines.append("| bin | train | test |")
    lines.append("|---|---|---|")
    for b in sorted(set(train_bin_counts) | set(test_bin_counts)):
        lines.append(f"| {b} | {train_bin_counts.get(b, 0)} | {test_bin_counts.get(b, 0)} |")
    lines.append("")
    lines.append("## Relation distribution (train + test)")
    lines.append("")
    lines.append("| relation | count |")
    lines.append("|---|---|")
    for relation in RELATIONS:
        lines.append(f"| {relation.label} | {class_counts[relation]} |")
    lines.append("")
    lines.append(f"- majority class share: {_fmt(majority_share)}")
    lines.append("")
    return "\n".join(lines)
