"""Diagnostic tables: score-value distributions, failure rates, run summaries.

Rendering is deterministic (same inputs, same bytes) and comes in two
flavours: TSV for machines and Markdown for eyeballing. Distribution
percentages are shown with one decimal and are taken over the scored answers,
so the column always sums to 100.0 within rounding; failed and aborted
records appear in the totals but never in the value counts.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .errors import DataError
from .scoring import SegmentScoreRecord, aggregate_records, iter_run_tables, load_manifest


@dataclass(frozen=True)
class ScoreDistribution:
    variant: str
    counts: Mapping[int, int]  # value -> frequency, scored records only
    total: int  # all records, including failed

    @property
    def scored_total(self) -> int:
        return sum(self.counts.values())


@dataclass(frozen=True)
class FailureRow:
    invalid: int  # records that needed re-prompting (attempts > 1) or never parsed
    total: int


@dataclass(frozen=True)
class FailureTable:
    rows: Mapping[tuple[str, str], FailureRow]  # (variant, model) -> row


def distribution(records: Sequence[SegmentScoreRecord]) -> ScoreDistribution:
    """Frequency of each distinct scored value over records of one variant."""
    variants = {record.variant.name for record in records}
    if len(variants) > 1:
        raise DataError(f"records mix variants: {', '.join(sorted(variants))}")
    variant = variants.pop() if variants else ""
    counts = Counter(record.value for record in records if record.is_scored)
    return ScoreDistribution(variant=variant, counts=dict(counts), total=len(records))


def failure_table(run_dirs: Sequence[str | Path]) -> FailureTable:
    """Aggregate re-prompt counts per (variant, model) across run stores."""
    invalid: Counter[tuple[str, str]] = Counter()
    totals: Counter[tuple[str, str]] = Counter()
    for run_dir in run_dirs:
        for pair_code, variant_name, _system, records in iter_run_tables(run_dir):
            manifest = load_manifest(run_dir, pair_code, variant_name)
            model = (manifest or {}).get("backend", {}).get("model", "unknown")
            key = (variant_name, model)
            totals[key] += len(records)
            invalid[key] += sum(
                1 for r in records if r.attempts > 1 or r.status == "failed"
            )
    return FailureTable(
        rows={key: FailureRow(invalid[key], totals[key]) for key in sorted(totals)}
    )


def _percentage_rows(dist: ScoreDistribution) -> list[tuple[int, int, str]]:
    scored = dist.scored_total
    rows = []
    for value in sorted(dist.counts):
        count = dist.counts[value]
        percent = f"{100.0 * count / scored:.1f}" if scored else "0.0"
        rows.append((value, count, percent))
    return rows


def render_distribution(dist: ScoreDistribution, fmt: str = "tsv") -> str:
    if fmt == "md":
        lines = [
            f"### {dist.variant or 'answers'} ({dist.scored_total} scored / {dist.total} total)",
            "",
            "| Answer | Count | % |",
            "| ---: | ---: | ---: |",
        ]
        lines += [f"| {v} | {c} | {p}% |" for v, c, p in _percentage_rows(dist)]
        return "\n".join(lines) + "\n"
    lines = [f"# variant={dist.variant} scored={dist.scored_total} total={dist.total}"]
    lines.append("value\tcount\tpercent")
    lines += [f"{v}\t{c}\t{p}" for v, c, p in _percentage_rows(dist)]
    return "\n".join(lines) + "\n"


def _failure_cells(row: FailureRow) -> tuple[str, str]:
    if row.total == 0:
        return "0.0%", ""
    rate = 100.0 * row.invalid / row.total
    note = "<1%" if 0 < rate < 1.0 else ""
    return f"{rate:.1f}%", note


def render_failure_table(table: FailureTable, fmt: str = "tsv") -> str:
    if fmt == "md":
        lines = ["| Variant | Model | Invalid | Total | Rate |", "| --- | --- | ---: | ---: | ---: |"]
        for (variant, model), row in table.rows.items():
            rate, note = _failure_cells(row)
            cell = f"{rate} ({note})" if note else rate
            lines.append(f"| {variant} | {model} | {row.invalid} | {row.total} | {cell} |")
        return "\n".join(lines) + "\n"
    lines = ["variant\tmodel\tinvalid\ttotal\trate\tnote"]
    for (variant, model), row in table.rows.items():
        rate, note = _failure_cells(row)
        lines.append(f"{variant}\t{model}\t{row.invalid}\t{row.total}\t{rate}\t{note}")
    return "\n".join(lines) + "\n"


def render_run_summary(run_dir: str | Path, fmt: str = "tsv") -> str:
    """System-level means and outcome counts for every stored table."""
    rows = []
    for pair_code, variant_name, system, records in iter_run_tables(run_dir):
        score = aggregate_records(system, records)
        mean = f"{score.mean:.3f}" if score.scored_count else "nan"
        rows.append(
            (pair_code, variant_name, system, mean, score.scored_count, score.failed_count)
        )
    if fmt == "md":
        lines = [
            "| Pair | Variant | System | Mean | Scored | Failed |",
            "| --- | --- | --- | ---: | ---: | ---: |",
        ]
        lines += [f"| {p} | {v} | {s} | {m} | {sc} | {fc} |" for p, v, s, m, sc, fc in rows]
        return "\n".join(lines) + "\n"
    lines = ["pair\tvariant\tsystem\tmean\tscored\tfailed"]
    lines += [f"{p}\t{v}\t{s}\t{m}\t{sc}\t{fc}" for p, v, s, m, sc, fc in rows]
    return "\n".join(lines) + "\n"


def run_distributions(run_dir: str | Path) -> dict[str, ScoreDistribution]:
    """Pool records across pairs and systems, one distribution per variant."""
    by_variant: dict[str, list[SegmentScoreRecord]] = {}
    for _pair, variant_name, _system, records in iter_run_tables(run_dir):
        by_variant.setdefault(variant_name, []).extend(records)
    return {name: distribution(records) for name, records in sorted(by_variant.items())}
