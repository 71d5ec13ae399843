"""Correlate metric output with human gold judgments.

System level: pairwise ranking accuracy, the fraction of system pairs whose
metric ordering agrees in sign with the human ordering. Pairs the humans
tied on are excluded from numerator and denominator; a metric tie against a
human preference counts as incorrect. Across language pairs, counts are
pooled by default (systems are only ever compared within their own pair).

Segment level: Kendall's tau over same-segment cross-system comparison
pairs, in the three historical tie treatments:

* ``tau_a_2011``  - gold-tied pairs dropped, metric ties penalized as
  discordant: (C - D - Tm) / (C + D + Tm);
* ``ties_2014``   - gold-tied pairs dropped, metric ties kept in the
  denominator only: (C - D) / (C + D + Tm);
* ``tau_b``       - (C - D) / sqrt((C + D + Tm) * (C + D + Tg)), pairs tied
  on both sides contributing to neither tie count. This is the default.

Pair classification never touches floating point: each comparison group is
rank-encoded by exact value comparison (gold scores arrive as decimals read
verbatim from file), and the integer counts come from a compiled kernel with
a pure-numpy fallback (see ``_kernels``).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ._kernels import count_pairs
from .corpus import EvalSet
from .errors import (
    DataError,
    EmptyIntersection,
    KeySetMismatch,
    NoComparablePairs,
    TooFewSystems,
    ZeroDenominator,
)
from .scoring import SegmentScoreRecord, aggregate_records, iter_run_tables, load_manifest


class TauVariant(enum.Enum):
    TAU_A_2011 = "tau_a_2011"
    TIES_2014 = "ties_2014"
    TAU_B = "tau_b"


DEFAULT_TAU = TauVariant.TAU_B


@dataclass(frozen=True)
class MetaEvalResult:
    accuracy: float
    pairs_total: int
    pairs_correct: int
    tau_by_pair: Mapping[str, float]
    tau_variant: str


@dataclass
class SegmentPairedScores:
    """Aligned (metric, gold) values per segment index, per system.

    Only (system, segment) cells where both a scored metric value and a gold
    judgment exist may appear; groups with fewer than two entries contribute
    no comparison pairs.
    """

    groups: dict[int, list[tuple[str, object, object]]] = field(default_factory=dict)

    def add(self, index: int, system: str, metric_score, gold_score) -> None:
        self.groups.setdefault(index, []).append((system, metric_score, gold_score))

    @classmethod
    def from_records(
        cls, records: Sequence[SegmentScoreRecord], gold: EvalSet
    ) -> "SegmentPairedScores":
        """Pair scored records with gold segment judgments, excluding gaps pairwise."""
        paired = cls()
        if gold.gold_segment_scores is None:
            return paired
        for record in records:
            if not record.is_scored:
                continue
            scores = gold.gold_segment_scores.get(record.segment.system)
            if scores is None:
                continue
            gold_value = scores[record.segment.index]
            if gold_value is None:
                continue
            paired.add(record.segment.index, record.segment.system, record.value, gold_value)
        return paired


def _sign(a, b) -> int:
    return (a > b) - (a < b)


def pairwise_accuracy(
    metric: Mapping[str, object], human: Mapping[str, object]
) -> tuple[float, int, int]:
    """Sign agreement over all human-decided system pairs.

    Returns (accuracy, pairs_total, pairs_correct); counts are exact ints.
    """
    metric_keys, human_keys = set(metric), set(human)
    if metric_keys != human_keys:
        raise KeySetMismatch(metric_keys - human_keys, human_keys - metric_keys)
    if len(metric_keys) < 2:
        raise TooFewSystems(len(metric_keys))
    names = sorted(metric_keys)
    total = correct = 0
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            human_sign = _sign(human[a], human[b])
            if human_sign == 0:
                continue
            total += 1
            if _sign(metric[a], metric[b]) == human_sign:
                correct += 1
    if total == 0:
        raise NoComparablePairs("every system pair is tied in the human ranking")
    return correct / total, total, correct


def _encode(values: Sequence) -> list[int]:
    order = {value: code for code, value in enumerate(sorted(set(values)))}
    return [order[value] for value in values]


def comparison_counts(pairs: SegmentPairedScores) -> tuple[int, int, int, int, int]:
    """(concordant, discordant, metric-only ties, gold-only ties, both tied)."""
    metric_codes: list[int] = []
    gold_codes: list[int] = []
    offsets = [0]
    for index in sorted(pairs.groups):
        group = pairs.groups[index]
        if len(group) < 2:
            continue
        metric_codes.extend(_encode([metric for _, metric, _ in group]))
        gold_codes.extend(_encode([gold for _, _, gold in group]))
        offsets.append(len(metric_codes))
    if len(offsets) == 1:
        return 0, 0, 0, 0, 0
    counts = count_pairs(
        np.asarray(metric_codes, dtype=np.int64),
        np.asarray(gold_codes, dtype=np.int64),
        np.asarray(offsets, dtype=np.int64),
    )
    return tuple(int(c) for c in counts)  # type: ignore[return-value]


def kendall_tau(
    pairs: SegmentPairedScores | Mapping[int, Sequence[tuple[str, object, object]]],
    variant: TauVariant = DEFAULT_TAU,
) -> float:
    """Kendall's tau over same-segment cross-system pairs, per tie treatment."""
    if not isinstance(pairs, SegmentPairedScores):
        pairs = SegmentPairedScores(groups={k: list(v) for k, v in pairs.items()})
    concordant, discordant, ties_metric, ties_gold, ties_both = comparison_counts(pairs)
    total = concordant + discordant + ties_metric + ties_gold + ties_both
    if total == 0:
        raise NoComparablePairs("no segment has two scored systems with gold judgments")

    if variant is TauVariant.TAU_A_2011:
        denominator = concordant + discordant + ties_metric
        if denominator == 0:
            raise NoComparablePairs("every retained pair is tied in the gold scores")
        return (concordant - discordant - ties_metric) / denominator
    if variant is TauVariant.TIES_2014:
        denominator = concordant + discordant + ties_metric
        if denominator == 0:
            raise NoComparablePairs("every retained pair is tied in the gold scores")
        return (concordant - discordant) / denominator
    gold_decided = concordant + discordant + ties_metric
    metric_decided = concordant + discordant + ties_gold
    if gold_decided == 0 or metric_decided == 0:
        raise ZeroDenominator("one axis is tied on every comparison pair")
    return (concordant - discordant) / math.sqrt(gold_decided * metric_decided)


def metric_system_means(records_by_system: Mapping[str, Sequence[SegmentScoreRecord]]) -> dict[str, float]:
    means: dict[str, float] = {}
    for system, records in records_by_system.items():
        score = aggregate_records(system, list(records))
        if score.scored_count > 0:
            means[system] = score.mean
    return means


def _read_run(run_dir: str | Path) -> dict[str, dict[str, dict[str, list[SegmentScoreRecord]]]]:
    run: dict[str, dict[str, dict[str, list[SegmentScoreRecord]]]] = {}
    for pair_code, variant_name, system, records in iter_run_tables(run_dir):
        run.setdefault(pair_code, {}).setdefault(variant_name, {})[system] = records
    if not run:
        raise DataError(f"no score tables found under {run_dir}")
    return run


def evaluate_run(
    run_dir: str | Path,
    gold: EvalSet | Mapping[str, EvalSet],
    variant_name: str | None = None,
    tau_variant: TauVariant = DEFAULT_TAU,
    pool_accuracy: bool = True,
) -> MetaEvalResult:
    """Meta-evaluate one stored run against gold judgments.

    ``gold`` maps pair codes to EvalSets (a single EvalSet is accepted for
    single-pair runs). With ``pool_accuracy`` the correct/total counts are
    summed over language pairs before dividing; otherwise per-pair accuracies
    are averaged. Failed segments and unannotated gold cells are excluded
    pairwise, never imputed.
    """
    if isinstance(gold, EvalSet):
        gold = {gold.pair.code: gold}
    run = _read_run(run_dir)

    variants = sorted({name for tables in run.values() for name in tables})
    if variant_name is None:
        if len(variants) > 1:
            raise DataError(f"run holds several variants ({', '.join(variants)}); pick one")
        variant_name = variants[0]
    elif variant_name not in variants:
        raise DataError(f"variant {variant_name!r} not present in run (has: {', '.join(variants)})")

    tau_by_pair: dict[str, float] = {}
    pooled_correct = pooled_total = 0
    per_pair_accuracy: list[float] = []
    for pair_code in sorted(run):
        if variant_name not in run[pair_code] or pair_code not in gold:
            continue
        records_by_system = run[pair_code][variant_name]
        evalset = gold[pair_code]

        if evalset.gold_system_scores:
            shared = sorted(set(records_by_system) & set(evalset.gold_system_scores))
            means = metric_system_means(
                {name: records_by_system[name] for name in shared}
            )
            shared = [name for name in shared if name in means]
            if len(shared) >= 2:
                accuracy, total, correct = pairwise_accuracy(
                    {name: means[name] for name in shared},
                    {name: evalset.gold_system_scores[name] for name in shared},
                )
                pooled_correct += correct
                pooled_total += total
                per_pair_accuracy.append(accuracy)

        all_records = [r for records in records_by_system.values() for r in records]
        paired = SegmentPairedScores.from_records(all_records, evalset)
        try:
            tau_by_pair[pair_code] = kendall_tau(paired, tau_variant)
        except (NoComparablePairs, ZeroDenominator):
            pass

    if pooled_total == 0 and not tau_by_pair:
        raise EmptyIntersection(
            "run store and gold judgments share no usable (system, segment) support"
        )
    if pooled_total == 0:
        raise EmptyIntersection("no system pair has gold system scores on both sides")

    if pool_accuracy:
        accuracy = pooled_correct / pooled_total
    else:
        accuracy = sum(per_pair_accuracy) / len(per_pair_accuracy)
    return MetaEvalResult(
        accuracy=accuracy,
        pairs_total=pooled_total,
        pairs_correct=pooled_correct,
        tau_by_pair=tau_by_pair,
        tau_variant=tau_variant.value,
    )


def evaluate_all(
    run_dir: str | Path,
    gold: Mapping[str, EvalSet],
    tau_variant: TauVariant = DEFAULT_TAU,
    pool_accuracy: bool = True,
) -> dict[str, MetaEvalResult]:
    """One MetaEvalResult per variant present in the run directory."""
    run = _read_run(run_dir)
    variants = sorted({name for tables in run.values() for name in tables})
    results = {}
    for name in variants:
        results[name] = evaluate_run(run_dir, gold, name, tau_variant, pool_accuracy)
    return results


def run_model_name(run_dir: str | Path, pair_code: str, variant_name: str) -> str:
    manifest = load_manifest(run_dir, pair_code, variant_name)
    if manifest is None:
        return "unknown"
    return manifest.get("backend", {}).get("model", "unknown")
