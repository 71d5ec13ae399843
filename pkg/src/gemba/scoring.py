"""Per-segment scoring with temperature-escalated resampling, plus the run store.

A segment is scored by walking a temperature ladder: one sample at
temperature zero (repeats would be identical), then ``samples_per_rung``
samples per higher rung, each with a fresh ``sample_index``, until an answer
parses into the variant's domain or the total attempt cap is reached. After
the top rung the final temperature is reused until the cap. Transport
failures that survive the backend's own retries abort the segment with a
marker distinct from parse failure, so network incidents are never mistaken
for invalid answers.

The run store is one TSV per (pair, variant, system) under

    <run_dir>/<pair_code>/<variant_name>/<system>.tsv

with columns ``index / outcome / value / attempts / temperature``, finalized
in segment order so completed stores are byte-comparable. Rows are appended
and flushed as segments complete, which makes interrupted runs resumable:
already-present indices are never re-queried. Aborted segments are not
persisted, so a resume retries them. A ``manifest.json`` next to the tables
freezes the configuration (and refuses to resume under a different one); it
contains no timestamps, keeping reruns byte-identical.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from .backend import Backend, BackendConfig, CompletionRequest, make_backend
from .corpus import EvalSet, SegmentId, corpus_fingerprint
from .errors import DataError, ManifestMismatch, MissingReference, TransportError, UsageError
from .parsing import ParsedScore, parse
from .prompts import PromptVariant, render, template_sha256

logger = logging.getLogger(__name__)

DEFAULT_LADDER = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)

_TABLE_HEADER = "index\toutcome\tvalue\tattempts\ttemperature"


@dataclass(frozen=True)
class RetryPolicy:
    """How hard to push for a parseable answer before giving up."""

    temperature_ladder: tuple[float, ...] = DEFAULT_LADDER
    samples_per_rung: int = 2
    give_up_after: int = 12

    def __post_init__(self) -> None:
        ladder = tuple(self.temperature_ladder)
        object.__setattr__(self, "temperature_ladder", ladder)
        if not ladder or ladder[0] != 0.0:
            raise UsageError("temperature ladder must start at 0.0")
        if any(b <= a for a, b in zip(ladder, ladder[1:])):
            raise UsageError("temperature ladder must be strictly increasing")
        if self.samples_per_rung < 1:
            raise UsageError("samples_per_rung must be >= 1")
        if self.give_up_after < len(ladder):
            raise UsageError("give_up_after must cover at least one sample per rung")

    def schedule(self) -> list[tuple[float, int]]:
        """(temperature, sample_index) per attempt, exactly give_up_after long."""
        plan: list[tuple[float, int]] = []
        sample_index = 0
        for temperature in self.temperature_ladder:
            per_rung = 1 if temperature == 0.0 else self.samples_per_rung
            for _ in range(per_rung):
                if len(plan) == self.give_up_after:
                    return plan
                plan.append((temperature, sample_index))
                sample_index += 1
        top = self.temperature_ladder[-1]
        while len(plan) < self.give_up_after:
            plan.append((top, sample_index))
            sample_index += 1
        return plan

    def to_manifest(self) -> dict:
        return {
            "temperature_ladder": list(self.temperature_ladder),
            "samples_per_rung": self.samples_per_rung,
            "give_up_after": self.give_up_after,
        }


@dataclass(frozen=True)
class SegmentScoreRecord:
    segment: SegmentId
    variant: PromptVariant
    status: str  # scored | failed | aborted
    attempts: int
    value: int | None = None
    temperature: float | None = None

    @property
    def is_scored(self) -> bool:
        return self.status == "scored"

    @classmethod
    def scored(cls, segment, variant, value, attempts, temperature):
        return cls(segment, variant, "scored", attempts, value, temperature)

    @classmethod
    def failed(cls, segment, variant, attempts):
        return cls(segment, variant, "failed", attempts)

    @classmethod
    def aborted(cls, segment, variant, attempts):
        return cls(segment, variant, "aborted", attempts)


@dataclass(frozen=True)
class SystemScore:
    """Mean over scored segments only; failures and aborts are counted, not imputed."""

    system: str
    mean: float
    scored_count: int
    failed_count: int
    aborted_count: int = 0


def aggregate_records(system: str, records: list[SegmentScoreRecord]) -> SystemScore:
    ordered = sorted(records, key=lambda r: r.segment.index)
    values = [r.value for r in ordered if r.is_scored]
    mean = sum(values) / len(values) if values else float("nan")
    return SystemScore(
        system=system,
        mean=mean,
        scored_count=len(values),
        failed_count=sum(1 for r in ordered if r.status == "failed"),
        aborted_count=sum(1 for r in ordered if r.status == "aborted"),
    )


def score_segment(
    evalset: EvalSet,
    segment: SegmentId,
    variant: PromptVariant,
    backend: Backend,
    policy: RetryPolicy,
) -> SegmentScoreRecord:
    """Walk the retry schedule for one segment until a parseable answer."""
    if variant.uses_reference and evalset.references is None:
        raise MissingReference(f"{variant.name} needs references, {evalset.pair.code} has none")
    reference = evalset.references[segment.index] if variant.uses_reference else None
    prompt = render(
        variant,
        evalset.pair,
        source_seg=evalset.sources[segment.index],
        target_seg=evalset.hypothesis(segment),
        reference_seg=reference,
        segment=segment,
    )
    attempts = 0
    for temperature, sample_index in policy.schedule():
        attempts += 1
        request = CompletionRequest(
            prompt=prompt.text, temperature=temperature, sample_index=sample_index
        )
        try:
            answer = backend.complete(request)
        except TransportError as exc:
            logger.warning("segment %s/%d aborted: %s", segment.system, segment.index, exc)
            return SegmentScoreRecord.aborted(segment, variant, attempts)
        result = parse(prompt.answer_domain, answer.text)
        if isinstance(result, ParsedScore):
            return SegmentScoreRecord.scored(segment, variant, result.value, attempts, temperature)
    return SegmentScoreRecord.failed(segment, variant, attempts)


def score_system(
    evalset: EvalSet,
    system: str,
    variant: PromptVariant,
    backend: Backend | BackendConfig,
    policy: RetryPolicy | None = None,
) -> tuple[SystemScore, list[SegmentScoreRecord]]:
    """Score every segment of one system (no persistence)."""
    backend = _as_backend(backend)
    policy = policy or RetryPolicy()
    if system not in evalset.systems:
        raise DataError(f"unknown system {system!r}")
    indices = list(range(evalset.n_segments))
    records_by_index = _score_indices(evalset, system, indices, variant, backend, policy)
    records = [records_by_index[i] for i in indices]
    return aggregate_records(system, records), records


def _as_backend(backend: Backend | BackendConfig) -> Backend:
    if isinstance(backend, BackendConfig):
        return make_backend(backend)
    return backend


def _score_indices(
    evalset: EvalSet,
    system: str,
    indices: list[int],
    variant: PromptVariant,
    backend: Backend,
    policy: RetryPolicy,
    sink=None,
) -> dict[int, SegmentScoreRecord]:
    def job(index: int) -> SegmentScoreRecord:
        return score_segment(evalset, SegmentId(system, index), variant, backend, policy)

    out: dict[int, SegmentScoreRecord] = {}
    max_parallel = getattr(backend, "config", None)
    workers = max_parallel.max_parallel if max_parallel is not None else 1
    if workers <= 1 or len(indices) <= 1:
        for index in indices:
            record = job(index)
            out[index] = record
            if sink is not None:
                sink(record)
        return out
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(job, index): index for index in indices}
        try:
            for future in as_completed(futures):
                record = future.result()
                out[futures[future]] = record
                if sink is not None:
                    sink(record)
        except BaseException:
            for future in futures:
                future.cancel()
            raise
    return out


class _SystemTable:
    """One run-store TSV; append-while-running, sorted rewrite when complete."""

    def __init__(self, path: Path, system: str, variant: PromptVariant):
        self.path = path
        self.system = system
        self.variant = variant
        self._handle = None

    def load(self) -> dict[int, SegmentScoreRecord]:
        records: dict[int, SegmentScoreRecord] = {}
        if not self.path.exists():
            return records
        with self.path.open(encoding="utf-8") as handle:
            for line_no, line in enumerate(handle, 1):
                line = line.rstrip("\n")
                if line_no == 1 and line == _TABLE_HEADER:
                    continue
                if not line:
                    continue
                record = self._parse_row(line)
                if record is None:
                    logger.warning("%s:%d: unreadable row, will re-score", self.path, line_no)
                    continue
                records[record.segment.index] = record
        return records

    def _parse_row(self, line: str) -> SegmentScoreRecord | None:
        parts = line.split("\t")
        if len(parts) != 5:
            return None
        try:
            index = int(parts[0])
            status = parts[1]
            value = int(parts[2]) if parts[2] else None
            attempts = int(parts[3])
            temperature = float(parts[4]) if parts[4] else None
        except ValueError:
            return None
        if status not in ("scored", "failed"):
            return None
        return SegmentScoreRecord(
            SegmentId(self.system, index), self.variant, status, attempts, value, temperature
        )

    @staticmethod
    def _row(record: SegmentScoreRecord) -> str:
        value = "" if record.value is None else str(record.value)
        temperature = "" if record.temperature is None else str(record.temperature)
        return f"{record.segment.index}\t{record.status}\t{value}\t{record.attempts}\t{temperature}"

    def append(self, record: SegmentScoreRecord) -> None:
        if record.status == "aborted":
            return
        if self._handle is None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            fresh = not self.path.exists() or self.path.stat().st_size == 0
            self._handle = self.path.open("a", encoding="utf-8")
            if fresh:
                self._handle.write(_TABLE_HEADER + "\n")
        self._handle.write(self._row(record) + "\n")
        self._handle.flush()

    def close(self) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None

    def finalize(self, records: dict[int, SegmentScoreRecord]) -> None:
        self.close()
        rows = [self._row(records[i]) for i in sorted(records)]
        tmp = self.path.with_suffix(".tsv.tmp")
        tmp.write_text("\n".join([_TABLE_HEADER, *rows]) + "\n", encoding="utf-8")
        tmp.replace(self.path)


def _store_dir(run_dir: Path, pair_code: str, variant: PromptVariant) -> Path:
    return run_dir / pair_code / variant.name


def build_manifest(
    evalset: EvalSet, variant: PromptVariant, config: BackendConfig, policy: RetryPolicy
) -> dict:
    return {
        "format": 1,
        "pair": evalset.pair.code,
        "variant": variant.name,
        "backend": {
            "kind": config.kind,
            "model": config.model_name,
            "endpoint": config.endpoint_url,
            "max_tokens": config.max_tokens,
        },
        "policy": policy.to_manifest(),
        "template_sha256": template_sha256(variant),
        "corpus_sha256": corpus_fingerprint(evalset),
    }


def _write_manifest(path: Path, manifest: dict) -> None:
    if path.exists():
        existing = json.loads(path.read_text(encoding="utf-8"))
        if existing != manifest:
            raise ManifestMismatch(
                f"{path} was produced by a different configuration; "
                "use a fresh run directory"
            )
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def score_evalset(
    evalset: EvalSet,
    variant: PromptVariant,
    backend: Backend | BackendConfig,
    policy: RetryPolicy | None = None,
    run_dir: str | Path | None = None,
) -> dict[str, tuple[SystemScore, list[SegmentScoreRecord]]]:
    """Score every system, resuming from and persisting to the run store.

    Without ``run_dir`` this is a purely in-memory run.
    """
    backend = _as_backend(backend)
    policy = policy or RetryPolicy()
    results: dict[str, tuple[SystemScore, list[SegmentScoreRecord]]] = {}

    store: Path | None = None
    if run_dir is not None:
        store = _store_dir(Path(run_dir), evalset.pair.code, variant)
        config = backend.config
        _write_manifest(store / "manifest.json", build_manifest(evalset, variant, config, policy))

    for system in sorted(evalset.systems):
        table = _SystemTable(store / f"{system}.tsv", system, variant) if store else None
        done = table.load() if table else {}
        missing = [i for i in range(evalset.n_segments) if i not in done]
        if missing:
            sink = table.append if table else None
            try:
                fresh = _score_indices(evalset, system, missing, variant, backend, policy, sink)
            finally:
                if table:
                    table.close()
            done.update(fresh)
            if table:
                table.finalize({i: r for i, r in done.items() if r.status != "aborted"})
        records = [done[i] for i in sorted(done)]
        results[system] = (aggregate_records(system, records), records)
    return results


def iter_run_tables(
    run_dir: str | Path,
) -> Iterator[tuple[str, str, str, list[SegmentScoreRecord]]]:
    """Yield (pair_code, variant_name, system, records) for every stored table."""
    root = Path(run_dir)
    if not root.is_dir():
        raise DataError(f"run directory not found: {root}")
    for pair_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for variant_dir in sorted(p for p in pair_dir.iterdir() if p.is_dir()):
            try:
                variant = PromptVariant.from_name(variant_dir.name)
            except UsageError:
                continue
            for table_path in sorted(variant_dir.glob("*.tsv")):
                table = _SystemTable(table_path, table_path.stem, variant)
                loaded = table.load()
                records = [loaded[i] for i in sorted(loaded)]
                yield pair_dir.name, variant.name, table_path.stem, records


def load_manifest(run_dir: str | Path, pair_code: str, variant_name: str) -> dict | None:
    path = Path(run_dir) / pair_code / variant_name / "manifest.json"
    if not path.exists():
        return None
    return json.loads(path.read_text(encoding="utf-8"))
