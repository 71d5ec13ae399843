from __future__ import annotations

import math
from decimal import Decimal
from pathlib import Path

import pytest

from gemba.backend import BackendConfig, CompletionRequest, MockBackend, RawAnswer, make_backend
from gemba.corpus import EvalSet, LangPair, SegmentId
from gemba.errors import ManifestMismatch, MissingReference, TransportError, UsageError
from gemba.prompts import PromptVariant
from gemba.scoring import (
    RetryPolicy,
    SegmentScoreRecord,
    aggregate_records,
    iter_run_tables,
    load_manifest,
    score_evalset,
    score_segment,
    score_system,
)

DA_REF = PromptVariant("da", True)
DA_NOREF = PromptVariant("da", False)


class CountingBackend:
    """Wraps another backend and counts completions issued."""

    def __init__(self, inner):
        self.inner = inner
        self.config = inner.config
        self.calls = 0

    def complete(self, request: CompletionRequest) -> RawAnswer:
        self.calls += 1
        return self.inner.complete(request)


class NeverValidBackend:
    config = BackendConfig(kind="mock")

    def complete(self, request: CompletionRequest) -> RawAnswer:
        return RawAnswer(text="there is no way to judge this", request=request)


class FlakyBackend:
    """Transport failure on the first k distinct segments, then clean."""

    def __init__(self, inner, fail_first: int):
        self.inner = inner
        self.config = inner.config
        self.fail_first = fail_first
        self.seen: set[str] = set()

    def complete(self, request: CompletionRequest) -> RawAnswer:
        if request.prompt not in self.seen and len(self.seen) < self.fail_first:
            self.seen.add(request.prompt)
            raise TransportError(503, "synthetic outage")
        return self.inner.complete(request)


def _marked_set(values_by_system: dict[str, list]) -> EvalSet:
    n = len(next(iter(values_by_system.values())))
    return EvalSet(
        pair=LangPair.from_code("en-de"),
        sources=tuple(f"source {i}" for i in range(n)),
        references=tuple(f"reference {i}" for i in range(n)),
        systems={
            name: tuple(f"hyp {name} {i} @mockscore={value}@" for i, value in enumerate(values))
            for name, values in values_by_system.items()
        },
    )


# --- retry policy -----------------------------------------------------------


def test_default_schedule_shape() -> None:
    schedule = RetryPolicy().schedule()
    assert len(schedule) == 12
    assert schedule[0] == (0.0, 0)
    assert schedule[1] == (0.2, 1)
    assert schedule[2] == (0.2, 2)
    assert schedule[-2] == (1.0, 10)
    assert schedule[-1] == (1.0, 11)  # padded at the top temperature
    assert sum(1 for t, _ in schedule if t == 0.0) == 1
    assert [i for _, i in schedule] == list(range(12))


def test_schedule_truncates_at_cap() -> None:
    policy = RetryPolicy(temperature_ladder=(0.0, 0.5, 1.0), samples_per_rung=3, give_up_after=4)
    assert policy.schedule() == [(0.0, 0), (0.5, 1), (0.5, 2), (0.5, 3)]


def test_policy_validation() -> None:
    with pytest.raises(UsageError):
        RetryPolicy(temperature_ladder=(0.2, 0.4))
    with pytest.raises(UsageError):
        RetryPolicy(temperature_ladder=(0.0, 0.4, 0.4))
    with pytest.raises(UsageError):
        RetryPolicy(samples_per_rung=0)
    with pytest.raises(UsageError):
        RetryPolicy(give_up_after=3)


# --- score_segment ----------------------------------------------------------


def test_first_attempt_success() -> None:
    evalset = _marked_set({"A": [87, 93]})
    record = score_segment(evalset, SegmentId("A", 0), DA_REF, MockBackend(BackendConfig()), RetryPolicy())
    assert record.status == "scored"
    assert record.value == 87
    assert record.attempts == 1
    assert record.temperature == 0.0


def test_invalid_answers_escalate_temperature() -> None:
    evalset = EvalSet(
        pair=LangPair.from_code("en-de"),
        sources=("s",),
        references=("r",),
        systems={"A": ("hyp @mockinvalid@",)},
    )
    record = score_segment(evalset, SegmentId("A", 0), DA_REF, MockBackend(BackendConfig()), RetryPolicy())
    # default ladder: attempt 1 at 0.0 (sample 0), attempts 2-3 at 0.2 (samples 1, 2)
    assert record.status == "scored"
    assert record.value == 50
    assert record.attempts == 3
    assert record.temperature == 0.2


def test_never_valid_fails_at_cap() -> None:
    evalset = _marked_set({"A": [1]})
    record = score_segment(evalset, SegmentId("A", 0), DA_REF, NeverValidBackend(), RetryPolicy())
    assert record.status == "failed"
    assert record.attempts == 12
    assert record.value is None


def test_transport_failure_aborts_distinctly() -> None:
    evalset = _marked_set({"A": [1]})
    backend = FlakyBackend(MockBackend(BackendConfig()), fail_first=1)
    record = score_segment(evalset, SegmentId("A", 0), DA_REF, backend, RetryPolicy())
    assert record.status == "aborted"
    assert record.attempts == 1


def test_reference_required_for_ref_variant() -> None:
    evalset = EvalSet(pair=LangPair.from_code("en-de"), sources=("s",), systems={"A": ("h",)})
    with pytest.raises(MissingReference):
        score_segment(evalset, SegmentId("A", 0), DA_REF, MockBackend(BackendConfig()), RetryPolicy())


# --- score_system -----------------------------------------------------------


def test_mean_over_scored_segments() -> None:
    evalset = _marked_set({"A": [90, 95, 100]})
    score, records = score_system(evalset, "A", DA_REF, BackendConfig(kind="mock"))
    assert score.mean == 95.0
    assert score.scored_count == 3 and score.failed_count == 0
    assert [r.value for r in records] == [90, 95, 100]


def test_failed_segments_excluded_from_mean() -> None:
    evalset = _marked_set({"A": [95, 95, "nothing numeric here"]})
    score, records = score_system(evalset, "A", DA_REF, BackendConfig(kind="mock"))
    assert score.mean == 95.0
    assert score.scored_count == 2
    assert score.failed_count == 1
    assert records[2].status == "failed"
    assert records[2].attempts == 12


def test_all_failed_mean_is_nan() -> None:
    evalset = _marked_set({"A": ["no", "digits"]})
    score, _ = score_system(evalset, "A", DA_REF, BackendConfig(kind="mock"))
    assert math.isnan(score.mean)
    assert score.scored_count == 0 and score.failed_count == 2


def test_counts_partition_segments() -> None:
    records = [
        SegmentScoreRecord.scored(SegmentId("A", 0), DA_REF, 90, 1, 0.0),
        SegmentScoreRecord.failed(SegmentId("A", 1), DA_REF, 12),
        SegmentScoreRecord.aborted(SegmentId("A", 2), DA_REF, 4),
    ]
    score = aggregate_records("A", records)
    assert (score.scored_count, score.failed_count, score.aborted_count) == (1, 1, 1)


def test_concurrent_scoring_matches_serial() -> None:
    values = list(range(40, 80))
    evalset = _marked_set({"A": values})
    serial, _ = score_system(evalset, "A", DA_REF, BackendConfig(kind="mock", max_parallel=1))
    parallel, _ = score_system(evalset, "A", DA_REF, BackendConfig(kind="mock", max_parallel=8))
    assert serial == parallel


# --- score_evalset and the run store ----------------------------------------


def test_run_store_layout_and_rows(tmp_path: Path) -> None:
    evalset = _marked_set({"A": [87, 93], "B": [70, 71]})
    score_evalset(evalset, DA_REF, BackendConfig(kind="mock"), run_dir=tmp_path / "run")
    table = (tmp_path / "run" / "en-de" / "da-ref" / "A.tsv").read_text(encoding="utf-8")
    assert table.splitlines()[0] == "index\toutcome\tvalue\tattempts\ttemperature"
    assert table.splitlines()[1] == "0\tscored\t87\t1\t0.0"
    manifest = load_manifest(tmp_path / "run", "en-de", "da-ref")
    assert manifest["variant"] == "da-ref"
    assert manifest["backend"]["kind"] == "mock"
    assert manifest["policy"]["give_up_after"] == 12


def test_completed_run_issues_zero_backend_calls(tmp_path: Path) -> None:
    evalset = _marked_set({"A": [87, 93], "B": [70, 71]})
    first = CountingBackend(MockBackend(BackendConfig(kind="mock")))
    score_evalset(evalset, DA_REF, first, run_dir=tmp_path / "run")
    assert first.calls == 4
    second = CountingBackend(MockBackend(BackendConfig(kind="mock")))
    results = score_evalset(evalset, DA_REF, second, run_dir=tmp_path / "run")
    assert second.calls == 0
    assert results["A"][0].mean == 90.0


def test_interrupted_then_resumed_matches_uninterrupted(tmp_path: Path) -> None:
    evalset = _marked_set({"A": [87, 93, 99], "B": [70, 71, 72]})

    class ExplodeAfter:
        def __init__(self, inner, budget: int):
            self.inner, self.config, self.budget = inner, inner.config, budget

        def complete(self, request):
            if self.budget <= 0:
                raise KeyboardInterrupt
            self.budget -= 1
            return self.inner.complete(request)

    clean_dir = tmp_path / "clean"
    score_evalset(evalset, DA_REF, MockBackend(BackendConfig(kind="mock")), run_dir=clean_dir)

    resumed_dir = tmp_path / "resumed"
    with pytest.raises(KeyboardInterrupt):
        score_evalset(
            evalset, DA_REF, ExplodeAfter(MockBackend(BackendConfig(kind="mock")), 4),
            run_dir=resumed_dir,
        )
    score_evalset(evalset, DA_REF, MockBackend(BackendConfig(kind="mock")), run_dir=resumed_dir)

    clean_files = sorted(p.relative_to(clean_dir) for p in clean_dir.rglob("*") if p.is_file())
    resumed_files = sorted(p.relative_to(resumed_dir) for p in resumed_dir.rglob("*") if p.is_file())
    assert clean_files == resumed_files
    for rel in clean_files:
        assert (clean_dir / rel).read_bytes() == (resumed_dir / rel).read_bytes(), rel


def test_aborted_segments_are_retried_on_resume(tmp_path: Path) -> None:
    evalset = _marked_set({"A": [87, 93, 99]})
    flaky = FlakyBackend(MockBackend(BackendConfig(kind="mock")), fail_first=2)
    first = score_evalset(evalset, DA_REF, flaky, run_dir=tmp_path / "run")
    assert first["A"][0].aborted_count == 2
    table = (tmp_path / "run" / "en-de" / "da-ref" / "A.tsv").read_text(encoding="utf-8")
    assert len(table.splitlines()) == 2  # header + the one scored row
    second = score_evalset(
        evalset, DA_REF, MockBackend(BackendConfig(kind="mock")), run_dir=tmp_path / "run"
    )
    assert second["A"][0].aborted_count == 0
    assert second["A"][0].scored_count == 3


def test_manifest_mismatch_refuses_resume(tmp_path: Path) -> None:
    evalset = _marked_set({"A": [87]})
    score_evalset(evalset, DA_REF, BackendConfig(kind="mock"), run_dir=tmp_path / "run")
    with pytest.raises(ManifestMismatch):
        score_evalset(
            evalset,
            DA_REF,
            BackendConfig(kind="mock", model_name="different"),
            run_dir=tmp_path / "run",
        )


def test_iter_run_tables_round_trips_records(tmp_path: Path) -> None:
    evalset = _marked_set({"A": [87, 93], "B": ["no digits", 71]})
    results = score_evalset(evalset, DA_REF, BackendConfig(kind="mock"), run_dir=tmp_path / "run")
    stored = {
        system: records
        for _pair, _variant, system, records in iter_run_tables(tmp_path / "run")
    }
    assert stored == {name: recs for name, (_s, recs) in results.items()}


def test_segment_ids_resolve_in_owning_evalset(tmp_path: Path) -> None:
    evalset = _marked_set({"A": [87, 93], "B": [70, 71]})
    results = score_evalset(evalset, DA_REF, BackendConfig(kind="mock"))
    for _system, (_score, records) in results.items():
        for record in records:
            assert isinstance(evalset.hypothesis(record.segment), str)


def test_hash_spread_mock_yields_no_system_ties(wmt_corpus: Path) -> None:
    from gemba.corpus import load_evalset

    evalset = load_evalset(wmt_corpus, "en-de")
    results = score_evalset(evalset, DA_REF, BackendConfig(kind="mock"))
    means = [score.mean for score, _ in results.values()]
    assert len(means) == 54
    assert len(set(means)) == 54
    assert all(score.failed_count == 0 for score, _ in results.values())
