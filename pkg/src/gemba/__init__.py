"""LLM-as-judge machine translation quality scoring and meta-evaluation.

The pipeline: load a line-aligned corpus, render one of eight prompt
variants per segment, obtain a completion (HTTP, deterministic mock, or
replay cache), normalize the answer into the variant's score domain with
temperature-escalated retries on invalid answers, average to system level,
and correlate the result with human gold judgments (pairwise accuracy,
Kendall's tau in three tie treatments).
"""

__version__ = "0.1.0"

from .backend import (
    BackendConfig,
    CompletionRequest,
    RawAnswer,
    ResponseCache,
    cache_key,
    make_backend,
    record,
)
from .corpus import (
    EvalSet,
    LangPair,
    SegmentId,
    load_evalset,
    validate_gold,
    write_evalset,
)
from .metaeval import (
    MetaEvalResult,
    SegmentPairedScores,
    TauVariant,
    evaluate_all,
    evaluate_run,
    kendall_tau,
    pairwise_accuracy,
)
from .parsing import CLASS_LABELS, AnswerDomain, Invalid, ParsedScore, class_value, parse
from .prompts import PromptInstance, PromptVariant, all_variants, render, variant_names
from .report import FailureTable, ScoreDistribution, distribution, failure_table
from .scoring import (
    RetryPolicy,
    SegmentScoreRecord,
    SystemScore,
    score_evalset,
    score_segment,
    score_system,
)

__all__ = [
    "__version__",
    "AnswerDomain",
    "BackendConfig",
    "CLASS_LABELS",
    "CompletionRequest",
    "EvalSet",
    "FailureTable",
    "Invalid",
    "LangPair",
    "MetaEvalResult",
    "ParsedScore",
    "PromptInstance",
    "PromptVariant",
    "RawAnswer",
    "ResponseCache",
    "RetryPolicy",
    "ScoreDistribution",
    "SegmentId",
    "SegmentPairedScores",
    "SegmentScoreRecord",
    "SystemScore",
    "TauVariant",
    "all_variants",
    "cache_key",
    "class_value",
    "distribution",
    "evaluate_all",
    "evaluate_run",
    "failure_table",
    "kendall_tau",
    "load_evalset",
    "make_backend",
    "pairwise_accuracy",
    "parse",
    "record",
    "render",
    "score_evalset",
    "score_segment",
    "score_system",
    "validate_gold",
    "variant_names",
    "write_evalset",
]
