"""Render the four scoring-prompt styles, each with and without a reference.

The templates are embedded constants. Substitution is a single pass, so
segment text is inserted raw: nothing inside a source, hypothesis, or
reference segment is escaped or re-scanned for placeholders. Each template
ends exactly at its answer cue ("Score:", "Score (0-100):", "Stars:",
"Class:") with no trailing newline, which keeps completion behaviour and
cache keys stable.

Reference-free ("noref") templates differ from their reference-based twins
only by dropping the "with respect to the human reference" clause and the
reference line. The DA reference line is intentionally unquoted while the
other three quote it; the asymmetry is preserved as published.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from pathlib import Path

from .corpus import LangPair, SegmentId
from .errors import MissingReference, UnexpectedReference, UsageError
from .parsing import AnswerDomain

KINDS = ("da", "sqm", "stars", "classes")

_DA_REF = (
    'Score the following translation from {source_lang} to {target_lang} with respect to '
    'the human reference on a continuous scale from 0 to 100, where a score of zero means '
    '"no meaning preserved" and score of one hundred means "perfect meaning and grammar".'
    '\n\n'
    '{source_lang} source: "{source_seg}"\n'
    '{target_lang} human reference: {reference_seg}\n'
    '{target_lang} translation: "{target_seg}"\n'
    'Score:'
)

_DA_NOREF = (
    'Score the following translation from {source_lang} to {target_lang} '
    'on a continuous scale from 0 to 100, where a score of zero means '
    '"no meaning preserved" and score of one hundred means "perfect meaning and grammar".'
    '\n\n'
    '{source_lang} source: "{source_seg}"\n'
    '{target_lang} translation: "{target_seg}"\n'
    'Score:'
)

_SQM_REF = (
    'Score the following translation from {source_lang} to {target_lang} with respect to '
    'the human reference on a continuous scale from 0 to 100 that starts with '
    '"No meaning preserved", goes through "Some meaning preserved", then '
    '"Most meaning preserved and few grammar mistakes", up to "Perfect meaning and grammar".'
    '\n\n'
    '{source_lang} source: "{source_seg}"\n'
    '{target_lang} human reference: "{reference_seg}"\n'
    '{target_lang} translation: "{target_seg}"\n'
    'Score (0-100):'
)

_SQM_NOREF = (
    'Score the following translation from {source_lang} to {target_lang} '
    'on a continuous scale from 0 to 100 that starts with '
    '"No meaning preserved", goes through "Some meaning preserved", then '
    '"Most meaning preserved and few grammar mistakes", up to "Perfect meaning and grammar".'
    '\n\n'
    '{source_lang} source: "{source_seg}"\n'
    '{target_lang} translation: "{target_seg}"\n'
    'Score (0-100):'
)

_STARS_REF = (
    'Score the following translation from {source_lang} to {target_lang} with respect to '
    'the human reference with one to five stars. Where one star means '
    '"Nonsense/No meaning preserved", two stars mean '
    '"Some meaning preserved, but not understandable", three stars mean '
    '"Some meaning preserved and understandable", four stars mean '
    '"Most meaning preserved with possibly few grammar mistakes", '
    'and five stars mean "Perfect meaning and grammar".'
    '\n\n'
    '{source_lang} source: "{source_seg}"\n'
    '{target_lang} human reference: "{reference_seg}"\n'
    '{target_lang} translation: "{target_seg}"\n'
    'Stars:'
)

_STARS_NOREF = (
    'Score the following translation from {source_lang} to {target_lang} '
    'with one to five stars. Where one star means '
    '"Nonsense/No meaning preserved", two stars mean '
    '"Some meaning preserved, but not understandable", three stars mean '
    '"Some meaning preserved and understandable", four stars mean '
    '"Most meaning preserved with possibly few grammar mistakes", '
    'and five stars mean "Perfect meaning and grammar".'
    '\n\n'
    '{source_lang} source: "{source_seg}"\n'
    '{target_lang} translation: "{target_seg}"\n'
    'Stars:'
)

_CLASSES_REF = (
    'Classify the quality of translation from {source_lang} to {target_lang} with respect to '
    'the human reference into one of following classes: "No meaning preserved", '
    '"Some meaning preserved, but not understandable", '
    '"Some meaning preserved and understandable", '
    '"Most meaning preserved, minor issues", "Perfect translation".'
    '\n\n'
    '{source_lang} source: "{source_seg}"\n'
    '{target_lang} human reference: "{reference_seg}"\n'
    '{target_lang} translation: "{target_seg}"\n'
    'Class:'
)

_CLASSES_NOREF = (
    'Classify the quality of translation from {source_lang} to {target_lang} '
    'into one of following classes: "No meaning preserved", '
    '"Some meaning preserved, but not understandable", '
    '"Some meaning preserved and understandable", '
    '"Most meaning preserved, minor issues", "Perfect translation".'
    '\n\n'
    '{source_lang} source: "{source_seg}"\n'
    '{target_lang} translation: "{target_seg}"\n'
    'Class:'
)

TEMPLATES: dict[tuple[str, bool], str] = {
    ("da", True): _DA_REF,
    ("da", False): _DA_NOREF,
    ("sqm", True): _SQM_REF,
    ("sqm", False): _SQM_NOREF,
    ("stars", True): _STARS_REF,
    ("stars", False): _STARS_NOREF,
    ("classes", True): _CLASSES_REF,
    ("classes", False): _CLASSES_NOREF,
}

_DOMAIN_BY_KIND = {
    "da": AnswerDomain.SCORE_0_100,
    "sqm": AnswerDomain.SCORE_0_100,
    "stars": AnswerDomain.STARS_1_5,
    "classes": AnswerDomain.CLASS_LABEL,
}

_PLACEHOLDER_RE = re.compile(
    r"\{(source_lang|target_lang|source_seg|reference_seg|target_seg)\}"
)


@dataclass(frozen=True)
class PromptVariant:
    """One of the eight prompt styles: a kind crossed with reference usage."""

    kind: str
    uses_reference: bool

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise UsageError(
                f"unknown prompt kind {self.kind!r}; valid names: {', '.join(variant_names())}"
            )

    @property
    def name(self) -> str:
        return f"{self.kind}-{'ref' if self.uses_reference else 'noref'}"

    @property
    def answer_domain(self) -> AnswerDomain:
        return _DOMAIN_BY_KIND[self.kind]

    @property
    def template(self) -> str:
        return TEMPLATES[(self.kind, self.uses_reference)]

    @classmethod
    def from_name(cls, name: str) -> "PromptVariant":
        kind, sep, mode = name.rpartition("-")
        if sep and kind in KINDS and mode in ("ref", "noref"):
            return cls(kind=kind, uses_reference=(mode == "ref"))
        raise UsageError(
            f"unknown variant {name!r}; valid names: {', '.join(variant_names())}"
        )


@dataclass(frozen=True)
class PromptInstance:
    variant: PromptVariant
    text: str
    answer_domain: AnswerDomain
    segment: SegmentId | None = None


def all_variants() -> list[PromptVariant]:
    """The eight variants in stable order: each kind with ref before noref."""
    return [PromptVariant(kind, ref) for kind in KINDS for ref in (True, False)]


def variant_names() -> list[str]:
    return [v.name for v in all_variants()]


def render(
    variant: PromptVariant,
    pair: LangPair,
    source_seg: str,
    target_seg: str,
    reference_seg: str | None = None,
    segment: SegmentId | None = None,
) -> PromptInstance:
    """Substitute the placeholders of one template in a single pass."""
    if variant.uses_reference and reference_seg is None:
        raise MissingReference(f"{variant.name} needs a reference segment")
    if not variant.uses_reference and reference_seg is not None:
        raise UnexpectedReference(f"{variant.name} does not take a reference segment")

    values = {
        "source_lang": pair.source_lang,
        "target_lang": pair.target_lang,
        "source_seg": source_seg,
        "target_seg": target_seg,
        "reference_seg": reference_seg if reference_seg is not None else "",
    }
    text = _PLACEHOLDER_RE.sub(lambda m: values[m.group(1)], variant.template)
    return PromptInstance(
        variant=variant,
        text=text,
        answer_domain=variant.answer_domain,
        segment=segment,
    )


def template_sha256(variant: PromptVariant) -> str:
    return hashlib.sha256(variant.template.encode("utf-8")).hexdigest()


def export_templates(dest_dir: str | Path) -> list[Path]:
    """Write each raw template (placeholders intact) to ``<dest>/<name>.txt``."""
    dest = Path(dest_dir)
    dest.mkdir(parents=True, exist_ok=True)
    written = []
    for variant in all_variants():
        path = dest / f"{variant.name}.txt"
        path.write_text(variant.template, encoding="utf-8")
        written.append(path)
    return written
