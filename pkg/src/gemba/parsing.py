"""Normalize raw completions into scores, or reject them as invalid.

The rules are deliberately small and total:

* Numeric domains scan for the *first* maximal run of decimal digits, with one
  optional fraction part whose value is truncated ("87.5" -> 87, "87, because
  the translation..." -> 87). Leading echoes like "Score:", quotes, and
  markdown need no special handling; the digit scan skips them. A minus sign
  is never consumed, so "-5" reads as 5; this is an accepted consequence of
  the first-number rule. If the first number is out of range the answer is
  invalid; later numbers are never consulted.
* The one-to-five-stars domain first looks for star answers written without
  ASCII digits: glyph runs ("**", "★★"), English number words with an optional
  "star(s)" suffix ("two", "two stars", "one star"), and CJK numerals with an
  optional measure word ("一颗星", "五"). Only if none of those occur does the
  digit scan run. Note that a bare "**" therefore always means two stars,
  even when a model intended markdown emphasis.
* The class domain does a case-insensitive containment match of exactly one
  of the five canonical labels, longest match first; two different labels in
  one answer make it ambiguous.

Invalid answers are values, not exceptions: parsing never raises.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Union

from .errors import UnknownLabel


class AnswerDomain(enum.Enum):
    """What a prompt variant declares as its legal answer set."""

    SCORE_0_100 = "score_0_100"
    STARS_1_5 = "stars_1_5"
    CLASS_LABEL = "class_label"

    @property
    def low(self) -> int:
        return {AnswerDomain.SCORE_0_100: 0, AnswerDomain.STARS_1_5: 1, AnswerDomain.CLASS_LABEL: 0}[self]

    @property
    def high(self) -> int:
        return {AnswerDomain.SCORE_0_100: 100, AnswerDomain.STARS_1_5: 5, AnswerDomain.CLASS_LABEL: 4}[self]


# Worst-to-best order; the index is the numeric value assigned to each class,
# so that a higher value means a better translation in every domain.
CLASS_LABELS = (
    "No meaning preserved",
    "Some meaning preserved, but not understandable",
    "Some meaning preserved and understandable",
    "Most meaning preserved, minor issues",
    "Perfect translation",
)

_CLASS_BY_FOLD = {label.casefold(): value for value, label in enumerate(CLASS_LABELS)}


@dataclass(frozen=True)
class ParsedScore:
    value: int
    domain: AnswerDomain
    raw: str


@dataclass(frozen=True)
class Invalid:
    """Why a completion could not be normalized. A value, not a fault."""

    reason: str  # NoNumber | OutOfRange | AmbiguousClass | NoMatch
    detail: int | None = None

    def __str__(self) -> str:
        if self.reason == "OutOfRange" and self.detail is not None:
            return f"OutOfRange({self.detail})"
        return self.reason


ParseResult = Union[ParsedScore, Invalid]

# One optional fraction part; its digits are matched so the scan does not
# restart inside "87.5", but only the integer part contributes to the value.
_NUMBER_RE = re.compile(r"(\d+)(?:\.\d+)?")

_STAR_WORDS = {"one": 1, "two": 2, "three": 3, "four": 4, "five": 5}
_CJK_STARS = {"一": 1, "二": 2, "三": 3, "四": 4, "五": 5}

_STAR_LEXICON_RE = re.compile(
    r"(?P<glyphs>★+|\*+)"
    r"|(?P<word>\b(?:one|two|three|four|five)\b)(?:\s+stars?\b)?"
    r"|(?P<cjk>[一二三四五])(?:\s*(?:颗星|顆星|星))?",
    re.IGNORECASE,
)


def _first_number(text: str) -> int | None:
    m = _NUMBER_RE.search(text)
    if m is None:
        return None
    return int(m.group(1))


def _gate(value: int, domain: AnswerDomain, raw: str) -> ParseResult:
    if domain.low <= value <= domain.high:
        return ParsedScore(value=value, domain=domain, raw=raw)
    return Invalid("OutOfRange", detail=value)


def _parse_stars(text: str) -> int | None:
    m = _STAR_LEXICON_RE.search(text)
    if m is None:
        return None
    if m.group("glyphs") is not None:
        return len(m.group("glyphs"))
    if m.group("word") is not None:
        return _STAR_WORDS[m.group("word").lower()]
    return _CJK_STARS[m.group("cjk")]


def _parse_class(text: str) -> ParseResult:
    folded = text.casefold()
    matches: list[tuple[str, list[tuple[int, int]]]] = []
    for label in sorted(CLASS_LABELS, key=len, reverse=True):
        needle = label.casefold()
        spans = [(m.start(), m.end()) for m in re.finditer(re.escape(needle), folded)]
        if spans:
            matches.append((label, spans))
    if not matches:
        return Invalid("NoMatch")
    if len(matches) > 1:
        # Shorter labels occurring only inside an already-matched longer label
        # do not count as separate matches (labels share prefixes).
        longest = matches[0]
        for label, spans in matches[1:]:
            inside = all(
                any(ls <= s and e <= le for ls, le in longest[1]) for s, e in spans
            )
            if not inside:
                return Invalid("AmbiguousClass")
    return ParsedScore(value=_CLASS_BY_FOLD[matches[0][0].casefold()], domain=AnswerDomain.CLASS_LABEL, raw=text)


def parse(domain: AnswerDomain, text: str) -> ParseResult:
    """Normalize a completion into the domain, or describe why it cannot be.

    Pure and total: same input, same result, no exceptions.
    """
    if domain is AnswerDomain.CLASS_LABEL:
        return _parse_class(text)
    if domain is AnswerDomain.STARS_1_5:
        stars = _parse_stars(text)
        if stars is not None:
            return _gate(stars, domain, text)
    value = _first_number(text)
    if value is None:
        return Invalid("NoNumber")
    return _gate(value, domain, text)


def class_value(label: str) -> int:
    """Map a canonical class label (any case) to its numeric value in [0, 4]."""
    try:
        return _CLASS_BY_FOLD[label.casefold()]
    except KeyError:
        raise UnknownLabel(label) from None
