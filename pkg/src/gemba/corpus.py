"""Line-aligned evaluation data: sources, references, system outputs, gold scores.

Directory layout (all text files UTF-8, one segment per line, LF endings;
a trailing newline at EOF does not create an empty final segment):

    <root>/<pair_code>/src.txt            # N lines, required
    <root>/<pair_code>/ref.txt            # N lines, optional
    <root>/<pair_code>/sys/<name>.txt     # N lines per system
    <root>/<pair_code>/gold/seg/<name>.txt    # N lines, decimal or NaN, optional
    <root>/<pair_code>/gold/sys.tsv           # "<name>\t<score>" per line, optional

Empty lines are legal segments and are scored like any other; dropping them
would desynchronize the alignment. Gold segment files use the token ``NaN``
for unannotated segments. Gold values are kept as :class:`decimal.Decimal`
so tie detection downstream compares the file's decimals exactly.
"""

from __future__ import annotations

import hashlib
import logging
import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Mapping

from .errors import (
    DataError,
    DuplicateSystem,
    LengthMismatch,
    MalformedScoreLine,
    MissingSourceFile,
)

logger = logging.getLogger(__name__)

# Full language names are required by the prompt wording; codes alone would
# change what the model is asked. Extend via the language_names argument.
LANGUAGE_NAMES = {
    "en": "English",
    "de": "German",
    "ru": "Russian",
    "zh": "Chinese",
}

_PAIR_CODE_RE = re.compile(r"^[a-z]{2,3}-[a-z]{2,3}$")


@dataclass(frozen=True)
class LangPair:
    """A translation direction, carrying the human-readable language names."""

    source_lang: str
    target_lang: str
    code: str

    def __post_init__(self) -> None:
        if not self.source_lang or not self.target_lang:
            raise DataError("language names must be nonempty")
        if self.source_lang == self.target_lang:
            raise DataError(f"source and target language are both {self.source_lang!r}")
        if not _PAIR_CODE_RE.match(self.code):
            raise DataError(f"pair code {self.code!r} does not match '<xx>-<yy>'")

    @classmethod
    def from_code(cls, code: str, language_names: Mapping[str, str] | None = None) -> "LangPair":
        """Build a pair from a code like ``en-de`` using the name table."""
        if not _PAIR_CODE_RE.match(code):
            raise DataError(f"pair code {code!r} does not match '<xx>-<yy>'")
        names = dict(LANGUAGE_NAMES)
        if language_names:
            names.update(language_names)
        src, tgt = code.split("-")
        for tag in (src, tgt):
            if tag not in names:
                raise DataError(
                    f"no language name known for {tag!r}; extend the name table via config"
                )
        return cls(source_lang=names[src], target_lang=names[tgt], code=code)


@dataclass(frozen=True)
class SegmentId:
    """Addresses one hypothesis: (system name, zero-based segment index)."""

    system: str
    index: int


def _as_decimal(value) -> Decimal:
    # float goes through repr() so 0.1 becomes Decimal("0.1"), not the binary
    # expansion; files and directly-constructed sets then compare equal.
    if isinstance(value, Decimal):
        d = value
    elif isinstance(value, float):
        d = Decimal(repr(value))
    else:
        d = Decimal(value)
    if not d.is_finite():
        raise DataError(f"gold score must be finite, got {value!r}")
    return d


@dataclass(frozen=True)
class EvalSet:
    """One language pair's sources, per-system hypotheses, and gold judgments.

    Immutable once constructed; safe to share across threads.
    """

    pair: LangPair
    sources: tuple[str, ...]
    references: tuple[str, ...] | None = None
    systems: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    gold_segment_scores: Mapping[str, tuple[Decimal | None, ...]] | None = None
    gold_system_scores: Mapping[str, Decimal] | None = None

    def __post_init__(self) -> None:
        n = len(self.sources)
        if n < 1:
            raise DataError("an evaluation set needs at least one source segment")
        if self.references is not None and len(self.references) != n:
            raise DataError(f"references: expected {n} segments, found {len(self.references)}")
        for name, hyps in self.systems.items():
            if not name:
                raise DataError("system names must be nonempty")
            if len(hyps) != n:
                raise DataError(f"system {name!r}: expected {n} segments, found {len(hyps)}")
        if self.gold_segment_scores is not None:
            normalized: dict[str, tuple[Decimal | None, ...]] = {}
            for name, scores in self.gold_segment_scores.items():
                if name not in self.systems:
                    raise DataError(f"segment gold for unknown system {name!r}")
                if len(scores) != n:
                    raise DataError(
                        f"segment gold for {name!r}: expected {n} entries, found {len(scores)}"
                    )
                normalized[name] = tuple(None if s is None else _as_decimal(s) for s in scores)
            object.__setattr__(self, "gold_segment_scores", normalized)
        if self.gold_system_scores is not None:
            sys_gold = {}
            for name, score in self.gold_system_scores.items():
                if name not in self.systems:
                    raise DataError(f"system gold for unknown system {name!r}")
                sys_gold[name] = _as_decimal(score)
            object.__setattr__(self, "gold_system_scores", sys_gold)

    @property
    def n_segments(self) -> int:
        return len(self.sources)

    @property
    def system_names(self) -> tuple[str, ...]:
        return tuple(self.systems.keys())

    def hypothesis(self, seg: SegmentId) -> str:
        """Resolve a segment id to its hypothesis string."""
        if seg.system not in self.systems:
            raise DataError(f"unknown system {seg.system!r}")
        if not 0 <= seg.index < self.n_segments:
            raise DataError(f"segment index {seg.index} out of range [0, {self.n_segments})")
        return self.systems[seg.system][seg.index]


def _read_lines(path: Path) -> list[str]:
    # Only LF terminates a segment; splitlines() or universal-newline mode
    # would also split on rarer control characters and silently change N.
    # An empty file has zero segments, but "\n" is one empty segment (empty
    # lines are legal).
    with path.open(encoding="utf-8", newline="") as handle:
        text = handle.read()
    if text == "":
        return []
    if text.endswith("\n"):
        text = text[:-1]
    return text.split("\n")


def _read_aligned(path: Path, expected: int) -> list[str]:
    lines = _read_lines(path)
    if len(lines) != expected:
        raise LengthMismatch(str(path), expected, len(lines))
    return lines


def _parse_gold_segment_file(path: Path, expected: int) -> tuple[Decimal | None, ...]:
    lines = _read_aligned(path, expected)
    scores: list[Decimal | None] = []
    for line_no, line in enumerate(lines, 1):
        token = line.strip()
        if token.lower() == "nan":
            scores.append(None)
            continue
        try:
            scores.append(_as_decimal(token))
        except (InvalidOperation, DataError, ValueError):
            raise MalformedScoreLine(str(path), line_no, line) from None
    return tuple(scores)


def _parse_gold_system_file(path: Path, known_systems: set[str]) -> dict[str, Decimal]:
    scores: dict[str, Decimal] = {}
    for line_no, line in enumerate(_read_lines(path), 1):
        if line == "":
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise MalformedScoreLine(str(path), line_no, line)
        name, raw = parts
        if name in scores:
            raise DuplicateSystem(name, str(path))
        if name not in known_systems:
            logger.warning("%s:%d: system gold for unknown system %r, ignoring", path, line_no, name)
            continue
        try:
            scores[name] = _as_decimal(raw)
        except (InvalidOperation, DataError, ValueError):
            raise MalformedScoreLine(str(path), line_no, line) from None
    return scores


def load_evalset(
    root: str | Path,
    pair_code: str,
    language_names: Mapping[str, str] | None = None,
) -> EvalSet:
    """Load one language pair from the directory layout described above.

    Systems are discovered by enumerating ``sys/*.txt``; gold scores are
    attached when the corresponding files exist.
    """
    pair_dir = Path(root) / pair_code
    src_path = pair_dir / "src.txt"
    if not src_path.is_file():
        raise MissingSourceFile(str(src_path))
    sources = _read_lines(src_path)
    if not sources:
        raise DataError(f"{src_path}: source file is empty")
    n = len(sources)

    ref_path = pair_dir / "ref.txt"
    references = tuple(_read_aligned(ref_path, n)) if ref_path.is_file() else None

    systems: dict[str, tuple[str, ...]] = {}
    sys_dir = pair_dir / "sys"
    if sys_dir.is_dir():
        for path in sorted(sys_dir.glob("*.txt")):
            name = path.stem
            if name in systems:
                raise DuplicateSystem(name, str(sys_dir))
            systems[name] = tuple(_read_aligned(path, n))

    gold_seg: dict[str, tuple[Decimal | None, ...]] | None = None
    seg_dir = pair_dir / "gold" / "seg"
    if seg_dir.is_dir():
        gold_seg = {}
        for path in sorted(seg_dir.glob("*.txt")):
            name = path.stem
            if name not in systems:
                logger.warning("%s: segment gold for unknown system %r, ignoring", path, name)
                continue
            gold_seg[name] = _parse_gold_segment_file(path, n)
        if not gold_seg:
            gold_seg = None

    gold_sys: dict[str, Decimal] | None = None
    sys_tsv = pair_dir / "gold" / "sys.tsv"
    if sys_tsv.is_file():
        gold_sys = _parse_gold_system_file(sys_tsv, set(systems)) or None

    return EvalSet(
        pair=LangPair.from_code(pair_code, language_names),
        sources=tuple(sources),
        references=references,
        systems=systems,
        gold_segment_scores=gold_seg,
        gold_system_scores=gold_sys,
    )


def validate_gold(evalset: EvalSet) -> list[str]:
    """Return human-readable warnings about gold-score coverage gaps.

    Never mutates and never raises: absent gold is legal, just worth flagging
    before a long scoring run.
    """
    warnings: list[str] = []
    names = list(evalset.systems)

    if evalset.gold_system_scores is None:
        warnings.append("no system-level gold scores present")
    else:
        for name in names:
            if name not in evalset.gold_system_scores:
                warnings.append(f"system {name!r} has no system-level gold score")

    if evalset.gold_segment_scores is None:
        warnings.append("no segment-level gold scores present")
        return warnings

    for name in names:
        if name not in evalset.gold_segment_scores:
            warnings.append(f"system {name!r} has no segment-level gold scores")

    covered = [name for name in names if name in evalset.gold_segment_scores]
    for index in range(evalset.n_segments):
        support = [name for name in covered if evalset.gold_segment_scores[name][index] is not None]
        if support and len(support) < len(covered):
            missing = [name for name in covered if name not in support]
            warnings.append(
                f"segment {index}: gold present for {', '.join(support)} "
                f"but missing for {', '.join(missing)}"
            )
    return warnings


def write_evalset(evalset: EvalSet, root: str | Path) -> Path:
    """Write an EvalSet back out in the on-disk layout (fixture/round-trip helper)."""
    pair_dir = Path(root) / evalset.pair.code
    pair_dir.mkdir(parents=True, exist_ok=True)

    def dump(path: Path, lines) -> None:
        for line in lines:
            if "\n" in line:
                raise DataError(f"segment contains a newline, not representable: {line!r}")
        with path.open("w", encoding="utf-8", newline="") as handle:
            handle.write("".join(line + "\n" for line in lines))

    dump(pair_dir / "src.txt", evalset.sources)
    if evalset.references is not None:
        dump(pair_dir / "ref.txt", evalset.references)
    sys_dir = pair_dir / "sys"
    sys_dir.mkdir(exist_ok=True)
    for name, hyps in evalset.systems.items():
        dump(sys_dir / f"{name}.txt", hyps)
    if evalset.gold_segment_scores is not None:
        seg_dir = pair_dir / "gold" / "seg"
        seg_dir.mkdir(parents=True, exist_ok=True)
        for name, scores in evalset.gold_segment_scores.items():
            dump(seg_dir / f"{name}.txt", ["NaN" if s is None else str(s) for s in scores])
    if evalset.gold_system_scores is not None:
        (pair_dir / "gold").mkdir(exist_ok=True)
        rows = [f"{name}\t{score}" for name, score in evalset.gold_system_scores.items()]
        dump(pair_dir / "gold" / "sys.tsv", rows)
    return pair_dir


def corpus_fingerprint(evalset: EvalSet) -> str:
    """Content hash of the loaded data, independent of file names or paths."""
    h = hashlib.sha256()

    def feed(tag: str, lines) -> None:
        h.update(tag.encode("utf-8"))
        for line in lines:
            h.update(b"\x1f")
            h.update(line.encode("utf-8"))
        h.update(b"\x1e")

    feed(f"pair:{evalset.pair.code}", [])
    feed("src", evalset.sources)
    if evalset.references is not None:
        feed("ref", evalset.references)
    for name in sorted(evalset.systems):
        feed(f"sys:{name}", evalset.systems[name])
    if evalset.gold_segment_scores is not None:
        for name in sorted(evalset.gold_segment_scores):
            feed(
                f"gold-seg:{name}",
                ["NaN" if s is None else str(s) for s in evalset.gold_segment_scores[name]],
            )
    if evalset.gold_system_scores is not None:
        feed(
            "gold-sys",
            [f"{name}\t{score}" for name, score in sorted(evalset.gold_system_scores.items())],
        )
    return h.hexdigest()
