from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gemba.corpus import LangPair
from gemba.errors import MissingReference, UnexpectedReference, UsageError
from gemba.parsing import CLASS_LABELS, AnswerDomain
from gemba.prompts import (
    PromptVariant,
    all_variants,
    export_templates,
    render,
    template_sha256,
    variant_names,
)

EN_DE = LangPair.from_code("en-de")

_CUES = {"da": "Score:", "sqm": "Score (0-100):", "stars": "Stars:", "classes": "Class:"}


def _render(variant: PromptVariant, source="S", target="T", reference="R"):
    return render(
        variant,
        EN_DE,
        source_seg=source,
        target_seg=target,
        reference_seg=reference if variant.uses_reference else None,
    )


def test_da_ref_header_and_labeled_lines() -> None:
    text = _render(PromptVariant("da", True), "Hello.", "Hallo.", "Hallo.").text
    assert text.startswith(
        "Score the following translation from English to German with respect to "
        "the human reference on a continuous scale from 0 to 100"
    )
    assert 'English source: "Hello."' in text
    assert "German human reference: Hallo." in text
    assert 'German translation: "Hallo."' in text


def test_da_noref_never_mentions_the_reference() -> None:
    text = _render(PromptVariant("da", False)).text
    assert "human reference" not in text


def test_classes_template_lists_all_five_labels() -> None:
    text = _render(PromptVariant("classes", True)).text
    for label in CLASS_LABELS:
        assert f'"{label}"' in text


def test_all_variants_cardinality_and_order() -> None:
    variants = all_variants()
    assert len(variants) == 8
    assert sum(v.uses_reference for v in variants) == 4
    assert all_variants() == variants
    assert variant_names() == [
        "da-ref", "da-noref", "sqm-ref", "sqm-noref",
        "stars-ref", "stars-noref", "classes-ref", "classes-noref",
    ]


def test_every_template_mentions_translation() -> None:
    for variant in all_variants():
        assert "translation" in variant.template


def test_rendering_is_idempotent() -> None:
    for variant in all_variants():
        assert _render(variant).text == _render(variant).text


def test_no_residual_placeholders() -> None:
    for variant in all_variants():
        assert "{" not in _render(variant).text


def test_ref_lines_are_superset_except_header() -> None:
    for kind in ("da", "sqm", "stars", "classes"):
        ref_lines = _render(PromptVariant(kind, True)).text.split("\n")
        noref_lines = _render(PromptVariant(kind, False)).text.split("\n")
        assert len(ref_lines) == len(noref_lines) + 1
        assert ref_lines[0] == noref_lines[0].replace(
            "from English to German", "from English to German with respect to the human reference"
        )
        assert ref_lines[1:3] == noref_lines[1:3]
        assert ref_lines[4:] == noref_lines[3:]
        assert "human reference" in ref_lines[3]


def test_templates_end_at_answer_cue_without_newline() -> None:
    for variant in all_variants():
        rendered = _render(variant).text
        assert rendered.endswith(_CUES[variant.kind])
        assert not rendered.endswith("\n")


def test_reference_argument_matches_mode() -> None:
    with pytest.raises(MissingReference):
        render(PromptVariant("da", True), EN_DE, "S", "T", None)
    with pytest.raises(UnexpectedReference):
        render(PromptVariant("da", False), EN_DE, "S", "T", "R")


def test_substitution_is_single_pass() -> None:
    instance = render(
        PromptVariant("da", False), EN_DE, source_seg="literal {target_seg} stays", target_seg="T"
    )
    assert "literal {target_seg} stays" in instance.text


def test_answer_domains_per_kind() -> None:
    assert PromptVariant("da", True).answer_domain is AnswerDomain.SCORE_0_100
    assert PromptVariant("sqm", False).answer_domain is AnswerDomain.SCORE_0_100
    assert PromptVariant("stars", True).answer_domain is AnswerDomain.STARS_1_5
    assert PromptVariant("classes", False).answer_domain is AnswerDomain.CLASS_LABEL


def test_variant_names_round_trip() -> None:
    for variant in all_variants():
        assert PromptVariant.from_name(variant.name) == variant
    with pytest.raises(UsageError) as excinfo:
        PromptVariant.from_name("da")
    assert "da-ref" in str(excinfo.value)
    with pytest.raises(UsageError):
        PromptVariant("ratings", True)


def test_checked_in_templates_match_constants() -> None:
    repo_templates = Path(__file__).resolve().parent.parent / "templates"
    for variant in all_variants():
        on_disk = (repo_templates / f"{variant.name}.txt").read_text(encoding="utf-8")
        assert on_disk == variant.template


def test_export_templates_round_trips(tmp_path: Path) -> None:
    paths = export_templates(tmp_path)
    assert [p.name for p in paths] == [f"{name}.txt" for name in variant_names()]
    for variant, path in zip(all_variants(), paths):
        assert path.read_text(encoding="utf-8") == variant.template
        assert template_sha256(variant)


_brace_free = st.text(
    alphabet=st.characters(blacklist_characters="{}", blacklist_categories=("Cs",)),
    max_size=60,
)


@settings(max_examples=60, deadline=None)
@given(source=_brace_free, target=_brace_free, reference=_brace_free)
def test_rendered_text_has_no_braces_for_brace_free_segments(source, target, reference) -> None:
    for variant in all_variants():
        text = render(
            variant,
            EN_DE,
            source_seg=source,
            target_seg=target,
            reference_seg=reference if variant.uses_reference else None,
        ).text
        assert "{" not in text and "}" not in text
