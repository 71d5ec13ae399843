from __future__ import annotations

from decimal import Decimal
from pathlib import Path

import pytest

from gemba.backend import BackendConfig
from gemba.corpus import EvalSet, LangPair, write_evalset
from synthetic_corpus import write_corpus


@pytest.fixture
def mock_config() -> BackendConfig:
    return BackendConfig(kind="mock")


@pytest.fixture
def tiny_evalset() -> EvalSet:
    return EvalSet(
        pair=LangPair.from_code("en-de"),
        sources=("Hello there.", "Good morning.", "See you."),
        references=("Hallo.", "Guten Morgen.", "Bis bald."),
        systems={
            "alpha": ("Hallo da.", "Guten Morgen.", "Bis bald."),
            "beta": ("Hi.", "Morgen.", "Man sieht sich."),
        },
        gold_segment_scores={
            "alpha": (Decimal("0"), Decimal("-1"), Decimal("0")),
            "beta": (Decimal("-5"), Decimal("-1"), None),
        },
        gold_system_scores={"alpha": Decimal("-0.33"), "beta": Decimal("-3.0")},
    )


@pytest.fixture
def corpus_root(tmp_path: Path, tiny_evalset: EvalSet) -> Path:
    root = tmp_path / "data"
    write_evalset(tiny_evalset, root)
    return root


@pytest.fixture(scope="session")
def wmt_corpus(tmp_path_factory: pytest.TempPathFactory) -> Path:
    """3 language pairs x 54 systems x 200 segments, seeded and tie-free."""
    root = tmp_path_factory.mktemp("wmt-corpus")
    return write_corpus(root)
