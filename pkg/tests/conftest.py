from __future__ import annotations

from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import strategies as st

from probref.subdist import SubDist

ROOT = Path(__file__).resolve().parents[1]
CORPUS = ROOT / "src" / "probref" / "corpus" / "data"
SCHEMAS = ROOT / "src" / "probref" / "schemas"


@st.composite
def subdists(draw, outcomes=st.integers(0, 3), max_size: int = 4, full: bool | None = None):
    """Small sub-distributions with exact rational weights."""
    keys = draw(st.lists(outcomes, max_size=max_size, unique=True))
    weights = [draw(st.integers(1, 6)) for _ in keys]
    slack = 0 if full else draw(st.integers(0 if full is None else 1, 6))
    total = sum(weights) + slack
    if total == 0:
        return SubDist({})
    return SubDist({k: Fraction(w, total) for k, w in zip(keys, weights)})


@st.composite
def relations(draw, left=range(4), right=range(4)):
    return {(a, b) for a in left for b in right if draw(st.booleans())}


@st.composite
def kernels(draw, outcomes=st.integers(0, 3)):
    """A random finite map from 0..3 to sub-distributions, used as a bind continuation."""
    table = {a: draw(subdists(outcomes)) for a in range(4)}
    return lambda a: table[a]


@pytest.fixture
def corpus_dir() -> Path:
    return CORPUS


def read_program(name: str, file: str = "program.rml") -> str:
    return (CORPUS / name / file).read_text(encoding="utf-8")
