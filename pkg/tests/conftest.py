import json
from pathlib import Path

import pytest

from microadapt.assessment import load_quiz
from microadapt.graph import parse_mindmap

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

THREE_CONCEPT_DOC = """\
concept vec "Vectors" kind=prerequisite
concept mat "Matrices" kind=prerequisite
concept xform "Transformations" kind=course_topic
requires xform <- vec
requires xform <- mat
unit u-vec-01 "Vector basics" covers vec kind=video minutes=8 uri="oer://vec"
"""


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def basic_graph():
    return parse_mindmap((FIXTURES / "graph_basic.mmap").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def three_concept_graph():
    return parse_mindmap(THREE_CONCEPT_DOC)


@pytest.fixture(scope="session")
def initial_quiz():
    return load_quiz(FIXTURES / "quizzes" / "ecg-initial.yaml")


@pytest.fixture(scope="session")
def followup_quiz():
    return load_quiz(FIXTURES / "quizzes" / "ecg-followup.yaml")


@pytest.fixture(scope="session")
def all_wrong_submission():
    return json.loads(
        (FIXTURES / "submissions" / "initial_all_wrong.json").read_text("utf-8")
    )
