"""Weighted, category-tagged multiple-choice grading and three-band classification.

Scores are exact rationals throughout so band boundaries are bit-stable; they
are rendered as decimals only at the presentation edge.  A question scores
all-or-nothing: the chosen set must equal the correct set.  Unanswered
questions count as wrong.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from datetime import datetime
from fractions import Fraction
from pathlib import Path
from typing import Mapping

import yaml

from .timefmt import parse_timestamp


class AssessmentError(Exception):
    pass


class QuizMismatchError(AssessmentError):
    pass


class UnknownQuestionError(AssessmentError):
    pass


class Classification(enum.IntEnum):
    """Outcome bands, ordered so comparisons follow severity."""

    FAIL = 0
    PASS_WITH_REMEDIATION = 1
    PASS = 2

    @property
    def wire(self) -> str:
        return self.name.lower()

    @classmethod
    def from_wire(cls, text: str) -> "Classification":
        return cls[text.upper()]


class QuizKind(enum.Enum):
    INITIAL = "initial"
    FOLLOW_UP = "follow_up"
    MICRO_TEST = "micro_test"


def to_fraction(value) -> Fraction:
    """Exact rational from int, Fraction, 'n/d', or decimal string/float.

    Floats go through their shortest decimal repr, so YAML `0.8` means 8/10,
    not the binary double.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise AssessmentError(f"not a number: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise AssessmentError(f"cannot interpret {value!r} as a rational")


def fraction_str(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


@dataclass(frozen=True)
class Thresholds:
    t_min: Fraction
    t_max: Fraction

    def __post_init__(self):
        if not (0 <= self.t_min < self.t_max <= 1):
            raise AssessmentError(
                f"thresholds must satisfy 0 <= min < max <= 1,"
                f" got ({self.t_min}, {self.t_max})"
            )


# deployment fallback, not pedagogy-derived; override per quiz or in config
DEFAULT_THRESHOLDS = Thresholds(Fraction(1, 2), Fraction(4, 5))


@dataclass(frozen=True)
class Question:
    id: str
    stem: str
    choices: tuple[str, ...]
    correct: frozenset[int]
    concept_id: str
    weight: Fraction = Fraction(1)

    def __post_init__(self):
        if len(self.choices) < 2:
            raise AssessmentError(f"question {self.id}: needs at least 2 choices")
        if not self.correct:
            raise AssessmentError(f"question {self.id}: no correct choice")
        if not all(0 <= i < len(self.choices) for i in self.correct):
            raise AssessmentError(f"question {self.id}: correct index out of range")
        if self.weight <= 0:
            raise AssessmentError(f"question {self.id}: weight must be positive")


@dataclass(frozen=True)
class Quiz:
    id: str
    kind: QuizKind
    questions: tuple[Question, ...]
    thresholds: Thresholds = DEFAULT_THRESHOLDS

    def __post_init__(self):
        if not self.questions:
            raise AssessmentError(f"quiz {self.id}: no questions")
        ids = [q.id for q in self.questions]
        if len(set(ids)) != len(ids):
            raise AssessmentError(f"quiz {self.id}: duplicate question ids")

    def question(self, question_id: str) -> Question:
        for q in self.questions:
            if q.id == question_id:
                return q
        raise UnknownQuestionError(f"quiz {self.id}: unknown question {question_id!r}")


@dataclass(frozen=True)
class Submission:
    learner: str
    quiz_id: str
    answers: Mapping[str, frozenset[int]]
    submitted_at: datetime


@dataclass(frozen=True)
class GradeReport:
    learner: str
    quiz_id: str
    score: Fraction
    per_category: Mapping[str, Fraction]
    wrong_answers: tuple[tuple[str, str], ...]  # (question id, concept id)
    classification: Classification
    graded_at: datetime

    def to_payload(self) -> dict:
        return {
            "learner": self.learner,
            "quiz_id": self.quiz_id,
            "score": float(self.score),
            "score_exact": fraction_str(self.score),
            "per_category": {
                cid: fraction_str(sub) for cid, sub in self.per_category.items()
            },
            "wrong_answers": [
                {"question_id": qid, "concept_id": cid}
                for qid, cid in self.wrong_answers
            ],
            "classification": self.classification.wire,
        }

    @classmethod
    def from_payload(cls, payload: dict, graded_at: datetime) -> "GradeReport":
        return cls(
            learner=payload["learner"],
            quiz_id=payload["quiz_id"],
            score=Fraction(payload["score_exact"]),
            per_category={
                cid: Fraction(sub) for cid, sub in payload["per_category"].items()
            },
            wrong_answers=tuple(
                (w["question_id"], w["concept_id"]) for w in payload["wrong_answers"]
            ),
            classification=Classification.from_wire(payload["classification"]),
            graded_at=graded_at,
        )


def classify(score: Fraction, thresholds: Thresholds) -> Classification:
    """Lower-inclusive bands: [0,min) fail, [min,max) pass-with-remediation,
    [max,1] pass."""
    if not 0 <= score <= 1:
        raise AssessmentError(f"score must be within [0,1], got {score}")
    if score < thresholds.t_min:
        return Classification.FAIL
    if score < thresholds.t_max:
        return Classification.PASS_WITH_REMEDIATION
    return Classification.PASS


def grade(quiz: Quiz, submission: Submission) -> GradeReport:
    """Exact-match scoring per question, weighted aggregate, per-category
    subscores, and the resulting band."""
    if submission.quiz_id != quiz.id:
        raise QuizMismatchError(
            f"submission targets quiz {submission.quiz_id!r}, grading {quiz.id!r}"
        )
    known = {q.id for q in quiz.questions}
    for qid in submission.answers:
        if qid not in known:
            raise UnknownQuestionError(f"quiz {quiz.id}: unknown question {qid!r}")

    total_weight = Fraction(0)
    earned = Fraction(0)
    cat_weight: dict[str, Fraction] = {}
    cat_earned: dict[str, Fraction] = {}
    wrong: list[tuple[str, str]] = []
    for question in quiz.questions:
        chosen = frozenset(submission.answers.get(question.id, frozenset()))
        is_correct = chosen == question.correct
        total_weight += question.weight
        cat_weight[question.concept_id] = (
            cat_weight.get(question.concept_id, Fraction(0)) + question.weight
        )
        if is_correct:
            earned += question.weight
            cat_earned[question.concept_id] = (
                cat_earned.get(question.concept_id, Fraction(0)) + question.weight
            )
        else:
            wrong.append((question.id, question.concept_id))
    score = earned / total_weight
    per_category = {
        cid: cat_earned.get(cid, Fraction(0)) / cat_weight[cid] for cid in cat_weight
    }
    return GradeReport(
        learner=submission.learner,
        quiz_id=quiz.id,
        score=score,
        per_category=per_category,
        wrong_answers=tuple(wrong),
        classification=classify(score, quiz.thresholds),
        graded_at=submission.submitted_at,
    )


def sample_questions(quiz: Quiz, k: int, seed: int) -> Quiz:
    """Deterministic k-of-n question sample (quiz order preserved)."""
    if not 0 < k <= len(quiz.questions):
        raise AssessmentError(
            f"cannot sample {k} of {len(quiz.questions)} questions"
        )
    rng = random.Random(seed)
    picked = sorted(rng.sample(range(len(quiz.questions)), k))
    return Quiz(
        id=quiz.id,
        kind=quiz.kind,
        questions=tuple(quiz.questions[i] for i in picked),
        thresholds=quiz.thresholds,
    )


# -- quiz definition files (YAML, one quiz per file) -------------------------


def quiz_from_mapping(
    data: Mapping, default_thresholds: Thresholds = DEFAULT_THRESHOLDS
) -> Quiz:
    try:
        thresholds = default_thresholds
        if "thresholds" in data:
            thresholds = Thresholds(
                to_fraction(data["thresholds"]["min"]),
                to_fraction(data["thresholds"]["max"]),
            )
        questions = tuple(
            Question(
                id=q["id"],
                stem=q["stem"],
                choices=tuple(q["choices"]),
                correct=frozenset(int(i) for i in q["correct"]),
                concept_id=q["concept"],
                weight=to_fraction(q.get("weight", 1)),
            )
            for q in data["questions"]
        )
        return Quiz(
            id=data["id"],
            kind=QuizKind(data["kind"]),
            questions=questions,
            thresholds=thresholds,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise AssessmentError(f"bad quiz definition: {exc}") from exc


def load_quiz(
    path: str | Path, default_thresholds: Thresholds = DEFAULT_THRESHOLDS
) -> Quiz:
    with open(path, "r", encoding="utf-8") as handle:
        data = yaml.safe_load(handle)
    if not isinstance(data, Mapping):
        raise AssessmentError(f"{path}: quiz file must contain a mapping")
    return quiz_from_mapping(data, default_thresholds)


def submission_from_payload(payload: Mapping, learner: str | None = None) -> Submission:
    try:
        answers = {
            qid: frozenset(int(i) for i in chosen)
            for qid, chosen in payload["answers"].items()
        }
        return Submission(
            learner=learner if learner is not None else payload["learner"],
            quiz_id=payload["quiz_id"],
            answers=answers,
            submitted_at=parse_timestamp(payload["submitted_at"]),
        )
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise AssessmentError(f"bad submission: {exc}") from exc
