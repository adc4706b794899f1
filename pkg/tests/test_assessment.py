from datetime import datetime, timezone
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from microadapt.assessment import (
    AssessmentError,
    Classification,
    Question,
    Quiz,
    QuizKind,
    QuizMismatchError,
    Submission,
    Thresholds,
    UnknownQuestionError,
    classify,
    grade,
    quiz_from_mapping,
    sample_questions,
    to_fraction,
)

NOW = datetime(2026, 2, 2, 9, 0, 0, tzinfo=timezone.utc)


def make_question(qid, concept="vec", weight=1, correct=(0,), n_choices=4):
    return Question(
        id=qid,
        stem=f"stem {qid}",
        choices=tuple(f"choice {i}" for i in range(n_choices)),
        correct=frozenset(correct),
        concept_id=concept,
        weight=to_fraction(weight),
    )


def make_quiz(questions, t_min="0.5", t_max="0.8", kind=QuizKind.INITIAL):
    return Quiz(
        id="quiz-x",
        kind=kind,
        questions=tuple(questions),
        thresholds=Thresholds(to_fraction(t_min), to_fraction(t_max)),
    )


def submit(quiz, answers):
    return Submission(
        learner="p-1", quiz_id=quiz.id, answers=answers, submitted_at=NOW
    )


class TestClassify:
    @pytest.mark.parametrize(
        "score,expected",
        [
            ("0", Classification.FAIL),
            ("0.3", Classification.FAIL),
            ("0.49", Classification.FAIL),
            ("0.5", Classification.PASS_WITH_REMEDIATION),
            ("0.79", Classification.PASS_WITH_REMEDIATION),
            ("0.8", Classification.PASS),
            ("1", Classification.PASS),
        ],
    )
    def test_bands_at_default_thresholds(self, score, expected):
        thresholds = Thresholds(Fraction(1, 2), Fraction(4, 5))
        assert classify(Fraction(score), thresholds) is expected

    def test_invalid_thresholds(self):
        with pytest.raises(AssessmentError):
            Thresholds(Fraction(4, 5), Fraction(1, 2))
        with pytest.raises(AssessmentError):
            Thresholds(Fraction(1, 2), Fraction(1, 2))

    def test_score_out_of_range(self):
        with pytest.raises(AssessmentError):
            classify(Fraction(3, 2), Thresholds(Fraction(1, 2), Fraction(4, 5)))

    @given(
        s1=st.fractions(min_value=0, max_value=1),
        s2=st.fractions(min_value=0, max_value=1),
        t_min=st.fractions(min_value=0, max_value=1, max_denominator=50),
        t_max=st.fractions(min_value=0, max_value=1, max_denominator=50),
    )
    def test_monotone_in_score(self, s1, s2, t_min, t_max):
        if not t_min < t_max:
            return
        thresholds = Thresholds(t_min, t_max)
        lo, hi = sorted((s1, s2))
        assert classify(lo, thresholds) <= classify(hi, thresholds)


class TestGrade:
    def test_all_correct_passes(self):
        quiz = make_quiz([make_question(f"q{i}") for i in range(4)])
        report = grade(quiz, submit(quiz, {f"q{i}": frozenset({0}) for i in range(4)}))
        assert report.score == 1
        assert report.wrong_answers == ()
        assert report.classification is Classification.PASS

    def test_all_wrong_fails(self):
        quiz = make_quiz([make_question(f"q{i}") for i in range(4)])
        report = grade(quiz, submit(quiz, {f"q{i}": frozenset({1}) for i in range(4)}))
        assert report.score == 0
        assert report.classification is Classification.FAIL
        assert len(report.wrong_answers) == 4

    def test_weighted_sum(self):
        # weights (2,1,1); correct on the weight-2 and one weight-1 question
        quiz = make_quiz(
            [
                make_question("q1", weight=2),
                make_question("q2", weight=1),
                make_question("q3", weight=1),
            ]
        )
        report = grade(
            quiz,
            submit(
                quiz,
                {"q1": frozenset({0}), "q2": frozenset({0}), "q3": frozenset({1})},
            ),
        )
        assert report.score == Fraction(3, 4)

    def test_unanswered_counts_as_wrong(self):
        quiz = make_quiz([make_question("q1"), make_question("q2")])
        report = grade(quiz, submit(quiz, {"q1": frozenset({0})}))
        assert report.score == Fraction(1, 2)
        assert report.wrong_answers == (("q2", "vec"),)

    def test_multi_answer_all_or_nothing(self):
        quiz = make_quiz([make_question("q1", correct=(0, 2))])
        partial = grade(quiz, submit(quiz, {"q1": frozenset({0})}))
        assert partial.score == 0
        exact = grade(quiz, submit(quiz, {"q1": frozenset({0, 2})}))
        assert exact.score == 1

    def test_per_category_subscores(self):
        quiz = make_quiz(
            [
                make_question("q1", concept="vec", weight=2),
                make_question("q2", concept="vec"),
                make_question("q3", concept="mat"),
            ]
        )
        report = grade(
            quiz,
            submit(
                quiz,
                {"q1": frozenset({0}), "q2": frozenset({1}), "q3": frozenset({0})},
            ),
        )
        assert report.per_category == {"vec": Fraction(2, 3), "mat": Fraction(1)}

    def test_quiz_mismatch(self):
        quiz = make_quiz([make_question("q1")])
        submission = Submission(
            learner="p-1", quiz_id="other", answers={}, submitted_at=NOW
        )
        with pytest.raises(QuizMismatchError):
            grade(quiz, submission)

    def test_unknown_question_rejected(self):
        quiz = make_quiz([make_question("q1")])
        with pytest.raises(UnknownQuestionError):
            grade(quiz, submit(quiz, {"ghost": frozenset({0})}))

    def test_classification_matches_classify(self):
        quiz = make_quiz([make_question(f"q{i}") for i in range(4)])
        for n_correct in range(5):
            answers = {
                f"q{i}": frozenset({0 if i < n_correct else 1}) for i in range(4)
            }
            report = grade(quiz, submit(quiz, answers))
            assert report.classification is classify(report.score, quiz.thresholds)


@st.composite
def quiz_and_answers(draw):
    n = draw(st.integers(min_value=1, max_value=8))
    weights = draw(
        st.lists(
            st.fractions(min_value=Fraction(1, 10), max_value=10, max_denominator=20),
            min_size=n,
            max_size=n,
        )
    )
    concepts = draw(
        st.lists(st.sampled_from(["vec", "mat", "dot"]), min_size=n, max_size=n)
    )
    questions = [
        make_question(f"q{i}", concept=concepts[i], weight=weights[i])
        for i in range(n)
    ]
    answers = {
        f"q{i}": frozenset({draw(st.integers(min_value=0, max_value=3))})
        for i in range(n)
    }
    return make_quiz(questions), answers


class TestGradeProperties:
    @settings(max_examples=80, deadline=None)
    @given(data=quiz_and_answers(), scale=st.fractions(
        min_value=Fraction(1, 7), max_value=12, max_denominator=30))
    def test_score_invariant_under_weight_scaling(self, data, scale):
        quiz, answers = data
        report = grade(quiz, submit(quiz, answers))
        scaled = make_quiz(
            [
                Question(
                    id=q.id,
                    stem=q.stem,
                    choices=q.choices,
                    correct=q.correct,
                    concept_id=q.concept_id,
                    weight=q.weight * scale,
                )
                for q in quiz.questions
            ]
        )
        scaled_report = grade(scaled, submit(scaled, answers))
        assert scaled_report.score == report.score

    @settings(max_examples=80, deadline=None)
    @given(data=quiz_and_answers())
    def test_category_shares_recompose_total(self, data):
        quiz, answers = data
        report = grade(quiz, submit(quiz, answers))
        total_weight = sum((q.weight for q in quiz.questions), start=Fraction(0))
        share_sum = Fraction(0)
        for concept_id, subscore in report.per_category.items():
            cat_weight = sum(
                (q.weight for q in quiz.questions if q.concept_id == concept_id),
                start=Fraction(0),
            )
            share_sum += (cat_weight / total_weight) * subscore
        assert share_sum == report.score

    @settings(max_examples=80, deadline=None)
    @given(data=quiz_and_answers())
    def test_wrong_answers_are_exactly_incorrect(self, data):
        quiz, answers = data
        report = grade(quiz, submit(quiz, answers))
        wrong_ids = {qid for qid, _ in report.wrong_answers}
        for question in quiz.questions:
            is_wrong = answers.get(question.id, frozenset()) != question.correct
            assert (question.id in wrong_ids) == is_wrong


class TestQuestionInvariants:
    def test_needs_two_choices(self):
        with pytest.raises(AssessmentError):
            make_question("q1", n_choices=1)

    def test_correct_in_range(self):
        with pytest.raises(AssessmentError):
            make_question("q1", correct=(9,))

    def test_positive_weight(self):
        with pytest.raises(AssessmentError):
            make_question("q1", weight=0)

    def test_empty_quiz_rejected(self):
        with pytest.raises(AssessmentError):
            make_quiz([])


class TestSampleQuestions:
    def test_deterministic_and_order_preserving(self):
        quiz = make_quiz([make_question(f"q{i}") for i in range(6)])
        a = sample_questions(quiz, 3, seed=5)
        b = sample_questions(quiz, 3, seed=5)
        assert [q.id for q in a.questions] == [q.id for q in b.questions]
        positions = [int(q.id[1:]) for q in a.questions]
        assert positions == sorted(positions)

    def test_bad_k(self):
        quiz = make_quiz([make_question("q1")])
        with pytest.raises(AssessmentError):
            sample_questions(quiz, 2, seed=1)


class TestQuizFiles:
    def test_fixture_quiz_loads(self, initial_quiz):
        assert initial_quiz.id == "ecg-initial"
        assert initial_quiz.kind is QuizKind.INITIAL
        assert initial_quiz.thresholds == Thresholds(Fraction(1, 2), Fraction(4, 5))
        assert initial_quiz.question("q-vec-add").weight == 2

    def test_bad_mapping_raises(self):
        with pytest.raises(AssessmentError):
            quiz_from_mapping({"id": "x"})

    def test_float_thresholds_parse_exactly(self):
        data = {
            "id": "t",
            "kind": "initial",
            "thresholds": {"min": 0.5, "max": 0.8},
            "questions": [
                {
                    "id": "q1",
                    "stem": "s",
                    "choices": ["a", "b"],
                    "correct": [0],
                    "concept": "vec",
                }
            ],
        }
        quiz = quiz_from_mapping(data)
        assert quiz.thresholds.t_min == Fraction(1, 2)
        assert quiz.thresholds.t_max == Fraction(4, 5)
