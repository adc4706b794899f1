"""Seeded synthetic cohorts driven through the real remediation loop.

The learner model is deliberately minimal: a per-concept mastery level m in
[0, 1] plus a guessing floor g (default 1/number-of-choices).  A question on
concept c is answered correctly with probability g + (1-g)*m(c); studying a
unit lifts every covered concept by m' = m + gain*(1-m).  Under this model
remediation provably helps, which gives the cohort metrics analytic oracles.

Randomness comes from ``random.Random`` (MT19937) seeded per scenario, and
only ``random()`` is drawn from it, so streams are reproducible across
platforms and Python versions.  Cohorts run single-threaded; metrics
serialization is canonical, so identical scenarios produce byte-identical
output.
"""

from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass
from datetime import timedelta
from fractions import Fraction
from pathlib import Path
from typing import Mapping

import yaml

from . import progression
from .assessment import (
    Classification,
    GradeReport,
    Question,
    Quiz,
    Submission,
    fraction_str,
    grade,
    load_quiz,
)
from .graph import ConceptGraph, parse_mindmap
from .progression import LearnerState, ProgressEvent, State
from .recommender import Depth
from .timefmt import parse_timestamp


class ScenarioError(Exception):
    pass


@dataclass
class SimulatedLearner:
    id: str
    mastery: dict[str, float]
    guess_rate: float | None = None  # None -> 1/len(choices) per question

    def __post_init__(self):
        for cid, level in self.mastery.items():
            if not 0.0 <= level <= 1.0:
                raise ScenarioError(
                    f"learner {self.id}: mastery for {cid} outside [0,1]: {level}"
                )


@dataclass(frozen=True)
class MasteryDistribution:
    """Initial mastery sampler; only stream-stable kinds are offered."""

    kind: str = "uniform"  # "uniform" or "constant"
    low: float = 0.0
    high: float = 1.0
    value: float = 0.0

    def draw(self, rng: random.Random) -> float:
        if self.kind == "uniform":
            return self.low + (self.high - self.low) * rng.random()
        if self.kind == "constant":
            return self.value
        raise ScenarioError(f"unknown mastery distribution {self.kind!r}")


@dataclass(frozen=True)
class Scenario:
    graph_path: str
    quiz_path: str
    cohort_size: int
    learning_gain: float  # delta in (0,1]; 0 allowed as a no-learning control
    max_iterations: int
    seed: int
    mastery: MasteryDistribution = MasteryDistribution()
    guess_rate: float | None = None
    depth: Depth = Depth.DIRECT

    def __post_init__(self):
        if self.cohort_size < 0:
            raise ScenarioError("cohort size must be >= 0")
        if not 0.0 <= self.learning_gain <= 1.0:
            raise ScenarioError("learning gain must be within [0,1]")
        if self.max_iterations < 0:
            raise ScenarioError("max iterations must be >= 0")


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as handle:
        data = yaml.safe_load(handle)
    if not isinstance(data, Mapping):
        raise ScenarioError(f"{path}: scenario file must contain a mapping")
    try:
        mastery = MasteryDistribution(**data.get("mastery", {}))
        return Scenario(
            graph_path=str((path.parent / data["graph"]).resolve()),
            quiz_path=str((path.parent / data["quiz"]).resolve()),
            cohort_size=int(data["cohort_size"]),
            learning_gain=float(data["learning_gain"]),
            max_iterations=int(data["max_iterations"]),
            seed=int(data["seed"]),
            mastery=mastery,
            guess_rate=(
                float(data["guess_rate"]) if data.get("guess_rate") is not None else None
            ),
            depth=Depth(data.get("depth", "direct")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"{path}: bad scenario: {exc}") from exc


def _uniform_index(rng: random.Random, n: int) -> int:
    # floor(random()*n) keeps the stream stable across Python versions,
    # unlike randrange.
    return min(int(rng.random() * n), n - 1)


def question_guess_rate(question: Question, guess_rate: float | None) -> float:
    return guess_rate if guess_rate is not None else 1.0 / len(question.choices)


def correct_probability(
    learner: SimulatedLearner, question: Question, guess_rate: float | None = None
) -> float:
    m = learner.mastery[question.concept_id]
    g = question_guess_rate(question, learner.guess_rate if guess_rate is None else guess_rate)
    return g + (1.0 - g) * m


def answer(
    learner: SimulatedLearner, question: Question, rng: random.Random
) -> frozenset[int]:
    """Chosen indices: the correct set with probability g + (1-g)*m, else a
    uniformly chosen wrong choice-set."""
    p = correct_probability(learner, question)
    if rng.random() < p:
        return frozenset(question.correct)
    wrong_sets = _wrong_choice_sets(question)
    return wrong_sets[_uniform_index(rng, len(wrong_sets))]


def _wrong_choice_sets(question: Question) -> list[frozenset[int]]:
    indices = range(len(question.choices))
    sets = []
    for size in range(1, len(question.choices) + 1):
        for combo in itertools.combinations(indices, size):
            candidate = frozenset(combo)
            if candidate != question.correct:
                sets.append(candidate)
    return sets


def study(
    learner: SimulatedLearner, unit_covers: tuple[str, ...], gain: float
) -> SimulatedLearner:
    """New learner with every covered concept lifted by m' = m + gain*(1-m)."""
    mastery = dict(learner.mastery)
    for cid in unit_covers:
        m = mastery.get(cid, 0.0)
        mastery[cid] = m + gain * (1.0 - m)
    return SimulatedLearner(
        id=learner.id, mastery=mastery, guess_rate=learner.guess_rate
    )


def expected_quiz_score(
    learner: SimulatedLearner, quiz: Quiz
) -> float:
    """Analytic E[score] under the answer model: weighted mean of per-question
    correct probabilities."""
    total = sum(float(q.weight) for q in quiz.questions)
    return (
        sum(float(q.weight) * correct_probability(learner, q) for q in quiz.questions)
        / total
    )


def quiz_score_variance(learner: SimulatedLearner, quiz: Quiz) -> float:
    """Var[score] under the answer model (independent Bernoulli questions)."""
    total = sum(float(q.weight) for q in quiz.questions)
    var = 0.0
    for q in quiz.questions:
        p = correct_probability(learner, q)
        var += (float(q.weight) / total) ** 2 * p * (1.0 - p)
    return var


@dataclass
class IterationMetrics:
    iteration: int  # 0 = initial evaluation
    evaluations: int
    mean_score: Fraction | None
    band_counts: dict[str, int]

    def to_payload(self) -> dict:
        return {
            "iteration": self.iteration,
            "evaluations": self.evaluations,
            "mean_score": None if self.mean_score is None else fraction_str(self.mean_score),
            "mean_score_float": None if self.mean_score is None else float(self.mean_score),
            "band_counts": self.band_counts,
        }


@dataclass
class CohortMetrics:
    scenario_seed: int
    cohort_size: int
    learning_gain: float
    iterations: list[IterationMetrics]
    attempts_histogram: dict[int, int]
    final_states: dict[str, int]
    final_classifications: dict[str, int]

    @property
    def initial_pass_fraction(self) -> float:
        if not self.iterations or self.cohort_size == 0:
            return 0.0
        return self.iterations[0].band_counts.get("pass", 0) / self.cohort_size

    @property
    def final_pass_fraction(self) -> float:
        if self.cohort_size == 0:
            return 0.0
        return self.final_classifications.get("pass", 0) / self.cohort_size

    def to_payload(self) -> dict:
        return {
            "seed": self.scenario_seed,
            "cohort_size": self.cohort_size,
            "learning_gain": self.learning_gain,
            "iterations": [it.to_payload() for it in self.iterations],
            "attempts_histogram": {
                str(k): v for k, v in sorted(self.attempts_histogram.items())
            },
            "final_states": dict(sorted(self.final_states.items())),
            "final_classifications": dict(sorted(self.final_classifications.items())),
            "initial_pass_fraction": self.initial_pass_fraction,
            "final_pass_fraction": self.final_pass_fraction,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_payload(), indent=2, sort_keys=True) + "\n"

    def iterations_csv(self) -> str:
        lines = ["iteration,evaluations,mean_score,fail,pass_with_remediation,pass"]
        for it in self.iterations:
            mean = "" if it.mean_score is None else f"{float(it.mean_score):.6f}"
            lines.append(
                f"{it.iteration},{it.evaluations},{mean},"
                f"{it.band_counts.get('fail', 0)},"
                f"{it.band_counts.get('pass_with_remediation', 0)},"
                f"{it.band_counts.get('pass', 0)}"
            )
        return "\n".join(lines) + "\n"


def _simulate_submission(
    learner: SimulatedLearner, quiz: Quiz, rng: random.Random, at
) -> Submission:
    answers = {q.id: answer(learner, q, rng) for q in quiz.questions}
    return Submission(
        learner=learner.id, quiz_id=quiz.id, answers=answers, submitted_at=at
    )


def build_cohort(
    scenario: Scenario, graph: ConceptGraph, rng: random.Random
) -> list[SimulatedLearner]:
    learners = []
    width = max(4, len(str(scenario.cohort_size)))
    for i in range(scenario.cohort_size):
        mastery = {
            cid: scenario.mastery.draw(rng) for cid in graph.concepts
        }
        learners.append(
            SimulatedLearner(
                id=f"sim-{i:0{width}d}",
                mastery=mastery,
                guess_rate=scenario.guess_rate,
            )
        )
    return learners


def run_cohort(scenario: Scenario) -> CohortMetrics:
    """Drive a full cohort through grade/apply_event until cleared or the
    iteration budget runs out; deterministic given the scenario seed."""
    try:
        graph = parse_mindmap(Path(scenario.graph_path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ScenarioError(f"cannot read graph {scenario.graph_path}: {exc}") from exc
    try:
        quiz = load_quiz(scenario.quiz_path)
    except OSError as exc:
        raise ScenarioError(f"cannot read quiz {scenario.quiz_path}: {exc}") from exc
    missing = {q.concept_id for q in quiz.questions} - set(graph.concepts)
    if missing:
        raise ScenarioError(
            f"quiz {quiz.id} references concepts missing from the graph:"
            f" {', '.join(sorted(missing))}"
        )

    rng = random.Random(scenario.seed)
    learners = build_cohort(scenario, graph, rng)
    clock = parse_timestamp("2026-01-05T09:00:00Z")
    step = timedelta(hours=1)

    states: dict[str, LearnerState] = {
        learner.id: LearnerState(learner=learner.id) for learner in learners
    }
    scores: dict[int, list[Fraction]] = {}
    bands: dict[int, dict[str, int]] = {}
    last_classification: dict[str, Classification] = {}
    attempts_histogram: dict[int, int] = {}

    def record(iteration: int, report: GradeReport) -> None:
        scores.setdefault(iteration, []).append(report.score)
        band = bands.setdefault(
            iteration, {"fail": 0, "pass_with_remediation": 0, "pass": 0}
        )
        band[report.classification.wire] += 1
        last_classification[report.learner] = report.classification

    # iteration 0: initial evaluation for the whole cohort
    for learner in learners:
        submission = _simulate_submission(learner, quiz, rng, clock)
        report = grade(quiz, submission)
        record(0, report)
        states[learner.id], _ = progression.apply_event(
            states[learner.id],
            ProgressEvent.initial_result(report, clock),
            graph,
            quiz,
            depth=scenario.depth,
        )

    by_id = {learner.id: learner for learner in learners}
    for iteration in range(1, scenario.max_iterations + 1):
        clock = clock + step
        active = [
            learner
            for learner in learners
            if states[learner.id].state
            in (State.REMEDIATING, State.AWAITING_FOLLOW_UP)
        ]
        if not active:
            break
        for learner in active:
            state = states[learner.id]
            if state.state is State.REMEDIATING:
                updated = learner
                for unit_id in state.assigned_units:
                    unit = graph.units[unit_id]
                    updated = study(updated, unit.covers, scenario.learning_gain)
                    state, _ = progression.apply_event(
                        state,
                        ProgressEvent.unit_completed(unit_id, clock),
                        graph,
                        quiz,
                        depth=scenario.depth,
                    )
                by_id[learner.id] = updated
                learner = updated
            submission = _simulate_submission(learner, quiz, rng, clock)
            report = grade(quiz, submission)
            record(iteration, report)
            state, _ = progression.apply_event(
                state,
                ProgressEvent.follow_up_result(report, clock),
                graph,
                quiz,
                depth=scenario.depth,
            )
            states[learner.id] = state
        learners = [by_id[learner.id] for learner in learners]

    iterations = []
    for iteration in sorted(scores):
        these = scores[iteration]
        mean = sum(these, start=Fraction(0)) / len(these) if these else None
        iterations.append(
            IterationMetrics(
                iteration=iteration,
                evaluations=len(these),
                mean_score=mean,
                band_counts=bands[iteration],
            )
        )
    final_states: dict[str, int] = {}
    for state in states.values():
        final_states[state.state.value] = final_states.get(state.state.value, 0) + 1
        attempts_histogram[state.attempt_count] = (
            attempts_histogram.get(state.attempt_count, 0) + 1
        )
    final_classifications: dict[str, int] = {}
    for classification in last_classification.values():
        final_classifications[classification.wire] = (
            final_classifications.get(classification.wire, 0) + 1
        )
    return CohortMetrics(
        scenario_seed=scenario.seed,
        cohort_size=scenario.cohort_size,
        learning_gain=scenario.learning_gain,
        iterations=iterations,
        attempts_histogram=attempts_histogram,
        final_states=final_states,
        final_classifications=final_classifications,
    )
