"""Per-learner remediation workflow as an explicit, auditable state machine.

The five states and five event kinds form a closed transition table; every
unlisted (state, event) pair is rejected with a diagnostic and the state is
left untouched.  ``apply_event`` is pure: replaying a learner's event log from
NOT_ASSESSED reproduces their current state exactly.

Resolved interpretation points, encoded here:
  * goal satisfaction = passing a micro_test quiz over the open goal concepts,
    or an explicit acknowledgment via the API;
  * a learner whose reminders expire unsatisfied moves to CLEARED with a
    goal-unmet annotation instead of regressing or looping forever;
  * after ``max_attempts`` failed follow-ups the learner is flagged for human
    intervention (the loop itself stays lawful).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from datetime import datetime
from typing import Union

from . import recommender
from .assessment import Classification, GradeReport, Quiz, classify
from .graph import ConceptGraph
from .recommender import Depth, Origin, Recommendation, Reminder, ReminderPolicy

DEFAULT_MAX_ATTEMPTS = 5


class ProgressionError(Exception):
    pass


class IllegalTransitionError(ProgressionError):
    def __init__(self, state: "State", kind: "EventKind", detail: str = ""):
        message = f"event {kind.value} is not legal in state {state.value}"
        if detail:
            message += f": {detail}"
        super().__init__(message)
        self.state = state
        self.kind = kind


class State(enum.Enum):
    NOT_ASSESSED = "not_assessed"
    REMEDIATING = "remediating"
    AWAITING_FOLLOW_UP = "awaiting_follow_up"
    CLEARED_WITH_ADVICE = "cleared_with_advice"
    CLEARED = "cleared"


class EventKind(enum.Enum):
    INITIAL_RESULT = "initial_result"
    UNIT_COMPLETED = "unit_completed"
    FOLLOW_UP_RESULT = "follow_up_result"
    GOAL_SATISFIED = "goal_satisfied"
    REMINDER_FIRED = "reminder_fired"


@dataclass(frozen=True)
class ProgressEvent:
    kind: EventKind
    at: datetime
    report: GradeReport | None = None  # result kinds
    unit_id: str | None = None  # UNIT_COMPLETED
    concepts: tuple[str, ...] = ()  # GOAL_SATISFIED
    reminder_expired: bool = False  # REMINDER_FIRED: this was the final fire

    @classmethod
    def initial_result(cls, report: GradeReport, at: datetime) -> "ProgressEvent":
        return cls(EventKind.INITIAL_RESULT, at, report=report)

    @classmethod
    def follow_up_result(cls, report: GradeReport, at: datetime) -> "ProgressEvent":
        return cls(EventKind.FOLLOW_UP_RESULT, at, report=report)

    @classmethod
    def unit_completed(cls, unit_id: str, at: datetime) -> "ProgressEvent":
        return cls(EventKind.UNIT_COMPLETED, at, unit_id=unit_id)

    @classmethod
    def goal_satisfied(cls, concepts: tuple[str, ...], at: datetime) -> "ProgressEvent":
        return cls(EventKind.GOAL_SATISFIED, at, concepts=concepts)

    @classmethod
    def reminder_fired(cls, at: datetime, expired: bool = False) -> "ProgressEvent":
        return cls(EventKind.REMINDER_FIRED, at, reminder_expired=expired)

    def to_payload(self) -> dict:
        payload: dict = {"kind": self.kind.value}
        if self.report is not None:
            payload["report"] = self.report.to_payload()
        if self.unit_id is not None:
            payload["unit_id"] = self.unit_id
        if self.concepts:
            payload["concepts"] = list(self.concepts)
        if self.kind is EventKind.REMINDER_FIRED:
            payload["reminder_expired"] = self.reminder_expired
        return payload

    @classmethod
    def from_payload(cls, payload: dict, at: datetime) -> "ProgressEvent":
        kind = EventKind(payload["kind"])
        report = None
        if "report" in payload:
            report = GradeReport.from_payload(payload["report"], graded_at=at)
        return cls(
            kind=kind,
            at=at,
            report=report,
            unit_id=payload.get("unit_id"),
            concepts=tuple(payload.get("concepts", ())),
            reminder_expired=bool(payload.get("reminder_expired", False)),
        )


@dataclass(frozen=True)
class LearnerState:
    learner: str
    state: State = State.NOT_ASSESSED
    assigned_units: tuple[str, ...] = ()
    completed_units: frozenset[str] = frozenset()
    attempt_count: int = 0
    open_goal: frozenset[str] = frozenset()
    flagged_for_intervention: bool = False
    goal_unmet: bool = False

    def to_payload(self) -> dict:
        return {
            "learner": self.learner,
            "state": self.state.value,
            "assigned_units": list(self.assigned_units),
            "completed_units": sorted(self.completed_units),
            "attempt_count": self.attempt_count,
            "open_goal": sorted(self.open_goal),
            "flagged_for_intervention": self.flagged_for_intervention,
            "goal_unmet": self.goal_unmet,
        }


# Effects: instructions for the recommender/store layers.


@dataclass(frozen=True)
class RecommendUnits:
    recommendation: Recommendation


@dataclass(frozen=True)
class ScheduleReminder:
    reminder: Reminder


@dataclass(frozen=True)
class MarkRemindersSatisfied:
    concepts: frozenset[str]


@dataclass(frozen=True)
class FlagForIntervention:
    attempt_count: int


@dataclass(frozen=True)
class AnnotateGoalUnmet:
    concepts: frozenset[str]


Effect = Union[
    RecommendUnits,
    ScheduleReminder,
    MarkRemindersSatisfied,
    FlagForIntervention,
    AnnotateGoalUnmet,
]

# The closed set of legal (state, event-kind) pairs; everything else raises.
LEGAL_TRANSITIONS: frozenset[tuple[State, EventKind]] = frozenset(
    {
        (State.NOT_ASSESSED, EventKind.INITIAL_RESULT),
        (State.REMEDIATING, EventKind.UNIT_COMPLETED),
        (State.AWAITING_FOLLOW_UP, EventKind.FOLLOW_UP_RESULT),
        (State.CLEARED_WITH_ADVICE, EventKind.GOAL_SATISFIED),
        (State.CLEARED_WITH_ADVICE, EventKind.REMINDER_FIRED),
    }
)


def _require_report(event: ProgressEvent) -> GradeReport:
    if event.report is None:
        raise ProgressionError(f"event {event.kind.value} requires a grade report")
    return event.report


def _advice_effects(
    state: LearnerState,
    report: GradeReport,
    event: ProgressEvent,
    graph: ConceptGraph,
    depth: Depth,
    reminder_policy: ReminderPolicy,
) -> tuple[LearnerState, list[Effect]]:
    """Shared PASS_WITH_REMEDIATION handling: advise, remind, clear."""
    rec = recommender.recommend(
        report, graph, Origin.FOLLOWUP_REMEDIATION, depth, now=event.at
    )
    effects: list[Effect] = [RecommendUnits(rec)]
    open_goal: frozenset[str] = frozenset()
    if rec.units:
        reminder = recommender.set_reminder(rec, reminder_policy, event.at)
        effects.append(ScheduleReminder(reminder))
        open_goal = frozenset(rec.triggering_concepts)
    new = replace(
        state,
        state=State.CLEARED_WITH_ADVICE,
        assigned_units=(),
        completed_units=frozenset(),
        open_goal=open_goal,
    )
    return new, effects


def apply_event(
    state: LearnerState,
    event: ProgressEvent,
    graph: ConceptGraph,
    quiz: Quiz | None = None,
    *,
    depth: Depth = Depth.DIRECT,
    reminder_policy: ReminderPolicy = ReminderPolicy(),
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
) -> tuple[LearnerState, list[Effect]]:
    """Advance one learner by one event; returns the new state plus effects.

    Raises IllegalTransitionError (state unchanged) for pairs outside the
    transition table.  ``quiz``, when given, cross-checks that the report's
    classification matches its thresholds.
    """
    pair = (state.state, event.kind)
    if pair not in LEGAL_TRANSITIONS:
        raise IllegalTransitionError(state.state, event.kind)

    if event.report is not None and quiz is not None:
        expected = classify(event.report.score, quiz.thresholds)
        if expected is not event.report.classification:
            raise ProgressionError(
                f"report classification {event.report.classification.wire} does not"
                f" match quiz thresholds (expected {expected.wire})"
            )

    if event.kind is EventKind.INITIAL_RESULT:
        report = _require_report(event)
        if report.classification is Classification.PASS:
            return replace(state, state=State.CLEARED), []
        if report.classification is Classification.PASS_WITH_REMEDIATION:
            return _advice_effects(state, report, event, graph, depth, reminder_policy)
        rec = recommender.recommend(
            report, graph, Origin.INITIAL_FAIL, depth, now=event.at
        )
        effects: list[Effect] = [RecommendUnits(rec)]
        if rec.units:
            new = replace(
                state,
                state=State.REMEDIATING,
                assigned_units=rec.units,
                completed_units=frozenset(),
            )
        else:
            # Nothing covers the failed concepts: skip straight to the retake
            # and flag the content gap for a human.
            effects.append(FlagForIntervention(state.attempt_count))
            new = replace(state, state=State.AWAITING_FOLLOW_UP)
        return new, effects

    if event.kind is EventKind.UNIT_COMPLETED:
        if event.unit_id is None:
            raise ProgressionError("unit_completed event carries no unit id")
        if event.unit_id not in state.assigned_units:
            raise IllegalTransitionError(
                state.state, event.kind, f"unit {event.unit_id!r} is not assigned"
            )
        completed = state.completed_units | {event.unit_id}
        if completed.issuperset(state.assigned_units):
            return replace(
                state, state=State.AWAITING_FOLLOW_UP, completed_units=completed
            ), []
        return replace(state, completed_units=completed), []

    if event.kind is EventKind.FOLLOW_UP_RESULT:
        report = _require_report(event)
        attempts = state.attempt_count + 1
        state = replace(state, attempt_count=attempts)
        if report.classification is Classification.PASS:
            return replace(
                state,
                state=State.CLEARED,
                assigned_units=(),
                completed_units=frozenset(),
            ), []
        if report.classification is Classification.PASS_WITH_REMEDIATION:
            return _advice_effects(state, report, event, graph, depth, reminder_policy)
        rec = recommender.recommend(
            report, graph, Origin.FOLLOWUP_FAIL, depth, now=event.at
        )
        effects = [RecommendUnits(rec)]
        flagged = state.flagged_for_intervention
        if attempts >= max_attempts and not flagged:
            effects.append(FlagForIntervention(attempts))
            flagged = True
        if rec.units:
            new = replace(
                state,
                state=State.REMEDIATING,
                assigned_units=rec.units,
                completed_units=frozenset(),
                flagged_for_intervention=flagged,
            )
        else:
            new = replace(
                state,
                state=State.AWAITING_FOLLOW_UP,
                flagged_for_intervention=flagged,
            )
        return new, effects

    if event.kind is EventKind.GOAL_SATISFIED:
        goal = state.open_goal
        return (
            replace(
                state,
                state=State.CLEARED,
                open_goal=frozenset(),
            ),
            [MarkRemindersSatisfied(goal)],
        )

    assert event.kind is EventKind.REMINDER_FIRED
    if event.reminder_expired:
        # Reminders ran out unsatisfied: close out with an annotation rather
        # than nagging forever or regressing.
        goal = state.open_goal
        return (
            replace(
                state,
                state=State.CLEARED,
                open_goal=frozenset(),
                goal_unmet=True,
            ),
            [AnnotateGoalUnmet(goal)],
        )
    return state, []


def replay(
    learner: str,
    events: list[ProgressEvent],
    graph: ConceptGraph,
    quizzes: dict[str, Quiz] | None = None,
    *,
    depth: Depth = Depth.DIRECT,
    reminder_policy: ReminderPolicy = ReminderPolicy(),
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
) -> LearnerState:
    """Fold a learner's progress events from scratch into their current state."""
    state = LearnerState(learner=learner)
    for event in events:
        quiz = None
        if quizzes is not None and event.report is not None:
            quiz = quizzes.get(event.report.quiz_id)
        state, _ = apply_event(
            state,
            event,
            graph,
            quiz,
            depth=depth,
            reminder_policy=reminder_policy,
            max_attempts=max_attempts,
        )
    return state
