"""Map wrong answers to concepts, find covering units, and schedule reminders.

``recommend`` is a pure function of its inputs: the same report and graph
always produce the same ordered unit list.  One aggregated recommendation is
emitted per evaluation (wrong-answer concepts are deduplicated) so a learner
gets a single reminder stream instead of one per missed question.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from datetime import datetime, timedelta

from .assessment import GradeReport
from .graph import ConceptGraph
from .timefmt import format_timestamp, parse_timestamp


class RecommenderError(Exception):
    pass


class EmptyRecommendationError(RecommenderError):
    """Nothing to remind: the recommendation carries no units."""


class Origin(enum.Enum):
    INITIAL_FAIL = "initial_fail"
    FOLLOWUP_FAIL = "followup_fail"
    FOLLOWUP_REMEDIATION = "followup_remediation"


class Depth(enum.Enum):
    DIRECT = "direct"
    WITH_PREREQUISITES = "with_prerequisites"


class ReminderStatus(enum.Enum):
    ACTIVE = "active"
    SATISFIED = "satisfied"
    EXPIRED = "expired"


@dataclass(frozen=True)
class Recommendation:
    learner: str
    generated_at: datetime
    triggering_concepts: tuple[str, ...]
    units: tuple[str, ...]
    origin: Origin

    def to_payload(self) -> dict:
        return {
            "learner": self.learner,
            "generated_at": format_timestamp(self.generated_at),
            "triggering_concepts": list(self.triggering_concepts),
            "units": list(self.units),
            "origin": self.origin.value,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "Recommendation":
        return cls(
            learner=payload["learner"],
            generated_at=parse_timestamp(payload["generated_at"]),
            triggering_concepts=tuple(payload["triggering_concepts"]),
            units=tuple(payload["units"]),
            origin=Origin(payload["origin"]),
        )


@dataclass(frozen=True)
class ReminderPolicy:
    interval: timedelta = timedelta(hours=48)
    cap: int = 10

    def __post_init__(self):
        if self.interval <= timedelta(0):
            raise RecommenderError("reminder interval must be positive")
        if self.cap < 1:
            raise RecommenderError("reminder cap must be at least 1")


@dataclass
class Reminder:
    learner: str
    recommendation: Recommendation
    interval: timedelta
    next_fire: datetime
    cap: int
    fired_count: int = 0
    status: ReminderStatus = ReminderStatus.ACTIVE

    def to_payload(self) -> dict:
        return {
            "learner": self.learner,
            "recommendation": self.recommendation.to_payload(),
            "interval_seconds": int(self.interval.total_seconds()),
            "next_fire": format_timestamp(self.next_fire),
            "cap": self.cap,
            "fired_count": self.fired_count,
            "status": self.status.value,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "Reminder":
        return cls(
            learner=payload["learner"],
            recommendation=Recommendation.from_payload(payload["recommendation"]),
            interval=timedelta(seconds=payload["interval_seconds"]),
            next_fire=parse_timestamp(payload["next_fire"]),
            cap=payload["cap"],
            fired_count=payload["fired_count"],
            status=ReminderStatus(payload["status"]),
        )


@dataclass(frozen=True)
class ReminderFire:
    """One reminder firing, ready for the store to append."""

    learner: str
    fired_at: datetime
    units: tuple[str, ...]
    fired_count: int
    expired: bool


def recommend(
    report: GradeReport,
    graph: ConceptGraph,
    origin: Origin,
    depth: Depth = Depth.DIRECT,
    now: datetime | None = None,
) -> Recommendation:
    """Units covering the concepts behind the report's wrong answers.

    Triggering concepts are the deduplicated wrong-answer concepts in graph
    declaration order; with_prerequisites appends each one's prerequisite
    closure.  Units come back in topological-rank order via the graph query.
    """
    decl = {cid: i for i, cid in enumerate(graph.concepts)}
    for _, cid in report.wrong_answers:
        if cid not in decl:
            raise RecommenderError(
                f"wrong answer references concept {cid!r} missing from the graph"
                " (quiz/graph fixture mismatch)"
            )
    base = sorted({cid for _, cid in report.wrong_answers}, key=decl.__getitem__)
    triggering = list(base)
    if depth is Depth.WITH_PREREQUISITES:
        seen = set(base)
        for cid in base:
            for pre in graph.prerequisite_closure(cid):
                if pre not in seen:
                    seen.add(pre)
                    triggering.append(pre)
    units = graph.units_for_concepts(triggering) if triggering else []
    return Recommendation(
        learner=report.learner,
        generated_at=now if now is not None else report.graded_at,
        triggering_concepts=tuple(triggering),
        units=tuple(units),
        origin=origin,
    )


def set_reminder(
    rec: Recommendation, policy: ReminderPolicy, now: datetime
) -> Reminder:
    if not rec.units:
        raise EmptyRecommendationError("nothing to remind: recommendation has no units")
    return Reminder(
        learner=rec.learner,
        recommendation=rec,
        interval=policy.interval,
        next_fire=now + policy.interval,
        cap=policy.cap,
    )


def fire_due(reminders: list[Reminder], now: datetime) -> list[ReminderFire]:
    """Fire every active reminder whose next_fire is due, advancing each by
    its interval until it is in the future or the cap expires it.

    Overdue reminders catch up with one event per missed interval, so a second
    call with the same ``now`` fires nothing.
    """
    events: list[ReminderFire] = []
    for reminder in reminders:
        while reminder.status is ReminderStatus.ACTIVE and reminder.next_fire <= now:
            fired_at = reminder.next_fire
            reminder.fired_count += 1
            reminder.next_fire = reminder.next_fire + reminder.interval
            if reminder.fired_count >= reminder.cap:
                reminder.status = ReminderStatus.EXPIRED
            events.append(
                ReminderFire(
                    learner=reminder.learner,
                    fired_at=fired_at,
                    units=reminder.recommendation.units,
                    fired_count=reminder.fired_count,
                    expired=reminder.status is ReminderStatus.EXPIRED,
                )
            )
    return events


def mark_satisfied(reminders: list[Reminder]) -> int:
    """Mark all active reminders satisfied; returns how many changed."""
    changed = 0
    for reminder in reminders:
        if reminder.status is ReminderStatus.ACTIVE:
            reminder.status = ReminderStatus.SATISFIED
            changed += 1
    return changed
