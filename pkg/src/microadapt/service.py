"""HTTP surface over the whole remediation loop, versioned under /v1.

The event log is the source of truth: every state-mutating endpoint appends
at least one record, startup rebuilds all learner state by replaying the log,
and responses are a pure function of the log prefix.  Learner identity enters
through the ``X-Learner-Id`` header and is pseudonymized at the edge; raw
identities never reach the log.  Instructor-only endpoints (reports, admin,
export) are gated by ``X-Role: instructor``.

Concurrency: one process-wide lock serializes event application and appends;
the graph and quizzes are immutable snapshots swapped atomically on reload.
"""

from __future__ import annotations

import contextlib
import os
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path
from typing import Mapping, Optional

import yaml
from fastapi import Depends, FastAPI, Header, HTTPException, Query, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, ConfigDict, Field

from . import progression, recommender, store
from .assessment import (
    AssessmentError,
    Classification,
    Quiz,
    QuizKind,
    Thresholds,
    grade,
    load_quiz,
    submission_from_payload,
    to_fraction,
)
from .graph import ConceptGraph, GraphError, parse_mindmap, validate
from .progression import (
    AnnotateGoalUnmet,
    EventKind,
    FlagForIntervention,
    IllegalTransitionError,
    LearnerState,
    MarkRemindersSatisfied,
    ProgressEvent,
    ProgressionError,
    RecommendUnits,
    ScheduleReminder,
    State,
)
from .recommender import Depth, Reminder, ReminderPolicy, ReminderStatus
from .stats import StatsError, cohort_compare
from .store import (
    EventLog,
    FeedbackEntry,
    Pseudonymizer,
    StoreError,
    TimeWindow,
    demand_report,
    quality_report,
)
from .timefmt import format_timestamp, parse_timestamp, utc_now

PROGRESS_KINDS = {kind.value for kind in EventKind}


class ConfigError(Exception):
    pass


@dataclass
class DeploymentConfig:
    graph_path: Path
    quiz_dir: Path
    log_path: Path | None
    pseudonym_key: bytes
    default_thresholds: Thresholds
    reminder_policy: ReminderPolicy
    closure_depth: Depth
    max_attempts: int
    host: str = "127.0.0.1"
    port: int = 8080


def load_config(path: str | Path) -> DeploymentConfig:
    """Parse and cross-check a deployment config; any unreadable or invalid
    referenced file fails startup immediately."""
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: bad YAML: {exc}") from exc
    if not isinstance(data, Mapping):
        raise ConfigError(f"{path}: config must be a mapping")
    base = path.parent

    def resolved(key: str) -> Path:
        if key not in data:
            raise ConfigError(f"{path}: missing required key {key!r}")
        return (base / str(data[key])).resolve()

    graph_path = resolved("graph")
    quiz_dir = resolved("quiz_dir")
    if not graph_path.is_file():
        raise ConfigError(f"graph file {graph_path} does not exist")
    if not quiz_dir.is_dir():
        raise ConfigError(f"quiz directory {quiz_dir} does not exist")

    key: bytes | None = None
    if "pseudonym_key_file" in data:
        key_path = (base / str(data["pseudonym_key_file"])).resolve()
        try:
            key = key_path.read_bytes().strip()
        except OSError as exc:
            raise ConfigError(f"cannot read pseudonym key file {key_path}: {exc}")
    elif "pseudonym_key_env" in data:
        env_name = str(data["pseudonym_key_env"])
        value = os.environ.get(env_name)
        if not value:
            raise ConfigError(f"pseudonym key env var {env_name} is not set")
        key = value.encode("utf-8")
    if not key:
        raise ConfigError(f"{path}: need pseudonym_key_file or pseudonym_key_env")

    thresholds_data = data.get("thresholds", {})
    try:
        thresholds = Thresholds(
            to_fraction(thresholds_data.get("min", "0.5")),
            to_fraction(thresholds_data.get("max", "0.8")),
        )
    except AssessmentError as exc:
        raise ConfigError(f"{path}: bad thresholds: {exc}") from exc

    reminder_data = data.get("reminder", {})
    try:
        policy = ReminderPolicy(
            interval=timedelta(hours=float(reminder_data.get("interval_hours", 48))),
            cap=int(reminder_data.get("cap", 10)),
        )
    except (TypeError, ValueError, recommender.RecommenderError) as exc:
        raise ConfigError(f"{path}: bad reminder policy: {exc}") from exc

    try:
        depth = Depth(data.get("closure_depth", "direct"))
    except ValueError as exc:
        raise ConfigError(f"{path}: bad closure_depth: {exc}") from exc

    listen = data.get("listen", {})
    log_value = data.get("log_path")
    return DeploymentConfig(
        graph_path=graph_path,
        quiz_dir=quiz_dir,
        log_path=(base / str(log_value)).resolve() if log_value else None,
        pseudonym_key=key,
        default_thresholds=thresholds,
        reminder_policy=policy,
        closure_depth=depth,
        max_attempts=int(data.get("max_attempts", progression.DEFAULT_MAX_ATTEMPTS)),
        host=str(listen.get("host", "127.0.0.1")),
        port=int(listen.get("port", 8080)),
    )


def _load_quizzes(quiz_dir: Path, thresholds: Thresholds) -> dict[str, Quiz]:
    quizzes: dict[str, Quiz] = {}
    for quiz_path in sorted(quiz_dir.glob("*.yaml")) + sorted(quiz_dir.glob("*.yml")):
        quiz = load_quiz(quiz_path, thresholds)
        if quiz.id in quizzes:
            raise ConfigError(f"duplicate quiz id {quiz.id!r} in {quiz_path}")
        quizzes[quiz.id] = quiz
    if not quizzes:
        raise ConfigError(f"no quiz files found in {quiz_dir}")
    return quizzes


def _parse_ts(text: str, what: str) -> datetime:
    try:
        return parse_timestamp(text)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=f"bad {what}: {exc}")


@dataclass
class _TrackedReminder:
    reminder_id: str
    reminder: Reminder


class ServiceState:
    """Mutable application state, rebuilt from the event log on startup."""

    def __init__(self, config: DeploymentConfig):
        self.config = config
        self.graph: ConceptGraph = parse_mindmap(
            config.graph_path.read_text(encoding="utf-8")
        )
        findings = validate(self.graph)
        errors = [f for f in findings if f.severity.value == "error"]
        if errors:
            raise ConfigError(
                "graph failed validation: " + "; ".join(f.message for f in errors)
            )
        self.quizzes: dict[str, Quiz] = _load_quizzes(
            config.quiz_dir, config.default_thresholds
        )
        self.log = EventLog(config.log_path)
        self.pseudonymizer = Pseudonymizer(config.pseudonym_key)
        self.lock = threading.Lock()
        self.states: dict[str, LearnerState] = {}
        self.recommendations: dict[str, list[recommender.Recommendation]] = {}
        self.reminders: dict[str, list[_TrackedReminder]] = {}
        self._reminders_by_id: dict[str, _TrackedReminder] = {}
        for record in self.log.records():
            self._absorb(record)

    # -- log-driven state ----------------------------------------------------

    def _apply_machine(self, learner: str, event: ProgressEvent):
        state = self.states.get(learner, LearnerState(learner=learner))
        quiz = None
        if event.report is not None:
            quiz = self.quizzes.get(event.report.quiz_id)
        new_state, effects = progression.apply_event(
            state,
            event,
            self.graph,
            quiz,
            depth=self.config.closure_depth,
            reminder_policy=self.config.reminder_policy,
            max_attempts=self.config.max_attempts,
        )
        self.states[learner] = new_state
        return new_state, effects

    def _absorb(self, record: store.EventRecord) -> None:
        """Fold one already-appended record back into in-memory state."""
        kind = record.kind
        if kind == EventKind.REMINDER_FIRED.value:
            tracked = self._reminders_by_id.get(record.payload.get("reminder_id", ""))
            if tracked is not None:
                tracked.reminder.fired_count = record.payload["fired_count"]
                tracked.reminder.next_fire = parse_timestamp(
                    record.payload["next_fire"]
                )
                if record.payload["reminder_expired"]:
                    tracked.reminder.status = ReminderStatus.EXPIRED
        if kind in PROGRESS_KINDS:
            event = ProgressEvent.from_payload(record.payload, at=record.at)
            self._apply_machine(record.learner, event)
        elif kind == store.KIND_RECOMMENDATION:
            rec = recommender.Recommendation.from_payload(record.payload)
            self.recommendations.setdefault(record.learner, []).append(rec)
        elif kind == store.KIND_REMINDER_SET:
            payload = dict(record.payload)
            reminder_id = payload.pop("reminder_id")
            tracked = _TrackedReminder(
                reminder_id=reminder_id,
                reminder=Reminder.from_payload(payload),
            )
            self.reminders.setdefault(record.learner, []).append(tracked)
            self._reminders_by_id[reminder_id] = tracked
        elif kind == store.KIND_REMINDERS_SATISFIED:
            for tracked in self.reminders.get(record.learner, []):
                if tracked.reminder.status is ReminderStatus.ACTIVE:
                    tracked.reminder.status = ReminderStatus.SATISFIED
        # feedback / micro_test_result / goal_unmet / flag records carry no state

    def append(
        self, learner: str, at: datetime, kind: str, payload: dict
    ) -> store.EventRecord:
        return self.log.append(learner=learner, at=at, kind=kind, payload=payload)

    def apply_progress(
        self,
        learner: str,
        event: ProgressEvent,
        extra_payload: dict | None = None,
    ) -> tuple[LearnerState, list]:
        """Validate, append, and apply one progress event.

        The machine transition is computed first, so an illegal event raises
        before anything reaches the log.  Effects are materialized as their
        own records, in order, right after the triggering event.
        """
        new_state, effects = self._apply_machine(learner, event)
        payload = event.to_payload()
        if extra_payload:
            payload.update(extra_payload)
        self.append(learner, event.at, event.kind.value, payload)
        extras = []
        for effect in effects:
            if isinstance(effect, RecommendUnits):
                rec = effect.recommendation
                self.append(
                    learner, event.at, store.KIND_RECOMMENDATION, rec.to_payload()
                )
                self.recommendations.setdefault(learner, []).append(rec)
                extras.append(("recommendation", rec))
            elif isinstance(effect, ScheduleReminder):
                reminder_id = f"rem-{self.log.next_seq()}"
                tracked = _TrackedReminder(reminder_id, effect.reminder)
                self.append(
                    learner,
                    event.at,
                    store.KIND_REMINDER_SET,
                    {**effect.reminder.to_payload(), "reminder_id": reminder_id},
                )
                self.reminders.setdefault(learner, []).append(tracked)
                self._reminders_by_id[reminder_id] = tracked
                extras.append(("reminder", tracked))
            elif isinstance(effect, MarkRemindersSatisfied):
                changed = recommender.mark_satisfied(
                    [t.reminder for t in self.reminders.get(learner, [])]
                )
                self.append(
                    learner,
                    event.at,
                    store.KIND_REMINDERS_SATISFIED,
                    {"count": changed, "concepts": sorted(effect.concepts)},
                )
            elif isinstance(effect, AnnotateGoalUnmet):
                self.append(
                    learner,
                    event.at,
                    "goal_unmet",
                    {"concepts": sorted(effect.concepts)},
                )
            elif isinstance(effect, FlagForIntervention):
                self.append(
                    learner,
                    event.at,
                    "flagged_for_intervention",
                    {"attempt_count": effect.attempt_count},
                )
        return new_state, extras

    def reload_content(self) -> None:
        graph = parse_mindmap(self.config.graph_path.read_text(encoding="utf-8"))
        findings = validate(graph)
        errors = [f for f in findings if f.severity.value == "error"]
        if errors:
            raise ConfigError(
                "graph failed validation: " + "; ".join(f.message for f in errors)
            )
        quizzes = _load_quizzes(self.config.quiz_dir, self.config.default_thresholds)
        self.graph = graph
        self.quizzes = quizzes


# -- request bodies (unknown fields rejected: malformed means 4xx) ------------


class _StrictBody(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SubmissionBody(_StrictBody):
    quiz_id: str
    answers: dict[str, list[int]]
    submitted_at: Optional[str] = None


class CompletionBody(_StrictBody):
    unit_id: str


class GoalSatisfiedBody(_StrictBody):
    note: Optional[str] = None


class FeedbackBody(_StrictBody):
    unit_id: str
    rating: int = Field(ge=1, le=5)
    tag: Optional[str] = None


class CohortBody(_StrictBody):
    a: list[float]
    b: list[float]


class FireRemindersBody(_StrictBody):
    now: Optional[str] = None


def _reminder_wire(tracked: _TrackedReminder) -> dict:
    payload = tracked.reminder.to_payload()
    payload["reminder_id"] = tracked.reminder_id
    return payload


def _quiz_wire(quiz: Quiz) -> dict:
    """Learner-facing quiz view: stems and choices, never the correct sets."""
    return {
        "id": quiz.id,
        "kind": quiz.kind.value,
        "thresholds": {
            "min": float(quiz.thresholds.t_min),
            "max": float(quiz.thresholds.t_max),
        },
        "questions": [
            {
                "id": q.id,
                "stem": q.stem,
                "choices": list(q.choices),
                "concept_id": q.concept_id,
                "multiple": len(q.correct) > 1,
            }
            for q in quiz.questions
        ],
    }


def create_app(config: DeploymentConfig) -> FastAPI:
    service = ServiceState(config)

    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        service.log.close()

    app = FastAPI(title="microadapt", version="0.1.0", lifespan=lifespan)
    app.state.service = service

    def instructor_only(x_role: str = Header(default="")) -> None:
        if x_role != "instructor":
            raise HTTPException(status_code=403, detail="instructor role required")

    def identity_header(x_learner_id: str = Header(default="")) -> str:
        if not x_learner_id:
            raise HTTPException(
                status_code=400, detail="X-Learner-Id header is required"
            )
        return service.pseudonymizer.token(x_learner_id)

    @app.exception_handler(IllegalTransitionError)
    async def _illegal(request: Request, exc: IllegalTransitionError):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.exception_handler(AssessmentError)
    async def _assessment(request: Request, exc: AssessmentError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(ProgressionError)
    async def _progression(request: Request, exc: ProgressionError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(StatsError)
    async def _stats(request: Request, exc: StatsError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(StoreError)
    async def _store(request: Request, exc: StoreError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/v1/health")
    def health():
        return {
            "status": "ok",
            "concepts": len(service.graph.concepts),
            "units": len(service.graph.units),
            "quizzes": len(service.quizzes),
            "events": len(service.log),
        }

    @app.get("/v1/graph")
    def get_graph():
        return service.graph.to_payload()

    @app.get("/v1/units")
    def list_units():
        return {"units": service.graph.to_payload()["units"]}

    @app.get("/v1/units/{unit_id}")
    def get_unit(unit_id: str):
        unit = service.graph.units.get(unit_id)
        if unit is None:
            raise HTTPException(status_code=404, detail=f"unknown unit {unit_id!r}")
        return {
            "id": unit.id,
            "title": unit.title,
            "covers": list(unit.covers),
            "kind": unit.kind.value,
            "duration_minutes": unit.duration_minutes,
            "content_uri": unit.content_uri,
            "version": unit.version,
        }

    @app.get("/v1/quizzes")
    def list_quizzes():
        return {
            "quizzes": [
                {"id": q.id, "kind": q.kind.value, "questions": len(q.questions)}
                for q in service.quizzes.values()
            ]
        }

    @app.get("/v1/quizzes/{quiz_id}")
    def get_quiz(quiz_id: str):
        quiz = service.quizzes.get(quiz_id)
        if quiz is None:
            raise HTTPException(status_code=404, detail=f"unknown quiz {quiz_id!r}")
        return _quiz_wire(quiz)

    @app.post("/v1/submissions")
    def post_submission(body: SubmissionBody, learner: str = Depends(identity_header)):
        quiz = service.quizzes.get(body.quiz_id)
        if quiz is None:
            raise HTTPException(status_code=404, detail=f"unknown quiz {body.quiz_id!r}")
        at = _parse_ts(body.submitted_at, "submitted_at") if body.submitted_at else utc_now()
        submission = submission_from_payload(
            {
                "quiz_id": body.quiz_id,
                "answers": body.answers,
                "submitted_at": format_timestamp(at),
            },
            learner=learner,
        )
        report = grade(quiz, submission)
        with service.lock:
            if quiz.kind is QuizKind.MICRO_TEST:
                return _handle_micro_test(service, learner, quiz, report, at)
            if quiz.kind is QuizKind.INITIAL:
                event = ProgressEvent.initial_result(report, at)
            else:
                event = ProgressEvent.follow_up_result(report, at)
            state, extras = service.apply_progress(learner, event)
        response = {
            "learner": learner,
            "report": report.to_payload(),
            "state": state.to_payload(),
        }
        for label, value in extras:
            if label == "recommendation":
                response["recommendation"] = value.to_payload()
            elif label == "reminder":
                response["reminder"] = _reminder_wire(value)
        return response

    @app.get("/v1/learners/{pseudonym}/state")
    def learner_state(pseudonym: str):
        state = service.states.get(pseudonym)
        if state is None:
            raise HTTPException(
                status_code=404, detail=f"no events for learner {pseudonym!r}"
            )
        return state.to_payload()

    @app.get("/v1/learners/{pseudonym}/recommendations")
    def learner_recommendations(pseudonym: str):
        recs = service.recommendations.get(pseudonym, [])
        return {"recommendations": [r.to_payload() for r in recs]}

    @app.get("/v1/learners/{pseudonym}/reminders")
    def learner_reminders(pseudonym: str):
        tracked = service.reminders.get(pseudonym, [])
        return {"reminders": [_reminder_wire(t) for t in tracked]}

    @app.post("/v1/learners/{pseudonym}/completions")
    def complete_unit(pseudonym: str, body: CompletionBody):
        if pseudonym not in service.states:
            raise HTTPException(
                status_code=404, detail=f"no events for learner {pseudonym!r}"
            )
        if body.unit_id not in service.graph.units:
            raise HTTPException(status_code=404, detail=f"unknown unit {body.unit_id!r}")
        with service.lock:
            event = ProgressEvent.unit_completed(body.unit_id, utc_now())
            state, _ = service.apply_progress(pseudonym, event)
        return state.to_payload()

    @app.post("/v1/learners/{pseudonym}/goal-satisfied")
    def goal_satisfied(pseudonym: str, body: Optional[GoalSatisfiedBody] = None):
        if pseudonym not in service.states:
            raise HTTPException(
                status_code=404, detail=f"no events for learner {pseudonym!r}"
            )
        with service.lock:
            state = service.states[pseudonym]
            event = ProgressEvent.goal_satisfied(
                tuple(sorted(state.open_goal)), utc_now()
            )
            state, _ = service.apply_progress(pseudonym, event)
        return state.to_payload()

    @app.post("/v1/feedback")
    def post_feedback(body: FeedbackBody, learner: str = Depends(identity_header)):
        if body.unit_id not in service.graph.units:
            raise HTTPException(status_code=404, detail=f"unknown unit {body.unit_id!r}")
        at = utc_now()
        entry = FeedbackEntry(
            learner=learner, unit_id=body.unit_id, rating=body.rating,
            tag=body.tag, at=at,
        )
        with service.lock:
            record = service.append(learner, at, store.KIND_FEEDBACK, entry.payload())
        return {"seq": record.seq, "learner": learner}

    @app.get("/v1/reports/demand", dependencies=[Depends(instructor_only)])
    def report_demand(
        window_from: Optional[str] = Query(default=None, alias="from"),
        window_to: Optional[str] = Query(default=None, alias="to"),
    ):
        window = TimeWindow(
            start=_parse_ts(window_from, "from") if window_from else None,
            end=_parse_ts(window_to, "to") if window_to else None,
        )
        rows = demand_report(service.log.records(), window)
        return {"rows": [{"unit_id": uid, "count": count} for uid, count in rows]}

    @app.get("/v1/reports/quality", dependencies=[Depends(instructor_only)])
    def report_quality():
        rows = quality_report(service.log.records())
        return {"rows": [row.to_payload() for row in rows]}

    @app.post("/v1/reports/cohort", dependencies=[Depends(instructor_only)])
    def report_cohort(body: CohortBody):
        result = cohort_compare(body.a, body.b)
        return {
            "mean_diff": result.mean_diff,
            "effect_size": result.effect_size,
            "p_value": result.p_value,
            "u_statistic": result.u_statistic,
            "method": result.method,
        }

    @app.post("/v1/admin/reload", dependencies=[Depends(instructor_only)])
    def admin_reload():
        with service.lock:
            try:
                service.reload_content()
            except (ConfigError, GraphError, AssessmentError, OSError) as exc:
                raise HTTPException(status_code=400, detail=str(exc))
            service.append(
                "system",
                utc_now(),
                "admin_reload",
                {
                    "concepts": len(service.graph.concepts),
                    "units": len(service.graph.units),
                    "quizzes": len(service.quizzes),
                },
            )
        return {
            "status": "reloaded",
            "concepts": len(service.graph.concepts),
            "quizzes": len(service.quizzes),
        }

    @app.post("/v1/admin/fire-reminders", dependencies=[Depends(instructor_only)])
    def admin_fire_reminders(body: FireRemindersBody):
        now = _parse_ts(body.now, "now") if body.now else utc_now()
        fired_payloads = []
        with service.lock:
            for learner, tracked_list in list(service.reminders.items()):
                for tracked in tracked_list:
                    for fire in recommender.fire_due([tracked.reminder], now):
                        event = ProgressEvent.reminder_fired(
                            fire.fired_at, expired=fire.expired
                        )
                        service.apply_progress(
                            learner,
                            event,
                            extra_payload={
                                "reminder_id": tracked.reminder_id,
                                "fired_count": fire.fired_count,
                                "next_fire": format_timestamp(
                                    tracked.reminder.next_fire
                                ),
                                "units": list(fire.units),
                            },
                        )
                        fired_payloads.append(
                            {
                                "learner": learner,
                                "reminder_id": tracked.reminder_id,
                                "fired_at": format_timestamp(fire.fired_at),
                                "fired_count": fire.fired_count,
                                "expired": fire.expired,
                                "units": list(fire.units),
                            }
                        )
        return {"fired": fired_payloads}

    @app.get("/v1/export/log", dependencies=[Depends(instructor_only)])
    def export_log():
        lines = [record.to_line() for record in service.log.records()]
        body = "\n".join(lines) + ("\n" if lines else "")
        return PlainTextResponse(body, media_type="application/x-ndjson")

    return app


def _handle_micro_test(
    service: ServiceState, learner: str, quiz: Quiz, report, at: datetime
) -> dict:
    """Micro-tests never enter the remediation loop: they are goal checks.

    A PASS-band result on a quiz covering the learner's open goal satisfies
    the goal; anything else is logged and leaves the state alone.
    """
    service.append(learner, at, "micro_test_result", report.to_payload())
    state = service.states.get(learner, LearnerState(learner=learner))
    satisfied = False
    reason = None
    if state.state is not State.CLEARED_WITH_ADVICE:
        reason = "learner has no open goal"
    elif report.classification is not Classification.PASS:
        reason = "micro-test not passed at the pass threshold"
    else:
        covered = {q.concept_id for q in quiz.questions}
        if not state.open_goal.issubset(covered):
            missing = sorted(state.open_goal - covered)
            reason = f"micro-test does not cover goal concepts: {', '.join(missing)}"
        else:
            event = ProgressEvent.goal_satisfied(tuple(sorted(state.open_goal)), at)
            state, _ = service.apply_progress(learner, event)
            satisfied = True
    return {
        "learner": learner,
        "report": report.to_payload(),
        "state": state.to_payload(),
        "goal_satisfied": satisfied,
        **({"reason": reason} if reason else {}),
    }


def create_app_from_path(config_path: str | Path) -> FastAPI:
    return create_app(load_config(config_path))
