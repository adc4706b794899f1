import shutil
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from microadapt.progression import ProgressEvent, replay
from microadapt.service import ConfigError, create_app_from_path, load_config

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

INSTRUCTOR = {"X-Role": "instructor"}

ALL_WRONG = {
    "q-vec-add": [1], "q-vec-scale": [1], "q-mat-mul": [1],
    "q-mat-id": [1], "q-dot-zero": [1], "q-trig-cos": [1],
}
ALL_RIGHT_FOLLOWUP = {
    "f-vec-sub": [0], "f-vec-len": [0], "f-mat-shape": [0],
    "f-dot-sign": [0], "f-trig-sin": [0],
}


@pytest.fixture()
def deployment(tmp_path):
    """A fresh copy of the fixture deployment with its own log file."""
    root = tmp_path / "deploy"
    shutil.copytree(FIXTURES, root)
    (root / "var").mkdir(exist_ok=True)
    return root / "deploy.yaml"


@pytest.fixture()
def client(deployment):
    app = create_app_from_path(deployment)
    with TestClient(app) as c:
        yield c


def submit(client, quiz_id, answers, identity="student-1", expect=200):
    response = client.post(
        "/v1/submissions",
        json={"quiz_id": quiz_id, "answers": answers},
        headers={"X-Learner-Id": identity},
    )
    assert response.status_code == expect, response.text
    return response.json()


class TestConfig:
    def test_fixture_config_loads(self, deployment):
        config = load_config(deployment)
        assert config.graph_path.is_file()
        assert config.max_attempts == 5

    def test_missing_graph_fails_fast(self, tmp_path, deployment):
        text = deployment.read_text().replace("graph_basic.mmap", "missing.mmap")
        bad = deployment.parent / "bad.yaml"
        bad.write_text(text)
        with pytest.raises(ConfigError):
            load_config(bad)

    def test_missing_key_fails_fast(self, deployment):
        text = deployment.read_text().replace(
            "pseudonym_key_file: dev-pseudonym.key", "pseudonym_key_env: NOT_SET_EVER"
        )
        bad = deployment.parent / "bad.yaml"
        bad.write_text(text)
        with pytest.raises(ConfigError):
            load_config(bad)


class TestBasicEndpoints:
    def test_health(self, client):
        response = client.get("/v1/health")
        assert response.status_code == 200
        body = response.json()
        assert body["status"] == "ok"
        assert body["concepts"] == 6

    def test_graph_and_units(self, client):
        graph = client.get("/v1/graph").json()
        assert [c["id"] for c in graph["concepts"]][:2] == ["trig", "vec"]
        units = client.get("/v1/units").json()["units"]
        assert any(u["id"] == "u-vec-01" for u in units)
        unit = client.get("/v1/units/u-vec-01").json()
        assert unit["duration_minutes"] == 10
        assert client.get("/v1/units/ghost").status_code == 404

    def test_quiz_view_hides_answers(self, client):
        quiz = client.get("/v1/quizzes/ecg-initial").json()
        assert quiz["id"] == "ecg-initial"
        for question in quiz["questions"]:
            assert "correct" not in question
        assert client.get("/v1/quizzes/ghost").status_code == 404

    def test_unknown_quiz_submission_404(self, client):
        submit(client, "ghost-quiz", {}, expect=404)

    def test_missing_identity_header_400(self, client):
        response = client.post(
            "/v1/submissions", json={"quiz_id": "ecg-initial", "answers": {}}
        )
        assert response.status_code == 400

    def test_malformed_body_4xx(self, client):
        response = client.post(
            "/v1/submissions",
            json={"quiz_id": "ecg-initial", "answers": "not-a-map"},
            headers={"X-Learner-Id": "x"},
        )
        assert 400 <= response.status_code < 500

    def test_every_post_endpoint_rejects_junk_with_4xx(self, client):
        posts = [
            "/v1/submissions",
            "/v1/learners/somebody/completions",
            "/v1/learners/somebody/goal-satisfied",
            "/v1/feedback",
            "/v1/reports/cohort",
            "/v1/admin/fire-reminders",
        ]
        junk_bodies = [
            b"not json at all",
            b"[1, 2, 3]",
            b'{"unexpected": {"nested": [null]}}',
        ]
        headers = {
            "X-Learner-Id": "junk-sender",
            "X-Role": "instructor",
            "Content-Type": "application/json",
        }
        for path in posts:
            for junk in junk_bodies:
                response = client.post(path, content=junk, headers=headers)
                assert 400 <= response.status_code < 500, (
                    path, junk, response.status_code, response.text,
                )

    def test_unknown_question_in_answers_400(self, client):
        data = submit(client, "ecg-initial", {"ghost": [0]}, expect=400)
        assert "ghost" in data["detail"]


class TestRemediationFlow:
    def test_fail_complete_pass_ends_cleared(self, client):
        data = submit(client, "ecg-initial", ALL_WRONG)
        pseud = data["learner"]
        assert data["report"]["classification"] == "fail"
        assert data["state"]["state"] == "remediating"
        units = data["state"]["assigned_units"]
        assert units == data["recommendation"]["units"]
        assert units  # covering units exist in the fixture

        for unit_id in units:
            response = client.post(
                f"/v1/learners/{pseud}/completions", json={"unit_id": unit_id}
            )
            assert response.status_code == 200
        state = client.get(f"/v1/learners/{pseud}/state").json()
        assert state["state"] == "awaiting_follow_up"

        done = submit(client, "ecg-followup", ALL_RIGHT_FOLLOWUP)
        assert done["report"]["classification"] == "pass"
        assert done["state"]["state"] == "cleared"
        assert done["state"]["attempt_count"] == 1

    def test_submitting_initial_twice_conflicts(self, client):
        submit(client, "ecg-initial", ALL_WRONG)
        submit(client, "ecg-initial", ALL_WRONG, expect=409)

    def test_followup_before_initial_conflicts(self, client):
        submit(client, "ecg-followup", ALL_RIGHT_FOLLOWUP, expect=409)

    def test_identity_is_pseudonymized(self, client):
        data = submit(client, "ecg-initial", ALL_WRONG, identity="alice@example.edu")
        assert "alice" not in data["learner"]
        assert len(data["learner"]) == 32
        export = client.get("/v1/export/log", headers=INSTRUCTOR).text
        assert "alice" not in export

    def test_pwr_sets_reminder_and_goal_check_clears(self, client):
        # 5/7 weighted score -> pass with remediation (wrong on mat + trig)
        answers = dict(ALL_WRONG, **{
            "q-vec-add": [0], "q-vec-scale": [0], "q-mat-id": [0], "q-dot-zero": [0],
        })
        data = submit(client, "ecg-initial", answers)
        pseud = data["learner"]
        assert data["report"]["classification"] == "pass_with_remediation"
        assert data["state"]["state"] == "cleared_with_advice"
        assert set(data["state"]["open_goal"]) == {"mat", "trig"}
        assert "reminder" in data
        reminders = client.get(f"/v1/learners/{pseud}/reminders").json()["reminders"]
        assert len(reminders) == 1
        assert reminders[0]["status"] == "active"

        # goal check: micro_test covering the open goal, all correct
        done = submit(
            client,
            "ecg-goal-check",
            {"g-vec": [0], "g-mat": [0], "g-dot": [0], "g-trig": [0]},
        )
        assert done["goal_satisfied"] is True
        assert done["state"]["state"] == "cleared"
        reminders = client.get(f"/v1/learners/{pseud}/reminders").json()["reminders"]
        assert reminders[0]["status"] == "satisfied"

    def test_failed_micro_test_changes_nothing(self, client):
        answers = dict(ALL_WRONG, **{
            "q-vec-add": [0], "q-vec-scale": [0], "q-mat-id": [0], "q-dot-zero": [0],
        })
        data = submit(client, "ecg-initial", answers)
        pseud = data["learner"]
        done = submit(
            client,
            "ecg-goal-check",
            {"g-vec": [1], "g-mat": [1], "g-dot": [1], "g-trig": [1]},
        )
        assert done["goal_satisfied"] is False
        assert done["state"]["state"] == "cleared_with_advice"

    def test_explicit_goal_satisfied_endpoint(self, client):
        answers = dict(ALL_WRONG, **{
            "q-vec-add": [0], "q-vec-scale": [0], "q-mat-id": [0], "q-dot-zero": [0],
        })
        data = submit(client, "ecg-initial", answers)
        pseud = data["learner"]
        response = client.post(f"/v1/learners/{pseud}/goal-satisfied")
        assert response.status_code == 200
        assert response.json()["state"] == "cleared"

    def test_goal_satisfied_when_cleared_conflicts(self, client):
        answers = {k: [0] for k in ALL_WRONG}
        data = submit(client, "ecg-initial", answers)
        pseud = data["learner"]
        assert data["state"]["state"] == "cleared"
        response = client.post(f"/v1/learners/{pseud}/goal-satisfied")
        assert response.status_code == 409

    def test_unknown_learner_endpoints_404(self, client):
        assert client.get("/v1/learners/nobody/state").status_code == 404
        assert (
            client.post(
                "/v1/learners/nobody/completions", json={"unit_id": "u-vec-01"}
            ).status_code
            == 404
        )


class TestReminderFiring:
    def test_fire_advances_and_eventually_expires(self, client):
        answers = dict(ALL_WRONG, **{
            "q-vec-add": [0], "q-vec-scale": [0], "q-mat-id": [0], "q-dot-zero": [0],
        })
        data = submit(client, "ecg-initial", answers)
        pseud = data["learner"]
        next_fire = data["reminder"]["next_fire"]

        fired = client.post(
            "/v1/admin/fire-reminders", json={"now": next_fire}, headers=INSTRUCTOR
        ).json()["fired"]
        assert len(fired) == 1
        assert fired[0]["fired_count"] == 1
        # same now again: idempotent
        again = client.post(
            "/v1/admin/fire-reminders", json={"now": next_fire}, headers=INSTRUCTOR
        ).json()["fired"]
        assert again == []

        # jump far beyond the cap: catch-up fires expire the reminder...
        far = "2030-01-01T00:00:00Z"
        burst = client.post(
            "/v1/admin/fire-reminders", json={"now": far}, headers=INSTRUCTOR
        ).json()["fired"]
        assert burst[-1]["expired"] is True
        assert sum(1 for f in burst) + 1 <= 10 + 1
        # ... and the unmet goal closes out the learner
        state = client.get(f"/v1/learners/{pseud}/state").json()
        assert state["state"] == "cleared"
        assert state["goal_unmet"] is True


class TestAnalyticsEndpoints:
    def test_role_gating(self, client):
        assert client.get("/v1/reports/demand").status_code == 403
        assert client.get("/v1/reports/quality").status_code == 403
        assert client.get("/v1/export/log").status_code == 403
        assert client.post("/v1/admin/reload").status_code == 403

    def test_demand_counts_recommendations(self, client):
        submit(client, "ecg-initial", ALL_WRONG, identity="s1")
        submit(client, "ecg-initial", ALL_WRONG, identity="s2")
        rows = client.get("/v1/reports/demand", headers=INSTRUCTOR).json()["rows"]
        assert rows
        by_unit = {row["unit_id"]: row["count"] for row in rows}
        assert by_unit["u-vec-01"] == 2

    def test_quality_flags_low_rated_top_demand(self, client):
        submit(client, "ecg-initial", ALL_WRONG, identity="s1")
        # five tied units; quartile cutoff is 2, ties break by id, so
        # u-dot-01 holds rank 1 and a sub-3 mean flags it
        for identity, rating in [("s1", 1), ("s2", 2)]:
            response = client.post(
                "/v1/feedback",
                json={"unit_id": "u-dot-01", "rating": rating, "tag": "unclear"},
                headers={"X-Learner-Id": identity},
            )
            assert response.status_code == 200
        rows = client.get("/v1/reports/quality", headers=INSTRUCTOR).json()["rows"]
        flagged = {row["unit_id"]: row["flag"] for row in rows}
        assert flagged["u-dot-01"] == "rework"
        assert flagged["u-vec-01"] is None

    def test_feedback_validation(self, client):
        bad_rating = client.post(
            "/v1/feedback",
            json={"unit_id": "u-vec-01", "rating": 9},
            headers={"X-Learner-Id": "s1"},
        )
        assert bad_rating.status_code == 422
        bad_unit = client.post(
            "/v1/feedback",
            json={"unit_id": "ghost", "rating": 3},
            headers={"X-Learner-Id": "s1"},
        )
        assert bad_unit.status_code == 404

    def test_cohort_endpoint(self, client):
        response = client.post(
            "/v1/reports/cohort",
            json={"a": [0, 0, 0], "b": [1, 1, 1]},
            headers=INSTRUCTOR,
        )
        assert response.status_code == 200
        body = response.json()
        assert body["p_value"] == 0.1
        assert body["method"] == "exact"
        empty = client.post(
            "/v1/reports/cohort", json={"a": [], "b": [1]}, headers=INSTRUCTOR
        )
        assert empty.status_code == 400

    def test_admin_reload(self, client):
        response = client.post("/v1/admin/reload", headers=INSTRUCTOR)
        assert response.status_code == 200
        assert response.json()["status"] == "reloaded"


class TestEventSourcing:
    def test_restart_rebuilds_state_from_log(self, deployment):
        with TestClient(create_app_from_path(deployment)) as client:
            data = submit(client, "ecg-initial", ALL_WRONG)
            pseud = data["learner"]
            units = data["state"]["assigned_units"]
            for unit_id in units[:2]:
                client.post(
                    f"/v1/learners/{pseud}/completions", json={"unit_id": unit_id}
                )
            before = client.get(f"/v1/learners/{pseud}/state").json()
            recs_before = client.get(
                f"/v1/learners/{pseud}/recommendations"
            ).json()

        with TestClient(create_app_from_path(deployment)) as client:
            after = client.get(f"/v1/learners/{pseud}/state").json()
            recs_after = client.get(f"/v1/learners/{pseud}/recommendations").json()
        assert after == before
        assert recs_after == recs_before

    def test_replay_of_progress_events_matches_served_state(self, deployment):
        with TestClient(create_app_from_path(deployment)) as client:
            data = submit(client, "ecg-initial", ALL_WRONG)
            pseud = data["learner"]
            for unit_id in data["state"]["assigned_units"]:
                client.post(
                    f"/v1/learners/{pseud}/completions", json={"unit_id": unit_id}
                )
            submit(client, "ecg-followup", ALL_RIGHT_FOLLOWUP)
            served = client.get(f"/v1/learners/{pseud}/state").json()
            export = client.get("/v1/export/log", headers=INSTRUCTOR).text

        from microadapt.graph import parse_mindmap
        from microadapt.assessment import load_quiz
        from microadapt.progression import EventKind
        from microadapt.store import EventRecord

        graph = parse_mindmap(
            (deployment.parent / "graph_basic.mmap").read_text(encoding="utf-8")
        )
        quizzes = {
            q.id: q
            for q in (
                load_quiz(p) for p in (deployment.parent / "quizzes").glob("*.yaml")
            )
        }
        progress_kinds = {k.value for k in EventKind}
        events = []
        for line in export.splitlines():
            record = EventRecord.from_line(line)
            if record.learner == pseud and record.kind in progress_kinds:
                events.append(ProgressEvent.from_payload(record.payload, record.at))
        replayed = replay(pseud, events, graph, quizzes)
        assert replayed.to_payload() == served

    def test_export_matches_log_file(self, deployment):
        with TestClient(create_app_from_path(deployment)) as client:
            submit(client, "ecg-initial", ALL_WRONG)
            export = client.get("/v1/export/log", headers=INSTRUCTOR).text
        log_path = deployment.parent / "var" / "events.ndjson"
        assert export == log_path.read_text(encoding="utf-8")
