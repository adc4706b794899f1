#!/usr/bin/env python3
"""Record real /v1 responses into frontend test fixtures.

The browser tests drive the client against a small node fixture server that
replays these exchanges, so the UI is always tested against payloads the real
service actually produced.  Rerun after changing any wire format:

    python scripts/capture_webui_fixtures.py
"""

import json
import shutil
import sys
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from microadapt.service import create_app_from_path

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "frontend" / "tests" / "fixtures" / "exchanges.json"

ALL_WRONG = {
    "q-vec-add": [1], "q-vec-scale": [1], "q-mat-mul": [1],
    "q-mat-id": [1], "q-dot-zero": [1], "q-trig-cos": [1],
}
# weighted 5/7: wrong on mat + trig only
PWR_ANSWERS = {
    "q-vec-add": [0], "q-vec-scale": [0], "q-mat-mul": [1],
    "q-mat-id": [0], "q-dot-zero": [0], "q-trig-cos": [1],
}


def main() -> int:
    exchanges = []
    with tempfile.TemporaryDirectory() as tmp:
        deploy = Path(tmp) / "deploy"
        shutil.copytree(ROOT / "fixtures", deploy)
        with TestClient(create_app_from_path(deploy / "deploy.yaml")) as client:

            def record(method, path, *, headers=None, body=None):
                if method == "GET":
                    response = client.get(path, headers=headers or {})
                else:
                    response = client.post(path, json=body, headers=headers or {})
                assert response.status_code < 300, (path, response.text)
                exchanges.append(
                    {
                        "method": method,
                        "path": path,
                        "body": body,
                        "status": response.status_code,
                        "response": response.json(),
                    }
                )
                return response.json()

            record("GET", "/v1/quizzes/ecg-initial")
            record("GET", "/v1/units")

            failing = record(
                "POST",
                "/v1/submissions",
                headers={"X-Learner-Id": "webui-fail"},
                body={"quiz_id": "ecg-initial", "answers": ALL_WRONG},
            )
            advice = record(
                "POST",
                "/v1/submissions",
                headers={"X-Learner-Id": "webui-advice"},
                body={"quiz_id": "ecg-initial", "answers": PWR_ANSWERS},
            )
            record("GET", f"/v1/learners/{advice['learner']}/reminders")

            # instructor data: low ratings on the top-demand unit (u-mat-01
            # holds rank 1 after both submissions above) to force a rework flag
            for identity, rating in [("webui-a", 1), ("webui-b", 2)]:
                client.post(
                    "/v1/feedback",
                    json={"unit_id": "u-mat-01", "rating": rating, "tag": "unclear"},
                    headers={"X-Learner-Id": identity},
                )
            record("GET", "/v1/reports/demand", headers={"X-Role": "instructor"})
            record("GET", "/v1/reports/quality", headers={"X-Role": "instructor"})
            record(
                "POST",
                "/v1/reports/cohort",
                headers={"X-Role": "instructor"},
                body={"a": [0.42, 0.47, 0.55], "b": [0.61, 0.66, 0.72]},
            )

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(exchanges, indent=2, sort_keys=True) + "\n", "utf-8")
    print(f"wrote {OUT} ({len(exchanges)} exchanges)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
