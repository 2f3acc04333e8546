import json
import time

import pytest
from fastapi.testclient import TestClient

from buttonsim import VirtualPlant, build_model, serialize_model
from buttonsim.capture import grid_displacements
from buttonsim.service import create_app
from buttonsim.store import Workspace
from buttonsim.synthetic import STANDARD_VELOCITIES, segment_from_curve, velocity_scaled_force
from buttonsim.vibration import VibrationDescriptor


def seed_model():
    segments = {
        v: segment_from_curve(lambda d, v=v: velocity_scaled_force(d, v), 4.0, v)
        for v in STANDARD_VELOCITIES
    }
    return build_model(
        segments,
        "demo-button",
        activation_point_mm=2.0,
        vibration=VibrationDescriptor(2.4, 16.0, 239.0),
    )


@pytest.fixture()
def client(tmp_path):
    workspace = Workspace(tmp_path / "ws")
    workspace.put_model("demo-button", seed_model())
    workspace.put_plant(VirtualPlant(seed=2))
    app = create_app(workspace)
    with TestClient(app) as c:
        c.workspace = workspace
        yield c


def fifteen_points(travel=4.0, level=50.0):
    xs = [travel * i / 14 for i in range(15)]
    return [[x, level + 2 * i] for i, x in enumerate(xs)]


def wait_for_job(client, job_id, timeout=60.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        payload = client.get(f"/jobs/{job_id}").json()
        if payload["status"] in ("done", "error"):
            return payload
        time.sleep(0.05)
    raise TimeoutError(f"job {job_id} did not finish")


class TestModels:
    def test_list_and_get(self, client):
        listed = client.get("/models").json()
        assert listed == [{"button_id": "demo-button", "revision": 1}]
        got = client.get("/models/demo-button").json()
        assert got["revision"] == 1
        assert got["model"]["travel_range_mm"] == 4.0

    def test_unknown_model_404(self, client):
        assert client.get("/models/nope").status_code == 404

    def test_put_then_get_round_trip(self, client):
        points = fifteen_points()
        r = client.put(
            "/models/demo-button/control-points",
            json={"revision": 1, "velocity_mm_s": 100.0, "control_points": points},
        )
        assert r.status_code == 200
        assert r.json()["revision"] == 2
        got = client.get("/models/demo-button").json()
        curves = {c["velocity_mm_s"]: c for c in got["model"]["press_curves"]}
        assert curves[100.0]["control_points"] == points

    def test_invariant_violation_422_with_fields(self, client):
        r = client.put(
            "/models/demo-button/control-points",
            json={
                "revision": 1,
                "velocity_mm_s": 100.0,
                "control_points": fifteen_points(),
                "activation_point_mm": 4.5,
            },
        )
        assert r.status_code == 422
        fields = [d["field"] for d in r.json()["detail"]]
        assert "activation_point_mm" in fields

    def test_unordered_points_422(self, client):
        points = fifteen_points()
        points[3][0], points[4][0] = points[4][0], points[3][0]
        r = client.put(
            "/models/demo-button/control-points",
            json={"revision": 1, "velocity_mm_s": 100.0, "control_points": points},
        )
        assert r.status_code == 422

    def test_stale_revision_409(self, client):
        body = {"revision": 1, "velocity_mm_s": 100.0, "control_points": fifteen_points()}
        assert client.put("/models/demo-button/control-points", json=body).status_code == 200
        r = client.put("/models/demo-button/control-points", json=body)
        assert r.status_code == 409

    def test_concurrent_conflicting_puts_cannot_both_succeed(self, client):
        body = {"revision": 1, "velocity_mm_s": 100.0, "control_points": fifteen_points()}
        codes = [
            client.put("/models/demo-button/control-points", json=body).status_code
            for _ in range(2)
        ]
        assert sorted(codes) == [200, 409]


class TestJobsAndSimulation:
    def test_compensate_job_lifecycle(self, client):
        r = client.post(
            "/models/demo-button/compensate",
            json={"plant_id": "default", "velocities": [100.0], "runs": 1},
        )
        assert r.status_code == 200
        job = wait_for_job(client, r.json()["job_id"])
        assert job["status"] == "done"
        assert job["result"]["velocities"] == [100.0]
        final_errors = job["result"]["final_errors_cN"]["100.0"]
        assert all(e <= 3.0 for e in final_errors)

    def test_unknown_job_404(self, client):
        assert client.get("/jobs/ffffffffffff").status_code == 404

    def test_simulate_returns_trace(self, client):
        r = client.post("/simulate", json={"button_id": "demo-button", "velocity_mm_s": 100.0})
        assert r.status_code == 200
        payload = r.json()
        assert payload["summary"]["ticks"] == len(payload["records"])
        events = [e for rec in payload["records"] for e in rec["events"]]
        assert "activation" in events and "bottom_out" in events

    def test_websocket_stream_event_order(self, client):
        r = client.post(
            "/sessions", json={"button_id": "demo-button", "velocity_mm_s": 100.0}
        )
        session_id = r.json()["session_id"]
        records = []
        with client.websocket_connect(f"/ws/sessions/{session_id}") as ws:
            while True:
                message = json.loads(ws.receive_text())
                if message.get("event") == "done":
                    summary = message["summary"]
                    break
                records.append(message)
        assert summary["ticks"] == len(records)
        # ~40 ms press + rest/hold margins
        press_ticks = [r for r in records if r["raw_disp_mm"] > 0]
        assert 40 <= len(press_ticks) <= 75
        events = [e for rec in records for e in rec["events"]]
        order = [e for e in events if e in ("activation", "vibration_start", "bottom_out")]
        assert order.index("activation") < order.index("vibration_start")
        assert order.index("vibration_start") < order.index("bottom_out")

    def test_optimize_job(self, client):
        r = client.post("/optimize", json={"budget": 3, "trials_per_eval": 5, "seed": 4})
        job = wait_for_job(client, r.json()["job_id"])
        assert job["status"] == "done"
        assert len(job["result"]["history"]) == 3


class TestVibrationRating:
    def test_rate_and_best_badge(self, client):
        bank = client.get("/vibration/demo-button/templates").json()["templates"]
        assert len(bank) == 9
        ids = [t["template_id"] for t in bank]
        client.post(
            "/vibration/demo-button/rate", json={"template_id": ids[0], "score": 3}
        )
        client.post(
            "/vibration/demo-button/rate", json={"template_id": ids[1], "score": 5}
        )
        r = client.post(
            "/vibration/demo-button/rate", json={"template_id": ids[2], "score": 7}
        )
        assert r.json()["best_template_id"] == ids[2]

    def test_tie_breaks_toward_measured_features(self, client):
        bank = client.get("/vibration/demo-button/templates").json()["templates"]
        at_meas = next(
            t["template_id"]
            for t in bank
            if t["frequency_hz"] == 239.0 and t["amplitude_end_v"] == 0.0
        )
        off_meas = next(t["template_id"] for t in bank if t["frequency_hz"] != 239.0)
        client.post("/vibration/demo-button/rate", json={"template_id": off_meas, "score": 5})
        r = client.post("/vibration/demo-button/rate", json={"template_id": at_meas, "score": 5})
        assert r.json()["best_template_id"] == at_meas

    def test_rating_persisted_and_applied_to_model(self, client):
        bank = client.get("/vibration/demo-button/templates").json()["templates"]
        tid = bank[4]["template_id"]
        r = client.post("/vibration/demo-button/rate", json={"template_id": tid, "score": 6})
        assert r.status_code == 200
        model = client.get("/models/demo-button").json()["model"]
        assert model["vibration"]["template_id"] == tid

    def test_score_out_of_range_422(self, client):
        r = client.post(
            "/vibration/demo-button/rate", json={"template_id": "x", "score": 9}
        )
        assert r.status_code == 422
