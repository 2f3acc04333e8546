"""HTTP/WebSocket service exposing models, compensation jobs, simulation,
vibration rating, and optimization to scripts and the editor UI."""

from __future__ import annotations

import json
import uuid
from pathlib import Path

import numpy as np
from fastapi import Body, FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles

from .compensation import compensate_model
from .errors import ButtonSimError, ValidationError
from .model import FdvvModel, model_to_dict
from .optimizer import SimulatedUser, optimize
from .render import (
    PressTrajectory,
    config_for_model,
    constant_velocity_press,
    minimum_jerk_press,
    run_press,
    trajectory_from_dict,
)
from .spline import BSplineCurve
from .store import JobRegistry, NotFound, RevisionConflict, Workspace
from .vibration import VibrationDescriptor, generate_templates


def _field_errors(errors: list[dict]) -> HTTPException:
    return HTTPException(status_code=422, detail=errors)


def _edited_model(base: FdvvModel, body: dict) -> FdvvModel:
    """Apply a control-point edit; invariant violations become field errors."""
    errors = []
    travel = float(body.get("travel_range_mm", base.travel_range_mm))
    activation = float(body.get("activation_point_mm", base.activation_point_mm))
    velocity = float(body.get("velocity_mm_s", base.velocities[0]))
    points = body.get("control_points")
    if points is None:
        raise _field_errors([{"field": "control_points", "error": "required"}])
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != 2:
        raise _field_errors([{"field": "control_points", "error": "expected [d, f] pairs"}])
    if len(points) < 4:
        errors.append({"field": "control_points", "error": "need at least 4 points"})
    if np.any(np.diff(points[:, 0]) < 0):
        errors.append(
            {"field": "control_points", "error": "displacements must be non-decreasing"}
        )
    if not (0 < activation < travel):
        errors.append(
            {"field": "activation_point_mm", "error": f"must lie inside (0, {travel:g})"}
        )
    vibration = base.vibration
    if body.get("vibration") is not None:
        v = body["vibration"]
        vibration = VibrationDescriptor(
            onset_mm=float(v["onset_mm"]),
            duration_ms=float(v["duration_ms"]),
            frequency_hz=float(v["frequency_hz"]),
            template_id=str(v.get("template_id", "")),
        )
    if vibration is not None and not (0 < vibration.onset_mm < travel):
        errors.append(
            {"field": "vibration.onset_mm", "error": f"must lie inside (0, {travel:g})"}
        )
    if errors:
        raise _field_errors(errors)

    curves = dict(base.press_curves)
    scale = travel / base.travel_range_mm
    if scale != 1.0:
        # travel edits rescale the other velocities' domains to keep the model consistent
        curves = {
            v: BSplineCurve(c.control_x_mm * scale, c.control_y, c.degree)
            for v, c in curves.items()
        }
    if abs(points[0, 0]) > 1e-9 or abs(points[-1, 0] - travel) > 1e-9:
        raise _field_errors(
            [{"field": "control_points", "error": f"curve must span [0, {travel:g}]"}]
        )
    curves[velocity] = BSplineCurve(points[:, 0], points[:, 1])
    try:
        return FdvvModel(
            button_id=base.button_id,
            travel_range_mm=travel,
            activation_point_mm=activation,
            press_curves=curves,
            release_curves=base.release_curves,
            vibration=vibration,
        )
    except ValidationError as exc:
        raise _field_errors([{"field": "model", "error": str(exc)}]) from exc


def create_app(workspace: Workspace | str | Path | None = None) -> FastAPI:
    ws = workspace if isinstance(workspace, Workspace) else Workspace(workspace)
    jobs = JobRegistry()
    sessions: dict[str, dict] = {}

    app = FastAPI(title="buttonsim service")
    app.state.workspace = ws
    app.state.jobs = jobs
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    def load_model_or_404(button_id: str):
        try:
            return ws.get_model(button_id)
        except NotFound:
            raise HTTPException(status_code=404, detail=f"unknown model '{button_id}'")

    @app.get("/models")
    def list_models():
        return ws.list_models()

    @app.get("/models/{button_id}")
    def get_model(button_id: str):
        revision, model = load_model_or_404(button_id)
        return {"revision": revision, "model": model_to_dict(model)}

    @app.put("/models/{button_id}/control-points")
    def put_control_points(button_id: str, body: dict = Body(...)):
        revision, model = load_model_or_404(button_id)
        if "revision" not in body:
            raise _field_errors([{"field": "revision", "error": "required"}])
        edited = _edited_model(model, body)
        try:
            new_revision = ws.put_model(button_id, edited, expected_revision=int(body["revision"]))
        except RevisionConflict as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {"revision": new_revision}

    @app.post("/models/{button_id}/compensate")
    def start_compensation(button_id: str, body: dict = Body(default={})):
        _, model = load_model_or_404(button_id)
        try:
            plant = ws.get_plant(str(body.get("plant_id", "default")))
        except NotFound:
            raise HTTPException(status_code=404, detail="unknown plant")
        velocities = body.get("velocities")
        runs = int(body.get("runs", 4))
        interpolate_to = body.get("interpolate_to")

        def work():
            table, traces = compensate_model(
                model,
                plant,
                velocities=[float(v) for v in velocities] if velocities else None,
                runs=runs,
                interpolate_to=int(interpolate_to) if interpolate_to else None,
            )
            ws.put_actuation(table)
            return {
                "button_id": button_id,
                "velocities": [c.velocity_mm_s for c in table.sorted_curves()],
                "final_errors_cN": {
                    str(v): [runs_errs[-1] for runs_errs in errs] for v, errs in traces.items()
                },
            }

        job = jobs.submit("compensate", work)
        return {"job_id": job.id}

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        try:
            return jobs.get(job_id).to_dict()
        except NotFound:
            raise HTTPException(status_code=404, detail="unknown job")

    def _build_simulation(body: dict):
        button_id = body.get("button_id")
        if button_id is None:
            raise _field_errors([{"field": "button_id", "error": "required"}])
        _, model = load_model_or_404(str(button_id))
        try:
            tables = ws.get_actuation(str(button_id)).curves
        except NotFound:
            tables = None
        try:
            plant = ws.get_plant(str(body.get("plant_id", "default")))
        except NotFound:
            raise HTTPException(status_code=404, detail="unknown plant")
        if body.get("trajectory") is not None:
            trajectory = trajectory_from_dict(body["trajectory"])
        else:
            velocity = float(body.get("velocity_mm_s", 100.0))
            profile = str(body.get("profile", "constant-velocity"))
            if profile == "minimum-jerk":
                trajectory = minimum_jerk_press(
                    model.travel_range_mm, velocity * 1.875, rest_ms=30, hold_ms=30
                )
            else:
                trajectory = constant_velocity_press(
                    model.travel_range_mm, velocity, rest_ms=30, hold_ms=30
                )
        config = config_for_model(model)
        source = tables if tables else model
        return source, trajectory, config, plant, model

    @app.post("/simulate")
    def simulate(body: dict = Body(...)):
        source, trajectory, config, plant, model = _build_simulation(body)
        try:
            trace = run_press(source, trajectory, config, plant, target_model=model)
        except ButtonSimError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {
            "records": [r.to_dict() for r in trace.records],
            "summary": trace.summary,
        }

    @app.post("/sessions")
    def create_session(body: dict = Body(...)):
        # validate eagerly so the WS stream cannot fail on bad input
        _build_simulation(body)
        session_id = uuid.uuid4().hex[:12]
        sessions[session_id] = {"body": body, "status": "idle"}
        return {"session_id": session_id}

    @app.websocket("/ws/sessions/{session_id}")
    async def stream_session(websocket: WebSocket, session_id: str):
        await websocket.accept()
        session = sessions.get(session_id)
        if session is None:
            await websocket.send_text(json.dumps({"event": "error", "error": "unknown session"}))
            await websocket.close()
            return
        session["status"] = "running"
        try:
            source, trajectory, config, plant, model = _build_simulation(session["body"])
            trace = run_press(source, trajectory, config, plant, target_model=model)
            for record in trace.records:
                await websocket.send_text(json.dumps(record.to_dict()))
            await websocket.send_text(json.dumps({"event": "done", "summary": trace.summary}))
            session["status"] = "done"
            await websocket.close()
        except WebSocketDisconnect:
            session["status"] = "idle"

    @app.get("/vibration/{button_id}/templates")
    def vibration_templates(button_id: str):
        _, model = load_model_or_404(button_id)
        if model.vibration is None:
            return {"templates": [], "best_template_id": None}
        bank = generate_templates(model.vibration.duration_ms, model.vibration.frequency_hz)
        return {
            "templates": [t.to_dict() for t in bank],
            "best_template_id": ws.best_template(button_id),
            "ratings": ws.ratings_for(button_id),
        }

    @app.post("/vibration/{button_id}/rate")
    def rate_vibration(button_id: str, body: dict = Body(...)):
        revision, model = load_model_or_404(button_id)
        template_id = body.get("template_id")
        score = body.get("score")
        if template_id is None or score is None:
            raise _field_errors(
                [{"field": "template_id/score", "error": "both are required"}]
            )
        try:
            ws.rate_template(
                button_id, str(template_id), int(score), body.get("velocity_mm_s")
            )
        except ValidationError as exc:
            raise _field_errors([{"field": "score", "error": str(exc)}])
        best = ws.best_template(button_id)
        if model.vibration is not None and best is not None and best != model.vibration.template_id:
            model.vibration.template_id = best
            revision = ws.put_model(button_id, model, expected_revision=revision)
        return {"best_template_id": best, "revision": revision}

    @app.post("/optimize")
    def start_optimize(body: dict = Body(default={})):
        user_cfg = body.get("user", {})
        user = SimulatedUser(
            base_asynchrony_ms=float(user_cfg.get("base_asynchrony_ms", 100.0)),
            haptic_gain_ms=float(user_cfg.get("haptic_gain_ms", 35.0)),
            motor_noise_sigma_ms=float(user_cfg.get("motor_noise_sigma_ms", 5.0)),
            seed=int(body.get("seed", 0)),
        )
        difficulty = str(body.get("difficulty", "easy"))
        budget = int(body.get("budget", 30))
        trials = int(body.get("trials_per_eval", 20))

        def work():
            best, history = optimize(user, difficulty, budget, trials)
            return {
                "best_params": best.to_dict(),
                "incumbent_ms": history[-1]["incumbent_ms"],
                "history": history,
            }

        job = jobs.submit("optimize", work)
        return {"job_id": job.id}

    ui_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if ui_dir.is_dir():
        app.mount("/app", StaticFiles(directory=str(ui_dir), html=True), name="editor")

    return app
