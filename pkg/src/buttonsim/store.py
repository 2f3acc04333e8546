"""Flat-file workspace: models (with revisions), actuation tables, plants,
vibration ratings, and background jobs.

Everything persists as diff-able JSON under one directory (FDVV_WORKSPACE by
default). Mutations are serialized by a process-wide lock and guarded by
optimistic revision checks, so concurrent editors detect conflicts instead of
overwriting each other.
"""

from __future__ import annotations

import itertools
import json
import os
import threading
import uuid
from pathlib import Path

from .actuation import ActuationTable, table_from_dict, table_to_dict
from .errors import ParseError, ValidationError
from .model import FdvvModel, model_from_dict, model_to_dict
from .plant import VirtualPlant, plant_from_dict, plant_to_dict
from .vibration import generate_templates, template_distance

WORKSPACE_ENV = "FDVV_WORKSPACE"


class RevisionConflict(ValidationError):
    """Stale revision on a mutating operation."""


class NotFound(KeyError):
    pass


def default_workspace() -> Path:
    return Path(os.environ.get(WORKSPACE_ENV, "workspace"))


class Workspace:
    def __init__(self, root: Path | str | None = None):
        self.root = Path(root) if root is not None else default_workspace()
        for sub in ("models", "actuation", "plants"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()

    # -- models ----------------------------------------------------------

    def _model_path(self, button_id: str) -> Path:
        return self.root / "models" / f"{button_id}.json"

    def list_models(self) -> list[dict]:
        out = []
        for path in sorted((self.root / "models").glob("*.json")):
            payload = json.loads(path.read_text())
            out.append({"button_id": path.stem, "revision": payload.get("revision", 0)})
        return out

    def get_model(self, button_id: str) -> tuple[int, FdvvModel]:
        path = self._model_path(button_id)
        if not path.exists():
            raise NotFound(button_id)
        payload = json.loads(path.read_text())
        return int(payload.get("revision", 0)), model_from_dict(payload["model"])

    def put_model(
        self, button_id: str, model: FdvvModel, expected_revision: int | None = None
    ) -> int:
        """Store a model; bumps the revision. With expected_revision set the
        write fails on mismatch (optimistic concurrency)."""
        with self._lock:
            path = self._model_path(button_id)
            current = 0
            if path.exists():
                current = int(json.loads(path.read_text()).get("revision", 0))
            if expected_revision is not None and expected_revision != current:
                raise RevisionConflict(
                    f"revision {expected_revision} is stale (current {current})"
                )
            revision = current + 1
            path.write_text(
                json.dumps({"revision": revision, "model": model_to_dict(model)}, indent=2)
            )
            return revision

    # -- actuation tables --------------------------------------------------

    def get_actuation(self, button_id: str) -> ActuationTable:
        path = self.root / "actuation" / f"{button_id}.json"
        if not path.exists():
            raise NotFound(button_id)
        return table_from_dict(json.loads(path.read_text()))

    def put_actuation(self, table: ActuationTable) -> None:
        with self._lock:
            path = self.root / "actuation" / f"{table.button_id}.json"
            path.write_text(json.dumps(table_to_dict(table)))

    # -- plants ------------------------------------------------------------

    def get_plant(self, plant_id: str) -> VirtualPlant:
        path = self.root / "plants" / f"{plant_id}.json"
        if not path.exists():
            if plant_id == "default":
                plant = VirtualPlant()
                self.put_plant(plant)
                return plant
            raise NotFound(plant_id)
        return plant_from_dict(json.loads(path.read_text()))

    def put_plant(self, plant: VirtualPlant) -> None:
        with self._lock:
            path = self.root / "plants" / f"{plant.plant_id}.json"
            path.write_text(json.dumps(plant_to_dict(plant), indent=2))

    # -- vibration ratings ---------------------------------------------------

    def _ratings_path(self) -> Path:
        return self.root / "ratings.json"

    def _load_ratings(self) -> dict:
        path = self._ratings_path()
        return json.loads(path.read_text()) if path.exists() else {}

    def rate_template(
        self, button_id: str, template_id: str, score: int, velocity_mm_s: float | None = None
    ) -> None:
        if not (1 <= score <= 7):
            raise ValidationError("rating score must be in 1..7")
        with self._lock:
            ratings = self._load_ratings()
            entry = ratings.setdefault(button_id, {})
            entry[template_id] = {"score": score, "velocity_mm_s": velocity_mm_s}
            self._ratings_path().write_text(json.dumps(ratings, indent=2))

    def ratings_for(self, button_id: str) -> dict:
        return self._load_ratings().get(button_id, {})

    def best_template(self, button_id: str) -> str | None:
        """Highest-rated template; ties go to the one closest to the measured
        burst features recorded on the model."""
        ratings = self.ratings_for(button_id)
        if not ratings:
            return None
        try:
            _, model = self.get_model(button_id)
            vib = model.vibration
        except NotFound:
            vib = None
        bank = (
            {t.template_id: t for t in generate_templates(vib.duration_ms, vib.frequency_hz)}
            if vib
            else {}
        )

        def sort_key(item):
            template_id, record = item
            distance = (
                template_distance(bank[template_id], vib.duration_ms, vib.frequency_hz)
                if template_id in bank
                else float("inf")
            )
            return (-record["score"], distance, template_id)

        return sorted(ratings.items(), key=sort_key)[0][0]


class Job:
    def __init__(self, kind: str):
        self.id = uuid.uuid4().hex[:12]
        self.kind = kind
        self.status = "pending"
        self.result = None
        self.error = None

    def to_dict(self) -> dict:
        out = {"job_id": self.id, "kind": self.kind, "status": self.status}
        if self.result is not None:
            out["result"] = self.result
        if self.error is not None:
            out["error"] = self.error
        return out


class JobRegistry:
    """Background workers with polling; one thread per job."""

    def __init__(self):
        self._jobs: dict[str, Job] = {}
        self._lock = threading.Lock()

    def submit(self, kind: str, fn, *args, **kwargs) -> Job:
        job = Job(kind)
        with self._lock:
            self._jobs[job.id] = job

        def run():
            job.status = "running"
            try:
                job.result = fn(*args, **kwargs)
                job.status = "done"
            except Exception as exc:  # noqa: BLE001 - job boundary
                job.error = str(exc)
                job.status = "error"

        thread = threading.Thread(target=run, daemon=True)
        thread.start()
        job._thread = thread
        return job

    def get(self, job_id: str) -> Job:
        with self._lock:
            if job_id not in self._jobs:
                raise NotFound(job_id)
            return self._jobs[job_id]

    def wait(self, job_id: str, timeout: float = 60.0) -> Job:
        job = self.get(job_id)
        job._thread.join(timeout)
        return job
