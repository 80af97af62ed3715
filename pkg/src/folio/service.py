"""Embedded HTTP service for the interactive annotation workflow.

Sessions persist on disk under the store directory: source image, seed
clicks, the painted annotation, and one artifact per pipeline stage.  The
stage DAG is

    d1 (chan-vese from seeds)      labels (k-means over features)
            \\                       /
             damage (propagate + refine, unioned with painted strokes)
                |
                tv  ->  result

Every artifact stores the content key it was built from (stage parameters,
source/seed/annotation hashes and parent keys, recursively).  An artifact
is fresh only while that key still matches, so mutating seeds, strokes or
parameters invalidates exactly the downstream stages.  Re-running a stage
whose key already matches returns the cached artifact bytes unchanged.

Jobs run asynchronously on a small worker pool and are polled by id; runs
on one session serialize, distinct sessions proceed independently.
"""

from __future__ import annotations

import hashlib
import io
import json
import shutil
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Request, Response

from .errors import InvalidInputError
from .exemplar import PatchParams, inpaint_exemplar
from .pipeline import DamageConfig, KMeansConfig
from .raster import (
    AnnotationMask,
    Image,
    Label,
    compute_features,
    decode_annotation,
    encode_annotation,
    load_annotation,
    load_image,
)
from .segmentation import (
    ChanVeseParams,
    chan_vese_segment,
    kmeans_label,
    propagate_training_labels,
    refine_mask,
)
from .segmentation import LabelMap
from .tv import TvParams, tv_inpaint

STROKE_LABELS = {
    "keep": Label.KEEP,
    "inpaint": Label.INPAINT,
    "training": Label.TRAINING,
    "neumann": Label.NEUMANN_EDGE,
    "zero_drift": Label.ZERO_DRIFT_EDGE,
    "dirichlet": Label.DIRICHLET_RIM,
}

STAGES: dict[str, dict] = {
    "d1": {"parents": (), "uses_seeds": True, "uses_annotation": False},
    "labels": {"parents": (), "uses_seeds": False, "uses_annotation": False},
    "damage": {"parents": ("d1", "labels"), "uses_seeds": False, "uses_annotation": True},
    "tv": {"parents": ("damage",), "uses_seeds": False, "uses_annotation": False},
    "result": {"parents": ("damage", "tv"), "uses_seeds": False, "uses_annotation": False},
}

DEFAULT_PARAMS: dict[str, dict] = {
    "d1": asdict(ChanVeseParams()),
    "labels": asdict(KMeansConfig()),
    "damage": asdict(DamageConfig()),
    "tv": asdict(TvParams()),
    "result": asdict(PatchParams()),
}


def rasterize_stroke(
    labels: np.ndarray, points: list[tuple[int, int]], radius: float, label: Label
) -> None:
    """Paint a polyline with a round brush into the label field, in place.

    A pixel is painted when its center lies within max(radius, 0.5) of any
    segment (single points paint a disc).
    """
    h, w = labels.shape
    r = max(float(radius), 0.5)
    segments = list(zip(points, points[1:])) if len(points) > 1 else [(points[0], points[0])]
    for (x0, y0), (x1, y1) in segments:
        lo_x = max(int(np.floor(min(x0, x1) - r)), 0)
        hi_x = min(int(np.ceil(max(x0, x1) + r)) + 1, w)
        lo_y = max(int(np.floor(min(y0, y1) - r)), 0)
        hi_y = min(int(np.ceil(max(y0, y1) + r)) + 1, h)
        if lo_x >= hi_x or lo_y >= hi_y:
            continue
        yy, xx = np.mgrid[lo_y:hi_y, lo_x:hi_x]
        dx = float(x1 - x0)
        dy = float(y1 - y0)
        norm = dx * dx + dy * dy
        if norm == 0.0:
            dist2 = (xx - x0) ** 2 + (yy - y0) ** 2
        else:
            t = np.clip(((xx - x0) * dx + (yy - y0) * dy) / norm, 0.0, 1.0)
            dist2 = (xx - x0 - t * dx) ** 2 + (yy - y0 - t * dy) ** 2
        hit = dist2 <= r * r
        labels[lo_y:hi_y, lo_x:hi_x][hit] = int(label)


def _sha(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class SessionStore:
    """Disk-backed session with per-session locking and stage cache keys."""

    def __init__(self, root: Path, session_id: str):
        self.id = session_id
        self.dir = root / session_id
        self.artifacts_dir = self.dir / "artifacts"
        self.state_lock = threading.Lock()
        self.run_lock = threading.Lock()

    # --- creation / loading -------------------------------------------------

    @classmethod
    def create(cls, root: Path, png_bytes: bytes) -> "SessionStore":
        session = cls(root, uuid.uuid4().hex[:12])
        session.artifacts_dir.mkdir(parents=True)
        (session.dir / "source.png").write_bytes(png_bytes)
        img = session.source()
        blank = AnnotationMask.blank(img.height, img.width)
        (session.dir / "annotation.png").write_bytes(encode_annotation(blank))
        session.write_seeds([])
        return session

    def exists(self) -> bool:
        return (self.dir / "source.png").exists()

    def source(self) -> Image:
        return load_image(self.dir / "source.png")

    def source_hash(self) -> str:
        return _sha((self.dir / "source.png").read_bytes())

    # --- seeds / annotation -------------------------------------------------

    def seeds(self) -> list[tuple[int, int]]:
        return [tuple(s) for s in json.loads((self.dir / "seeds.json").read_text())]

    def write_seeds(self, seeds: list) -> None:
        (self.dir / "seeds.json").write_text(json.dumps([list(s) for s in seeds]))

    def annotation_bytes(self) -> bytes:
        return (self.dir / "annotation.png").read_bytes()

    def annotation(self) -> AnnotationMask:
        return decode_annotation(self.annotation_bytes())

    def write_annotation(self, mask: AnnotationMask) -> None:
        (self.dir / "annotation.png").write_bytes(encode_annotation(mask))

    # --- cache keys -----------------------------------------------------------

    def _key_path(self, stage: str) -> Path:
        return self.artifacts_dir / f"{stage}.key"

    def artifact_path(self, stage: str) -> Path:
        return self.artifacts_dir / f"{stage}.png"

    def stored_entry(self, stage: str) -> dict | None:
        path = self._key_path(stage)
        if not path.exists() or not self.artifact_path(stage).exists():
            return None
        return json.loads(path.read_text())

    def compute_key(self, stage: str, params: dict) -> str | None:
        """Key for this stage given params and the CURRENT upstream state;
        None when a parent artifact is missing or stale."""
        spec = STAGES[stage]
        payload: dict = {"stage": stage, "source": self.source_hash(), "params": params}
        if spec["uses_seeds"]:
            payload["seeds"] = self.seeds()
        if spec["uses_annotation"]:
            payload["annotation"] = _sha(self.annotation_bytes())
        parents = {}
        for parent in spec["parents"]:
            parent_key = self.current_key(parent)
            if parent_key is None:
                return None
            parents[parent] = parent_key
        if parents:
            payload["parents"] = parents
        return _sha(json.dumps(payload, sort_keys=True).encode())

    def current_key(self, stage: str) -> str | None:
        """Stored key if the artifact is fresh, else None."""
        entry = self.stored_entry(stage)
        if entry is None:
            return None
        expected = self.compute_key(stage, entry["params"])
        if expected is None or expected != entry["key"]:
            return None
        return entry["key"]

    def store_artifact(self, stage: str, png_bytes: bytes, key: str, params: dict) -> None:
        tmp = self.artifact_path(stage).with_suffix(".tmp")
        tmp.write_bytes(png_bytes)
        tmp.replace(self.artifact_path(stage))
        self._key_path(stage).write_text(json.dumps({"key": key, "params": params}))


class JobRegistry:
    def __init__(self):
        self.lock = threading.Lock()
        self.jobs: dict[str, dict] = {}

    def create(self, session_id: str, stage: str) -> str:
        job_id = uuid.uuid4().hex[:12]
        with self.lock:
            self.jobs[job_id] = {"session": session_id, "stage": stage, "state": "queued",
                                 "error": None}
        return job_id

    def update(self, job_id: str, **fields) -> None:
        with self.lock:
            self.jobs[job_id].update(fields)

    def get(self, job_id: str) -> dict | None:
        with self.lock:
            job = self.jobs.get(job_id)
            return dict(job) if job else None


def _png_bytes_of_image(img: Image) -> bytes:
    buf = io.BytesIO()
    from PIL import Image as PILImage

    arr = np.clip(np.rint(img.data * 255.0), 0, 255).astype(np.uint8)
    mode = "L" if arr.shape[2] == 1 else "RGB"
    data = arr[:, :, 0] if mode == "L" else arr
    PILImage.fromarray(data, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


def _compute_stage(session: SessionStore, stage: str, params: dict) -> bytes:
    """Run one stage from the persisted inputs; returns the artifact PNG."""
    source = session.source()
    if stage == "d1":
        seeds = session.seeds()
        if not seeds:
            raise InvalidInputError("post seeds before running the d1 stage")
        result = chan_vese_segment(source, seeds, ChanVeseParams(**params))
        return encode_annotation(AnnotationMask.from_binary(result.mask, Label.TRAINING))

    if stage == "labels":
        features = compute_features(source)
        cfg = KMeansConfig(**params)
        label_map, _ = kmeans_label(features, k=cfg.k, restarts=cfg.restarts,
                                    rng_seed=cfg.rng_seed)
        from PIL import Image as PILImage

        buf = io.BytesIO()
        PILImage.fromarray(label_map.ids.astype(np.uint8), mode="L").save(buf, format="PNG")
        return buf.getvalue()

    if stage == "damage":
        cfg = DamageConfig(**params)
        d1 = load_annotation(session.artifact_path("d1")).training
        from PIL import Image as PILImage

        with PILImage.open(session.artifact_path("labels")) as pil:
            ids = np.asarray(pil.convert("L"), dtype=np.int32)
        label_map = LabelMap(ids=ids, n_clusters=int(ids.max()) + 1)
        raw = propagate_training_labels(label_map, d1, cfg.min_overlap)
        refined = refine_mask(raw, cfg.min_area, cfg.closing_radius)
        painted = session.annotation().inpaint
        return encode_annotation(AnnotationMask.from_binary(refined | painted, Label.INPAINT))

    if stage == "tv":
        damage = load_annotation(session.artifact_path("damage")).inpaint
        result = tv_inpaint(source, damage, TvParams(**params))
        return _png_bytes_of_image(result.image)

    if stage == "result":
        damage = load_annotation(session.artifact_path("damage")).inpaint
        init = load_image(session.artifact_path("tv"))
        result = inpaint_exemplar(source, damage, PatchParams(**params), init_image=init)
        return _png_bytes_of_image(result.image)

    raise InvalidInputError(f"unknown stage {stage!r}")


def create_app(store_dir: str | Path) -> FastAPI:
    root = Path(store_dir)
    root.mkdir(parents=True, exist_ok=True)
    app = FastAPI(title="folio annotation service")
    sessions: dict[str, SessionStore] = {}
    sessions_lock = threading.Lock()
    jobs = JobRegistry()
    executor = ThreadPoolExecutor(max_workers=2)

    # Re-attach sessions already on disk (browser refresh, service restart).
    for path in root.iterdir() if root.exists() else []:
        if (path / "source.png").exists():
            sessions[path.name] = SessionStore(root, path.name)

    def get_session(session_id: str) -> SessionStore:
        with sessions_lock:
            session = sessions.get(session_id)
        if session is None or not session.exists():
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return session

    @app.post("/sessions")
    async def create_session(request: Request):
        body = await request.body()
        if not body:
            raise HTTPException(status_code=400, detail="request body must be a PNG image")
        try:
            session = SessionStore.create(root, body)
        except Exception as exc:
            raise HTTPException(status_code=400, detail=f"cannot decode image: {exc}")
        with sessions_lock:
            sessions[session.id] = session
        img = session.source()
        return {"id": session.id, "width": img.width, "height": img.height}

    @app.post("/sessions/{session_id}/seeds")
    def post_seeds(session_id: str, payload: dict):
        session = get_session(session_id)
        seeds = payload.get("seeds")
        if not isinstance(seeds, list):
            raise HTTPException(status_code=400, detail="payload needs a 'seeds' list")
        img = session.source()
        for seed in seeds:
            if not (0 <= int(seed[0]) < img.width and 0 <= int(seed[1]) < img.height):
                raise HTTPException(status_code=400, detail=f"seed {seed} outside the image")
        with session.state_lock:
            session.write_seeds([(int(s[0]), int(s[1])) for s in seeds])
        return {"seeds": session.seeds()}

    @app.post("/sessions/{session_id}/strokes")
    def post_strokes(session_id: str, payload: dict):
        session = get_session(session_id)
        strokes = payload.get("strokes")
        if not isinstance(strokes, list):
            raise HTTPException(status_code=400, detail="payload needs a 'strokes' list")
        with session.state_lock:
            mask = session.annotation()
            labels = mask.labels.copy()
            for stroke in strokes:
                name = stroke.get("label")
                if name not in STROKE_LABELS:
                    raise HTTPException(status_code=400, detail=f"unknown stroke label {name!r}")
                points = [(float(p[0]), float(p[1])) for p in stroke.get("points", [])]
                if not points:
                    raise HTTPException(status_code=400, detail="stroke needs points")
                rasterize_stroke(labels, points, float(stroke.get("radius", 1)),
                                 STROKE_LABELS[name])
            session.write_annotation(AnnotationMask(labels))
            digest = _sha(session.annotation_bytes())
        return {"annotation_sha256": digest}

    @app.post("/sessions/{session_id}/stages/{stage}/run")
    def run_stage(session_id: str, stage: str, payload: dict | None = None):
        session = get_session(session_id)
        if stage not in STAGES:
            raise HTTPException(status_code=404, detail=f"unknown stage {stage!r}")
        params = dict(DEFAULT_PARAMS[stage])
        overrides = (payload or {}).get("params") or {}
        unknown = set(overrides) - set(params)
        if unknown:
            raise HTTPException(status_code=400, detail=f"unknown params {sorted(unknown)}")
        params.update(overrides)

        for parent in STAGES[stage]["parents"]:
            if session.current_key(parent) is None:
                raise HTTPException(
                    status_code=409,
                    detail=f"dependency {parent!r} is missing or stale; run it first",
                )

        key = session.compute_key(stage, params)
        entry = session.stored_entry(stage)
        if key is not None and entry is not None and entry["key"] == key:
            job_id = jobs.create(session.id, stage)
            jobs.update(job_id, state="done", cached=True)
            return {"job": job_id, "state": "done", "cached": True}

        job_id = jobs.create(session.id, stage)

        def work():
            with session.run_lock:
                jobs.update(job_id, state="running")
                try:
                    # Key recomputed under the lock: upstream may have moved
                    # between scheduling and execution.
                    current = session.compute_key(stage, params)
                    if current is None:
                        raise InvalidInputError("a dependency became stale before the run")
                    png = _compute_stage(session, stage, params)
                    session.store_artifact(stage, png, current, params)
                    jobs.update(job_id, state="done")
                except Exception as exc:  # noqa: BLE001 - job must capture any failure
                    jobs.update(job_id, state="failed", error=f"{type(exc).__name__}: {exc}")

        executor.submit(work)
        return {"job": job_id, "state": "queued"}

    @app.get("/sessions/{session_id}/jobs/{job_id}")
    def get_job(session_id: str, job_id: str):
        get_session(session_id)
        job = jobs.get(job_id)
        if job is None or job["session"] != session_id:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id}")
        return job

    @app.get("/sessions/{session_id}/artifacts/{name}")
    def get_artifact(session_id: str, name: str):
        session = get_session(session_id)
        if name == "annotation":
            return Response(content=session.annotation_bytes(), media_type="image/png")
        if name == "source":
            return Response(content=(session.dir / "source.png").read_bytes(),
                            media_type="image/png")
        if name not in STAGES:
            raise HTTPException(status_code=404, detail=f"unknown artifact {name!r}")
        if session.current_key(name) is None:
            raise HTTPException(
                status_code=409,
                detail=f"artifact {name!r} is missing or stale; run the stage first",
            )
        return Response(content=session.artifact_path(name).read_bytes(),
                        media_type="image/png")

    @app.get("/sessions/{session_id}/stages")
    def stage_states(session_id: str):
        session = get_session(session_id)
        return {
            stage: {
                "fresh": session.current_key(stage) is not None,
                "parents": list(spec["parents"]),
            }
            for stage, spec in STAGES.items()
        }

    @app.delete("/sessions/{session_id}")
    def delete_session(session_id: str):
        session = get_session(session_id)
        with sessions_lock:
            sessions.pop(session_id, None)
        shutil.rmtree(session.dir, ignore_errors=True)
        return {"deleted": session_id}

    return app
