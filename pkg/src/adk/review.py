"""HTTP backend for human review of proposed labels.

State lives in the dataset directory itself: the YOLO txt files always
hold the current active (non-rejected) boxes so the rest of the pipeline
can consume them directly, and a ``review.json`` sidecar holds statuses,
sources, rejected records, per-image revisions, and done flags. Writes
use optimistic concurrency: every successful PUT bumps the image's
revision, and a PUT carrying a stale revision is rejected with 409.

Expected dataset layout under the root:

    manifest.json   dataset manifest (classes, images, sizes)
    images/...      image files, at the paths the manifest names
    labels/<id>.txt YOLO labels (created on demand)
    review.json     sidecar, created on first write
"""

import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path

from .geometry import Annotation, BBox, DatasetManifest, ImageRecord, Source, Status
from .labelio import manifest_from_json, read_yolo, write_yolo

_MEDIA_TYPES = {
    ".png": "image/png",
    ".jpg": "image/jpeg",
    ".jpeg": "image/jpeg",
    ".bmp": "image/bmp",
    ".tif": "image/tiff",
    ".tiff": "image/tiff",
}


class StaleRevision(Exception):
    def __init__(self, current: int):
        super().__init__(f"stale revision; current is {current}")
        self.current = current


class UnknownImage(KeyError):
    pass


class BadRecord(ValueError):
    pass


def _record_to_dict(rec: dict) -> dict:
    return {
        "class_id": rec["class_id"],
        "x1": rec["x1"],
        "y1": rec["y1"],
        "x2": rec["x2"],
        "y2": rec["y2"],
        "status": rec["status"],
        "source": rec["source"],
    }


def _validate_record(rec, image: ImageRecord, n_classes: int) -> dict:
    if not isinstance(rec, dict):
        raise BadRecord("annotation must be an object")
    try:
        class_id = int(rec["class_id"])
        x1, y1 = float(rec["x1"]), float(rec["y1"])
        x2, y2 = float(rec["x2"]), float(rec["y2"])
        status = str(rec.get("status", Status.PROPOSED.value))
        source = str(rec.get("source", Source.MODEL.value))
    except (KeyError, TypeError, ValueError) as exc:
        raise BadRecord(f"bad annotation fields: {exc}") from exc
    if not 0 <= class_id < n_classes:
        raise BadRecord(f"class_id {class_id} outside [0, {n_classes})")
    if status not in {s.value for s in Status}:
        raise BadRecord(f"unknown status {status!r}")
    if source not in {s.value for s in Source}:
        raise BadRecord(f"unknown source {source!r}")
    if not (0 <= x1 < x2 <= image.width and 0 <= y1 < y2 <= image.height):
        raise BadRecord(
            f"box ({x1}, {y1}, {x2}, {y2}) not inside {image.width}x{image.height} image"
        )
    return {
        "class_id": class_id,
        "x1": x1,
        "y1": y1,
        "x2": x2,
        "y2": y2,
        "status": status,
        "source": source,
    }


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


@dataclass
class _ImageState:
    revision: int
    done: bool
    annotations: list[dict]  # active and rejected records, client order


class ReviewStore:
    """Disk-backed label store with per-image revisions.

    Writes are serialized under one lock (a conservative superset of
    per-image serialization); reads of in-memory state take it too, so a
    reader never observes a half-applied write.
    """

    def __init__(self, root: Path):
        self.root = Path(root)
        manifest_path = self.root / "manifest.json"
        if not manifest_path.is_file():
            raise FileNotFoundError(f"no manifest.json under {self.root}")
        self.manifest: DatasetManifest = manifest_from_json(manifest_path.read_text("utf-8"))
        self.label_dir = self.root / (self.manifest.label_dir or "labels")
        self.label_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._states: dict[str, _ImageState] = {}
        sidecar = self._sidecar_path()
        stored = {}
        if sidecar.is_file():
            stored = json.loads(sidecar.read_text("utf-8")).get("images", {})
        for image in self.manifest.images:
            if image.id in stored:
                entry = stored[image.id]
                self._states[image.id] = _ImageState(
                    revision=int(entry.get("revision", 0)),
                    done=bool(entry.get("done", False)),
                    annotations=[_record_to_dict(r) for r in entry.get("annotations", [])],
                )
            else:
                self._states[image.id] = _ImageState(
                    revision=0, done=False, annotations=self._load_txt(image)
                )

    def _sidecar_path(self) -> Path:
        return self.root / "review.json"

    def _label_path(self, image_id: str) -> Path:
        return self.label_dir / f"{image_id}.txt"

    def _load_txt(self, image: ImageRecord) -> list[dict]:
        # Label files carry no review state, so on first sight every box
        # is an unreviewed model proposal.
        path = self._label_path(image.id)
        if not path.is_file():
            return []
        anns = read_yolo(path.read_text("utf-8"), image.width, image.height, self.manifest.classes)
        return [
            {
                "class_id": a.class_id,
                "x1": a.bbox.x1,
                "y1": a.bbox.y1,
                "x2": a.bbox.x2,
                "y2": a.bbox.y2,
                "status": Status.PROPOSED.value,
                "source": Source.MODEL.value,
            }
            for a in anns
        ]

    def _image(self, image_id: str) -> ImageRecord:
        try:
            return self.manifest.image(image_id)
        except KeyError:
            raise UnknownImage(image_id) from None

    # -- reads ---------------------------------------------------------------

    def image_path(self, image_id: str) -> Path:
        return self.root / self._image(image_id).path

    def labels(self, image_id: str) -> dict:
        self._image(image_id)
        with self._lock:
            state = self._states[image_id]
            return {
                "revision": state.revision,
                "annotations": [dict(r) for r in state.annotations],
            }

    def manifest_view(self) -> dict:
        with self._lock:
            return {
                "classes": list(self.manifest.classes),
                "images": [
                    {
                        "id": im.id,
                        "width": im.width,
                        "height": im.height,
                        "done": self._states[im.id].done,
                        "revision": self._states[im.id].revision,
                        "annotations": len(self._states[im.id].annotations),
                    }
                    for im in self.manifest.images
                ],
            }

    def progress(self) -> dict:
        with self._lock:
            done = sum(1 for s in self._states.values() if s.done)
            return {"done": done, "total": len(self._states)}

    # -- writes ----------------------------------------------------------------

    def put_labels(self, image_id: str, revision: int, annotations: list) -> int:
        """Replace an image's records; returns the new revision.

        The caller sends the full list, rejected records included; the
        active (non-rejected) subset is what lands in the YOLO txt file.
        """
        image = self._image(image_id)
        records = [_validate_record(r, image, len(self.manifest.classes)) for r in annotations]
        with self._lock:
            state = self._states[image_id]
            if int(revision) != state.revision:
                raise StaleRevision(state.revision)
            state.annotations = records
            state.revision += 1
            self._flush_locked(image, state)
            return state.revision

    def mark_done(self, image_id: str) -> dict:
        self._image(image_id)
        with self._lock:
            state = self._states[image_id]
            state.done = True
            self._flush_sidecar_locked()
            done = sum(1 for s in self._states.values() if s.done)
            return {"done": done, "total": len(self._states)}

    def _flush_locked(self, image: ImageRecord, state: _ImageState) -> None:
        active = [
            Annotation(
                class_id=r["class_id"],
                bbox=BBox(r["x1"], r["y1"], r["x2"], r["y2"]),
                status=Status(r["status"]),
                source=Source(r["source"]),
            )
            for r in state.annotations
            if r["status"] != Status.REJECTED.value
        ]
        _atomic_write(self._label_path(image.id), write_yolo(active, image.width, image.height))
        self._flush_sidecar_locked()

    def _flush_sidecar_locked(self) -> None:
        payload = {
            "images": {
                image_id: {
                    "revision": s.revision,
                    "done": s.done,
                    "annotations": s.annotations,
                }
                for image_id, s in sorted(self._states.items())
            }
        }
        _atomic_write(self._sidecar_path(), json.dumps(payload, indent=2, sort_keys=True) + "\n")


def create_app(root: Path, ui_dir: Path | None = None):
    """Build the FastAPI app for a dataset directory.

    Bodies are parsed by hand so malformed input is a 400, distinct from
    the 409 reserved for stale revisions and 404 for unknown ids.
    """
    from fastapi import FastAPI, Request
    from fastapi.responses import FileResponse, JSONResponse
    from fastapi.staticfiles import StaticFiles

    store = ReviewStore(Path(root))
    app = FastAPI(title="label review service")
    app.state.store = store

    def not_found(image_id: str) -> JSONResponse:
        return JSONResponse({"detail": f"unknown image {image_id!r}"}, status_code=404)

    @app.get("/api/manifest")
    def get_manifest():
        return store.manifest_view()

    @app.get("/api/progress")
    def get_progress():
        return store.progress()

    @app.get("/api/image/{image_id}")
    def get_image(image_id: str):
        try:
            path = store.image_path(image_id)
        except UnknownImage:
            return not_found(image_id)
        if not path.is_file():
            return not_found(image_id)
        media = _MEDIA_TYPES.get(path.suffix.lower(), "application/octet-stream")
        return FileResponse(path, media_type=media)

    @app.get("/api/labels/{image_id}")
    def get_labels(image_id: str):
        try:
            return store.labels(image_id)
        except UnknownImage:
            return not_found(image_id)

    @app.put("/api/labels/{image_id}")
    async def put_labels(image_id: str, request: Request):
        try:
            body = await request.json()
        except Exception:
            return JSONResponse({"detail": "body is not valid JSON"}, status_code=400)
        if not isinstance(body, dict) or "revision" not in body or "annotations" not in body:
            return JSONResponse(
                {"detail": "body must be {revision, annotations}"}, status_code=400
            )
        if not isinstance(body["annotations"], list) or not isinstance(body["revision"], int):
            return JSONResponse(
                {"detail": "revision must be an integer, annotations a list"}, status_code=400
            )
        try:
            new_rev = store.put_labels(image_id, body["revision"], body["annotations"])
        except UnknownImage:
            return not_found(image_id)
        except BadRecord as exc:
            return JSONResponse({"detail": str(exc)}, status_code=400)
        except StaleRevision as exc:
            return JSONResponse(
                {"detail": "stale revision", "revision": exc.current}, status_code=409
            )
        return {"revision": new_rev}

    @app.post("/api/labels/{image_id}/complete")
    def complete(image_id: str):
        try:
            return store.mark_done(image_id)
        except UnknownImage:
            return not_found(image_id)

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app


def serve(root: Path, port: int = 8000, host: str = "127.0.0.1", ui_dir: Path | None = None) -> None:
    import uvicorn

    uvicorn.run(create_app(root, ui_dir=ui_dir), host=host, port=port, log_level="warning")
