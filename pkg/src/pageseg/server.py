"""HTTP server behind the `annotate` command.

A small JSON API plus static hosting for the browser annotation UI:

    GET  /api/images                      list images with annotation status
    GET  /api/image/<path>                raw image bytes
    GET  /api/annotation/<path>           one record, 404 when unannotated
    PUT  /api/annotation/<path>           store a record (canonicalized here)
    GET  /api/prediction/<path>?system=S  S in model | mean-quad | full-image
    GET  /                                the UI (placeholder if none built)

Records use the annotation grammar's field names as JSON keys.  Concurrent
conflicting puts resolve last-writer-wins; a stale base revision is flagged
with an X-Annotation-Conflict response header.  The annotation file is
rewritten atomically under a lock on every accepted put.
"""

from __future__ import annotations

import json
import math
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, unquote, urlparse

from . import baselines, fcn, image_io, pipeline
from .dataset import AnnotationRecord, load_annotations, save_annotations
from .geometry import canonicalize

_IMAGE_SUFFIXES = (".png", ".ppm", ".pgm")

_PLACEHOLDER = """<!doctype html>
<html><head><title>pageseg annotate</title></head>
<body><h1>pageseg annotation server</h1>
<p>No UI build was configured (--ui-dir). The JSON API is live under /api/.</p>
</body></html>
"""


class AnnotationStore:
    """Images plus their annotation records, persisted to one file."""

    def __init__(self, annotations_path, images_dir):
        self.annotations_path = Path(annotations_path)
        self.images_dir = Path(images_dir)
        self._lock = threading.Lock()
        self.records: dict[str, AnnotationRecord] = {}
        self.revisions: dict[str, int] = {}
        self.images: list[str] = sorted(
            str(p.relative_to(self.images_dir))
            for p in self.images_dir.rglob("*")
            if p.suffix.lower() in _IMAGE_SUFFIXES
        )
        self._dims: dict[str, tuple[int, int]] = {}
        if self.annotations_path.exists():
            for rec in load_annotations(self.annotations_path):
                self.records[rec.image_path] = rec
                self.revisions[rec.image_path] = 1

    def dims(self, image_path: str) -> tuple[int, int]:
        """(width, height) of an image, cached."""
        if image_path not in self._dims:
            img = image_io.read_image(self.images_dir / image_path)
            self._dims[image_path] = (img.shape[1], img.shape[0])
        return self._dims[image_path]

    def listing(self) -> list[dict]:
        out = []
        for path in self.images:
            w, h = self.dims(path)
            rec = self.records.get(path)
            out.append(
                {
                    "image_path": path,
                    "width": w,
                    "height": h,
                    "annotated": rec is not None,
                    "annotator_id": rec.annotator_id if rec else None,
                    "revision": self.revisions.get(path, 0),
                }
            )
        return out

    def get(self, image_path: str) -> AnnotationRecord | None:
        return self.records.get(image_path)

    def put(self, image_path: str, corners, annotator_id, base_revision):
        """Store a record; returns (record, revision, conflict)."""
        w, h = self.dims(image_path)
        quad = canonicalize(corners)
        record = AnnotationRecord(image_path, w, h, quad, annotator_id)
        with self._lock:
            current = self.revisions.get(image_path, 0)
            conflict = base_revision is not None and base_revision != current
            self.records[image_path] = record
            self.revisions[image_path] = current + 1
            ordered = [self.records[p] for p in self.images if p in self.records]
            save_annotations(self.annotations_path, ordered)
            return record, current + 1, conflict


def _record_json(record: AnnotationRecord, revision: int) -> dict:
    return {
        "image_path": record.image_path,
        "width": record.width,
        "height": record.height,
        "corners": [[p.x, p.y] for p in record.quad.corners],
        "annotator_id": record.annotator_id,
        "revision": revision,
    }


class _Predictors:
    """Lazy per-image quad predictions for overlay review."""

    def __init__(self, store, model_path, mean_quad_path, input_size):
        self.store = store
        self.input_size = input_size
        self.model = fcn.load_model(model_path) if model_path else None
        self.mean_quad = baselines.load_mean_quad(mean_quad_path) if mean_quad_path else None
        self._cache: dict[tuple[str, str], object] = {}
        self._lock = threading.Lock()

    def predict(self, system: str, image_path: str):
        key = (system, image_path)
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        w, h = self.store.dims(image_path)
        if system == "full-image":
            quad = baselines.predict_full_image(w, h)
        elif system == "mean-quad":
            if self.mean_quad is None:
                return None
            quad = baselines.predict_mean_quad(self.mean_quad, w, h)
        elif system == "model":
            if self.model is None:
                return None
            img = image_io.read_image(self.store.images_dir / image_path)
            quad = pipeline.predict_quad(self.model, img, self.input_size)
        else:
            raise ValueError(f"unknown system {system!r}")
        with self._lock:
            self._cache[key] = quad
        return quad


def make_server(
    host: str,
    port: int,
    annotations_path,
    images_dir,
    model_path=None,
    mean_quad_path=None,
    ui_dir=None,
    input_size: int = 256,
) -> ThreadingHTTPServer:
    store = AnnotationStore(annotations_path, images_dir)
    predictors = _Predictors(store, model_path, mean_quad_path, input_size)
    ui_root = Path(ui_dir).resolve() if ui_dir else None

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *log_args):  # keep test output quiet
            pass

        def _send(self, code, body: bytes, content_type: str, headers=None):
            self.send_response(code)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            for k, v in (headers or {}).items():
                self.send_header(k, v)
            self.end_headers()
            self.wfile.write(body)

        def _json(self, code, payload, headers=None):
            body = json.dumps(payload).encode("utf-8")
            self._send(code, body, "application/json", headers)

        def _error(self, code, message):
            self._json(code, {"error": message})

        def _image_path(self, prefix, raw):
            rel = unquote(raw[len(prefix) :])
            if rel not in store.images and rel not in store.records:
                return None
            return rel

        def do_GET(self):
            url = urlparse(self.path)
            path = url.path
            if path == "/api/images":
                self._json(200, store.listing())
            elif path.startswith("/api/image/"):
                rel = self._image_path("/api/image/", path)
                if rel is None:
                    return self._error(404, "unknown image")
                file_path = (store.images_dir / rel).resolve()
                if not str(file_path).startswith(str(store.images_dir.resolve())):
                    return self._error(404, "unknown image")
                ctype = "image/png" if file_path.suffix == ".png" else "application/octet-stream"
                self._send(200, file_path.read_bytes(), ctype)
            elif path.startswith("/api/annotation/"):
                rel = self._image_path("/api/annotation/", path)
                if rel is None:
                    return self._error(404, "unknown image")
                rec = store.get(rel)
                if rec is None:
                    return self._error(404, "not annotated yet")
                self._json(200, _record_json(rec, store.revisions.get(rel, 0)))
            elif path.startswith("/api/prediction/"):
                rel = self._image_path("/api/prediction/", path)
                if rel is None:
                    return self._error(404, "unknown image")
                system = parse_qs(url.query).get("system", ["model"])[0]
                if system not in ("model", "mean-quad", "full-image"):
                    return self._error(400, f"unknown system {system!r}")
                quad = predictors.predict(system, rel)
                if quad is None:
                    return self._error(404, f"no {system} predictor configured")
                self._json(
                    200,
                    {
                        "image_path": rel,
                        "system": system,
                        "corners": [[p.x, p.y] for p in quad.corners],
                    },
                )
            else:
                self._static(path)

        def _static(self, path):
            if ui_root is None:
                if path in ("/", "/index.html"):
                    return self._send(200, _PLACEHOLDER.encode(), "text/html")
                return self._error(404, "not found")
            rel = path.lstrip("/") or "index.html"
            target = (ui_root / rel).resolve()
            if not str(target).startswith(str(ui_root)) or not target.is_file():
                return self._error(404, "not found")
            ctype = {
                ".html": "text/html",
                ".js": "text/javascript",
                ".css": "text/css",
                ".map": "application/json",
            }.get(target.suffix, "application/octet-stream")
            self._send(200, target.read_bytes(), ctype)

        def do_PUT(self):
            path = urlparse(self.path).path
            if not path.startswith("/api/annotation/"):
                return self._error(404, "not found")
            rel = self._image_path("/api/annotation/", path)
            if rel is None:
                return self._error(404, "unknown image")
            length = int(self.headers.get("Content-Length", 0))
            try:
                doc = json.loads(self.rfile.read(length).decode("utf-8"))
            except (ValueError, UnicodeDecodeError) as e:
                return self._error(400, f"invalid JSON body: {e}")
            corners = doc.get("corners")
            if not isinstance(corners, list) or len(corners) != 4:
                return self._error(
                    400,
                    "corners must be a list of exactly 4 [x, y] pairs, got "
                    f"{len(corners) if isinstance(corners, list) else type(corners).__name__}",
                )
            try:
                parsed = [(float(c[0]), float(c[1])) for c in corners]
            except (TypeError, ValueError, IndexError):
                return self._error(400, "each corner must be an [x, y] number pair")
            if not all(math.isfinite(x) and math.isfinite(y) for x, y in parsed):
                return self._error(400, "corner coordinates must be finite")
            annotator = doc.get("annotator_id")
            if annotator is not None and not isinstance(annotator, str):
                return self._error(400, "annotator_id must be a string")
            base_rev = doc.get("revision")
            if base_rev is not None and not isinstance(base_rev, int):
                return self._error(400, "revision must be an integer")
            record, revision, conflict = store.put(rel, parsed, annotator, base_rev)
            headers = {}
            if conflict:
                headers["X-Annotation-Conflict"] = "last-writer-wins"
            self._json(200, _record_json(record, revision), headers)

    server = ThreadingHTTPServer((host, port), Handler)
    server.store = store  # handy for tests
    return server
