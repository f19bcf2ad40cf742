"""Local HTTP service backing the annotation UI.

Serves the RGB frames of one demonstration, accepts the finished annotation
(validated with the same rules as :func:`pcdgen.annotations.parse_annotation`)
and stores mask images uploaded by the client. The object count is not known
at annotation time, so ``/meta`` reports a placeholder of 0 and id ranges are
checked against the mask list of the posted annotation itself.
"""

from __future__ import annotations

import re
import threading
import warnings
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from .annotations import annotation_from_dict, serialize_annotation
from .errors import InterleaveError, RangeError, SchemaError

_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")
_MEDIA_TYPES = {".png": "image/png", ".jpg": "image/jpeg", ".jpeg": "image/jpeg"}
_SAFE_NAME = re.compile(r"[A-Za-z0-9][A-Za-z0-9._-]*")


def list_frames(frame_dir: Path) -> list[Path]:
    return sorted(p for p in Path(frame_dir).iterdir()
                  if p.suffix.lower() in _IMAGE_SUFFIXES)


def build_app(frame_dir: Path, out_path: Path,
              frontend_dir: Path | None = None) -> FastAPI:
    frame_dir = Path(frame_dir)
    out_path = Path(out_path)
    frames = list_frames(frame_dir)
    horizon = len(frames)
    write_lock = threading.Lock()
    app = FastAPI(title="annotation service")

    @app.get("/frames")
    def get_frames():
        return {"count": horizon, "files": [p.name for p in frames]}

    @app.get("/frames/{index}")
    def get_frame(index: int):
        if not 1 <= index <= horizon:
            return JSONResponse(status_code=404, content={
                "ok": False, "error": "NotFound",
                "detail": f"frame {index} out of range [1, {horizon}]"})
        p = frames[index - 1]
        return FileResponse(p, media_type=_MEDIA_TYPES[p.suffix.lower()])

    @app.get("/meta")
    def get_meta():
        # object count is unknown until masks are drawn; 0 is the placeholder
        return {"objects": 0, "horizon": horizon}

    @app.post("/annotation")
    async def post_annotation(request: Request):
        try:
            doc = await request.json()
        except Exception:
            return _error(SchemaError("body is not valid JSON"))
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                ann = annotation_from_dict(doc, horizon)
                ann.check_ids(max(len(ann.mask_files) - 1, 0))
        except (SchemaError, InterleaveError, RangeError) as e:
            return _error(e)
        text = serialize_annotation(ann)
        with write_lock:
            out_path.parent.mkdir(parents=True, exist_ok=True)
            out_path.write_text(text)
        return {"ok": True, "path": str(out_path),
                "segments": len(ann.segments), "horizon": ann.horizon,
                "warnings": [str(w.message) for w in caught]}

    @app.post("/masks/{name}")
    async def post_mask(name: str, request: Request):
        if not _SAFE_NAME.fullmatch(name) or ".." in name or "/" in name:
            return _error(SchemaError(f"unsafe mask name {name!r}"))
        if not name.lower().endswith(".png"):
            return _error(SchemaError("mask must be a .png file"))
        data = await request.body()
        if not data:
            return _error(SchemaError("empty mask body"))
        dest = out_path.parent / "masks" / name
        with write_lock:
            dest.parent.mkdir(parents=True, exist_ok=True)
            dest.write_bytes(data)
        return {"ok": True, "path": str(dest), "bytes": len(data)}

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="ui")
    return app


def _error(e: Exception) -> JSONResponse:
    return JSONResponse(status_code=400, content={
        "ok": False, "error": type(e).__name__, "detail": str(e)})


def serve_annotation_api(frame_dir: Path, out_path: Path, port: int,
                         frontend_dir: Path | None = None,
                         host: str = "127.0.0.1") -> None:
    """Run the service until interrupted."""
    import uvicorn

    app = build_app(frame_dir, out_path, frontend_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
