"""HTTP inference service for the interactive editing loop."""

from __future__ import annotations

import base64
import json
import logging
import threading
import time

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .core import ImageFormatError, image_to_png_bytes, resize_image
from .pipeline import SynthesisBundle
from .text import EmptyCaptionError, OutOfVocabularyError

log = logging.getLogger("textpose.service")


class SynthesizeOptions(BaseModel):
    return_pose: bool = True


class SynthesizeRequest(BaseModel):
    image: str = Field(description="base64-encoded PNG of the reference person")
    caption: str = Field(description="natural language description to apply")
    options: SynthesizeOptions = SynthesizeOptions()


class SynthesizeResponse(BaseModel):
    image: str
    pose: list[list[float]] | None = None
    orientation: int
    latency_ms: float


def _error(status: int, field: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": {"field": field, "message": message}})


def create_app(bundle: SynthesisBundle | None, max_concurrency: int = 4) -> FastAPI:
    """Build the service around a frozen model bundle (None = still loading)."""
    app = FastAPI(title="textpose edit service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.bundle = bundle
    gate = threading.BoundedSemaphore(max_concurrency)

    def _log_request(method: str, path: str, status: int, started: float):
        log.info(
            json.dumps(
                {
                    "method": method,
                    "path": path,
                    "status": status,
                    "latency_ms": round((time.perf_counter() - started) * 1000.0, 3),
                }
            )
        )

    @app.post("/v1/synthesize")
    def synthesize_endpoint(req: SynthesizeRequest, request: Request):
        started = time.perf_counter()
        b: SynthesisBundle | None = app.state.bundle
        if b is None:
            _log_request("POST", "/v1/synthesize", 503, started)
            return _error(503, "service", "checkpoints not loaded")
        if not req.caption.strip():
            _log_request("POST", "/v1/synthesize", 400, started)
            return _error(400, "caption", "caption must not be empty")
        try:
            raw = base64.b64decode(req.image, validate=True)
            image = resize_image(raw, b.config.height, b.config.width)
        except (ImageFormatError, ValueError) as exc:
            _log_request("POST", "/v1/synthesize", 400, started)
            return _error(400, "image", f"cannot decode image: {exc}")
        if not gate.acquire(blocking=False):
            _log_request("POST", "/v1/synthesize", 429, started)
            return _error(429, "service", "too many concurrent requests")
        try:
            pose, fake, orientation = b.synthesize(image, req.caption)
        except (OutOfVocabularyError, EmptyCaptionError) as exc:
            _log_request("POST", "/v1/synthesize", 422, started)
            return _error(422, "caption", str(exc))
        finally:
            gate.release()
        payload = SynthesizeResponse(
            image=base64.b64encode(image_to_png_bytes(fake)).decode("ascii"),
            pose=pose.to_list() if req.options.return_pose else None,
            orientation=orientation,
            latency_ms=round((time.perf_counter() - started) * 1000.0, 3),
        )
        _log_request("POST", "/v1/synthesize", 200, started)
        return payload

    @app.get("/v1/basic-poses")
    def basic_poses_endpoint():
        started = time.perf_counter()
        b: SynthesisBundle | None = app.state.bundle
        if b is None:
            _log_request("GET", "/v1/basic-poses", 503, started)
            return _error(503, "service", "checkpoints not loaded")
        _log_request("GET", "/v1/basic-poses", 200, started)
        return JSONResponse(content=json.loads(b.basics.to_json()))

    @app.get("/v1/health")
    def health_endpoint():
        started = time.perf_counter()
        b: SynthesisBundle | None = app.state.bundle
        if b is None:
            _log_request("GET", "/v1/health", 503, started)
            return JSONResponse(status_code=503, content={"status": "loading"})
        _log_request("GET", "/v1/health", 200, started)
        return {"status": "ok", "model_version": b.model_version}

    return app
