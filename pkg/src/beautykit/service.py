"""HTTP inference service consumed by the studio UI.

Endpoints:
  GET  /healthz     liveness + model digests
  GET  /references  gallery of reference faces with cached beauty scores
  POST /beautify    multipart beautification request -> ordered frames
  GET  /score       beauty score of a gallery reference (or local file)

All responses are JSON; frames travel as base64 PNG (lossless: scores are
sensitive to compression). Error responses carry a machine-readable code and
the violated precondition. The service holds no per-request state beyond the
read-only model and the gallery cache.
"""

from __future__ import annotations

import base64
import hashlib
import io
import json
import logging
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from fastapi import FastAPI, File, Form, Request, UploadFile
from fastapi.responses import JSONResponse
from PIL import Image

from .data.loader import denormalize_image, normalize_image
from .errors import BeautykitError, ValidationError
from .inference import BeautifyEngine, BeautifyRequest, weight_schedule
from .perception import clamp_score

log = logging.getLogger(__name__)

GALLERY_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".webp")
THUMBNAIL_SIZE = 64


@dataclass
class ServiceConfig:
    checkpoint: str
    backbone_checkpoint: str | None = None
    gallery_dir: str | None = None
    host: str = "127.0.0.1"
    port: int = 8000
    max_concurrent_requests: int = 4
    max_image_bytes: int = 8 * 2 ** 20

    def __post_init__(self):
        # Environment overrides for deploy-time wiring.
        self.checkpoint = os.environ.get("BEAUTYKIT_CHECKPOINT", self.checkpoint)
        self.backbone_checkpoint = os.environ.get(
            "BEAUTYKIT_BACKBONE", self.backbone_checkpoint)
        self.gallery_dir = os.environ.get("BEAUTYKIT_GALLERY", self.gallery_dir)
        bind = os.environ.get("BEAUTYKIT_BIND")
        if bind:
            host, _, port = bind.rpartition(":")
            self.host = host or self.host
            self.port = int(port)
        if self.max_concurrent_requests < 1 or self.max_image_bytes < 1:
            raise ValidationError("service limits must be positive")
        if not Path(self.checkpoint).is_file():
            raise ValidationError(f"checkpoint not found: {self.checkpoint}")
        if self.backbone_checkpoint and not Path(self.backbone_checkpoint).is_file():
            raise ValidationError(
                f"backbone checkpoint not found: {self.backbone_checkpoint}")
        if self.gallery_dir and not Path(self.gallery_dir).is_dir():
            raise ValidationError(f"gallery directory not found: {self.gallery_dir}")


@dataclass
class GalleryEntry:
    reference_id: str
    path: Path
    thumbnail_b64: str
    score: float | None
    display_score: float | None


def _file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _error(status: int, code: str, message: str, constraint: str | None = None):
    body = {"error": {"code": code, "message": message}}
    if constraint:
        body["error"]["constraint"] = constraint
    return JSONResponse(status_code=status, content=body)


def _decode_upload(data: bytes, image_size: tuple[int, int]) -> torch.Tensor:
    try:
        with Image.open(io.BytesIO(data)) as img:
            img = img.convert("RGB")
            h, w = image_size
            if img.size != (w, h):
                img = img.resize((w, h), Image.BILINEAR)
            return normalize_image(np.asarray(img))
    except Exception as exc:
        raise ValidationError(f"cannot decode uploaded image ({exc})") from exc


def _encode_png_b64(image: torch.Tensor) -> str:
    buf = io.BytesIO()
    Image.fromarray(denormalize_image(image)).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def build_gallery(engine: BeautifyEngine, gallery_dir: str | None) -> list[GalleryEntry]:
    """Scan the reference directory once; ids are content digests."""
    if not gallery_dir:
        return []
    paths = sorted(p for p in Path(gallery_dir).iterdir()
                   if p.suffix.lower() in GALLERY_EXTENSIONS)
    if not paths:
        log.warning("gallery directory %s holds no images", gallery_dir)
    entries = []
    can_score = engine.backbone is not None and engine.backbone.finetuned
    for path in paths:
        ref_id = _file_digest(path)[:16]
        with Image.open(path) as img:
            thumb = img.convert("RGB").resize((THUMBNAIL_SIZE, THUMBNAIL_SIZE),
                                              Image.BILINEAR)
        buf = io.BytesIO()
        thumb.save(buf, format="PNG")
        score = None
        if can_score:
            tensor = _decode_upload(path.read_bytes(), engine.image_size)
            score = engine.score(tensor)
        entries.append(GalleryEntry(
            reference_id=ref_id,
            path=path,
            thumbnail_b64=base64.b64encode(buf.getvalue()).decode("ascii"),
            score=score,
            display_score=clamp_score(score) if score is not None else None,
        ))
    return entries


def create_app(config: ServiceConfig) -> FastAPI:
    """Build the service; model loading failures abort startup loudly."""
    try:
        engine = BeautifyEngine.from_checkpoint(config.checkpoint,
                                                config.backbone_checkpoint)
    except Exception as exc:
        raise ValidationError(
            f"refusing to start: cannot load checkpoint {config.checkpoint} ({exc})"
        ) from exc
    if engine.image_size is None:
        raise ValidationError("checkpoint carries no image size")

    digests = {"checkpoint": _file_digest(config.checkpoint)}
    if config.backbone_checkpoint:
        digests["backbone"] = _file_digest(config.backbone_checkpoint)

    gallery = build_gallery(engine, config.gallery_dir)
    by_id = {e.reference_id: e for e in gallery}
    gate = threading.Semaphore(config.max_concurrent_requests)

    app = FastAPI(title="beautykit service")
    app.state.engine = engine
    app.state.config = config

    @app.exception_handler(BeautykitError)
    async def _handle_domain_error(request: Request, exc: BeautykitError):
        return _error(422, "invalid_request", str(exc))

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "digests": digests,
                "image_size": list(engine.image_size),
                "gallery_size": len(gallery)}

    @app.get("/references")
    def references():
        return {"references": [
            {"id": e.reference_id, "thumbnail": e.thumbnail_b64,
             "score": e.score, "display_score": e.display_score}
            for e in gallery
        ]}

    @app.get("/score")
    def score(image: str):
        entry = by_id.get(image)
        if entry is not None:
            tensor = _decode_upload(entry.path.read_bytes(), engine.image_size)
        elif Path(image).is_file():
            tensor = _decode_upload(Path(image).read_bytes(), engine.image_size)
        else:
            return _error(404, "unknown_reference",
                          f"no gallery reference or file named {image!r}")
        raw = engine.score(tensor)
        return {"score": raw, "display_score": clamp_score(raw)}

    @app.post("/beautify")
    def beautify(
        target: UploadFile = File(...),
        reference: UploadFile | None = File(None),
        reference_id: str | None = Form(None),
        steps: int | None = Form(None),
        weights: str | None = Form(None),
        want_scores: bool = Form(False),
    ):
        target_bytes = target.file.read(config.max_image_bytes + 1)
        if len(target_bytes) > config.max_image_bytes:
            return _error(413, "payload_too_large",
                          f"target image exceeds {config.max_image_bytes} bytes",
                          constraint=f"image bytes <= {config.max_image_bytes}")

        if reference is not None:
            ref_bytes = reference.file.read(config.max_image_bytes + 1)
            if len(ref_bytes) > config.max_image_bytes:
                return _error(413, "payload_too_large",
                              f"reference image exceeds {config.max_image_bytes} bytes",
                              constraint=f"image bytes <= {config.max_image_bytes}")
            reference_tensor = _decode_upload(ref_bytes, engine.image_size)
        elif reference_id is not None:
            entry = by_id.get(reference_id)
            if entry is None:
                return _error(404, "unknown_reference",
                              f"reference id {reference_id!r} is not in the gallery")
            reference_tensor = _decode_upload(entry.path.read_bytes(), engine.image_size)
        else:
            return _error(422, "missing_reference",
                          "provide either a reference image or a reference_id")

        # Decode before parsing weights so a bad image never reports as a
        # weight problem (the app-level handler turns it into invalid_request).
        target_tensor = _decode_upload(target_bytes, engine.image_size)

        try:
            if weights is not None:
                w2_values = tuple(float(v) for v in json.loads(weights))
            elif steps is not None:
                w2_values = tuple(weight_schedule(steps))
            else:
                w2_values = (1.0,)
            request_obj = BeautifyRequest(
                target=target_tensor,
                reference=reference_tensor,
                w2_values=w2_values,
                score_outputs=want_scores,
            )
        except (ValidationError, ValueError, json.JSONDecodeError) as exc:
            return _error(
                422, "invalid_weights", str(exc),
                constraint="weights are a strictly increasing list of w2 in [0, 1] "
                           "with w1 = 1 - w2; w1 + w2 = 1")

        with gate:
            sequence = engine.beautify(request_obj)
        return {
            "frames": [
                {"w2": f.w2, "image": _encode_png_b64(f.image),
                 "score": f.score,
                 "display_score": clamp_score(f.score) if f.score is not None else None}
                for f in sequence
            ],
            "weights": [f.w2 for f in sequence],
        }

    return app


def serve(config: ServiceConfig) -> None:
    """Run the service under uvicorn (blocking)."""
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port)
