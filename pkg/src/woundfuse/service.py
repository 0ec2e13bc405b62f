"""HTTP inference service: one checkpoint served over a small JSON API.

Endpoints:
  POST /api/v1/predict   multipart `image` file, optional integer `location_code`
  GET  /api/v1/bodymap   the full body-map region list, ascending by code
  GET  /api/v1/health    model metadata (classes, uses_location, input size)

The model and registry are loaded eagerly at startup and are read-only
afterwards; success bodies are serialized with an explicit json.dumps so
identical requests produce byte-identical responses.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from fastapi import FastAPI, File, Form, HTTPException, Response, UploadFile

from .augment import ImageDecodeError, load_image, preprocess
from .bodymap import BodyMapRegistry, default_registry, encode_location, load_registry
from .model import FusionModel, load_checkpoint

logger = logging.getLogger(__name__)

ENV_CHECKPOINT = "WOUNDFUSE_CHECKPOINT"


def predict_probabilities(
    model: FusionModel,
    image,
    registry: BodyMapRegistry | None = None,
    location_code: int | None = None,
) -> dict:
    """Shared inference core: preprocess + encode + forward + softmax.

    Returns {"predicted_class", "probabilities"}; the argmax tie-break is the
    lowest class index, matching offline evaluation.
    """
    mean, std = model.normalization
    tensor = preprocess(image, size=model.cfg.input_size, mean=mean, std=std)
    images = torch.from_numpy(tensor.data[None])
    locations = None
    if location_code is not None:
        locations = torch.from_numpy(encode_location(location_code, registry)[None])
    model.eval()
    with torch.no_grad():
        logits = model(images, locations) if locations is not None else model(images)
        probabilities = F.softmax(logits, dim=1)[0].cpu().numpy()
    predicted = int(np.argmax(probabilities))
    return {
        "predicted_class": model.class_tags[predicted],
        "probabilities": {
            tag: float(probabilities[i]) for i, tag in enumerate(model.class_tags)
        },
    }


def _json_response(payload: dict, status_code: int = 200) -> Response:
    return Response(
        content=json.dumps(payload),
        status_code=status_code,
        media_type="application/json",
    )


def create_app(
    checkpoint_path: str | Path | None = None,
    registry_path: str | Path | None = None,
) -> FastAPI:
    """Build the service app; the WOUNDFUSE_CHECKPOINT env var overrides the path."""
    effective = os.environ.get(ENV_CHECKPOINT) or checkpoint_path
    if effective is None:
        raise ValueError(
            f"no checkpoint given: pass a path or set {ENV_CHECKPOINT}"
        )
    model, payload = load_checkpoint(effective)
    registry = load_registry(registry_path) if registry_path is not None else default_registry()
    model_id = payload.get("model_id") or Path(effective).stem
    logger.info(
        "serving %s: classes=%s uses_location=%s input=%d",
        model_id,
        list(model.class_tags),
        model.uses_location,
        model.cfg.input_size,
    )

    app = FastAPI(title="wound classification service")
    app.state.model = model
    app.state.registry = registry
    app.state.model_id = model_id

    @app.get("/api/v1/health")
    def health() -> Response:
        return _json_response(
            {
                "status": "ok",
                "classes": list(model.class_tags),
                "uses_location": model.uses_location,
                "input_size": model.cfg.input_size,
            }
        )

    @app.get("/api/v1/bodymap")
    def bodymap() -> Response:
        return _json_response(
            {
                "regions": [
                    {"code": r.code, "name": r.name, "side": r.side, "view": r.view}
                    for r in registry.regions
                ]
            }
        )

    @app.post("/api/v1/predict")
    def predict(
        image: UploadFile = File(...),
        location_code: str | None = Form(None),
        model_id: str | None = Form(None),
    ) -> Response:
        if model_id is not None and model_id != app.state.model_id:
            raise HTTPException(
                status_code=404, detail=f"unknown model_id {model_id!r}; serving {app.state.model_id!r}"
            )

        code: int | None = None
        if location_code is not None and location_code.strip() != "":
            try:
                code = int(location_code)
            except ValueError:
                raise HTTPException(
                    status_code=400, detail=f"location_code must be an integer, got {location_code!r}"
                ) from None

        if model.uses_location:
            if code is None:
                raise HTTPException(status_code=400, detail="this model requires a location_code")
            if code not in registry:
                raise HTTPException(status_code=400, detail=f"unknown body-map code {code}")
        elif code is not None:
            raise HTTPException(
                status_code=422, detail="this model does not accept a location_code"
            )

        raw = image.file.read()
        if not raw:
            raise HTTPException(status_code=400, detail="empty image upload")
        try:
            decoded = load_image(raw)
        except ImageDecodeError as exc:
            raise HTTPException(status_code=400, detail=f"undecodable image: {exc}") from None

        outcome = predict_probabilities(model, decoded, registry=registry, location_code=code)
        location = None
        if code is not None:
            location = {"code": code, "name": registry.region(code).name}
        return _json_response(
            {
                "predicted_class": outcome["predicted_class"],
                "probabilities": outcome["probabilities"],
                "model_id": app.state.model_id,
                "location": location,
            }
        )

    return app


def serve(
    checkpoint_path: str | Path | None = None,
    registry_path: str | Path | None = None,
    host: str = "127.0.0.1",
    port: int = 8000,
) -> None:
    """Load everything, then block serving HTTP; load failures exit nonzero."""
    try:
        app = create_app(checkpoint_path, registry_path=registry_path)
    except Exception as exc:
        print(f"service startup failed: {exc}", file=sys.stderr)
        raise SystemExit(1) from exc
    import uvicorn

    uvicorn.run(app, host=host, port=port)
