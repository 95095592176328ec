"""HTTP inference service around a loaded ensemble bundle.

The model is immutable after load; every request reads one shared bundle, so
replies are a pure function of (bundle, request body) apart from latency_ms.
Reload swaps the bundle reference atomically and in-flight requests finish on
the reference they grabbed. Uploaded audio is processed in memory only and
never written anywhere.
"""

from __future__ import annotations

import json
import os
import time
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request, UploadFile
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .ensemble_voting import CLASSIFIER_NAMES
from .errors import PdadsvError
from .eval_harness import EnsembleModel, load_model
from .signal_features import DspConfig, decode_wav, extract_features

DEFAULT_BIND = "127.0.0.1:8080"
DEFAULT_MAX_UPLOAD_MB = 50
POSITIVE_TEXT = "PD signs detected"
NEGATIVE_TEXT = "No PD signs detected"

MODEL_ENV = "PDADSV_MODEL"
BIND_ENV = "PDADSV_BIND"
UI_ENV = "PDADSV_UI"


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"error": {"code": code, "message": message}})


def _model_version(bundle: EnsembleModel) -> str:
    fingerprint = bundle.metadata.get("dataset_fingerprint", "")[:12]
    return f"v{bundle.format_version}-{fingerprint or 'unknown'}"


def create_app(model_path: str | None = None,
               max_upload_mb: int = DEFAULT_MAX_UPLOAD_MB,
               ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="pdadsv", docs_url=None, redoc_url=None)
    app.state.model = None
    app.state.model_path = model_path
    app.state.max_upload_bytes = max_upload_mb * 1024 * 1024
    app.state.dsp_config = DspConfig()
    if model_path:
        app.state.model = load_model(model_path)

    from fastapi.exceptions import RequestValidationError

    @app.exception_handler(RequestValidationError)
    async def malformed_body_handler(request, exc):
        return _error(400, "malformed_body",
                      "request body does not match the endpoint contract")

    def current_model() -> EnsembleModel | None:
        return app.state.model

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok", "ready": current_model() is not None}

    @app.get("/api/v1/model")
    async def model_info():
        bundle = current_model()
        if bundle is None:
            return _error(503, "model_not_loaded", "no model bundle is loaded")
        return {
            "model_version": _model_version(bundle),
            "feature_names": list(bundle.feature_names),
            "classifiers": list(CLASSIFIER_NAMES),
            "weights": [float(w) for w in bundle.weights.values],
            "metadata": bundle.metadata,
        }

    def run_prediction(bundle: EnsembleModel, features: np.ndarray,
                       started: float) -> dict:
        pred = bundle.predict(features)
        return {
            "final_label": pred.final_label,
            "final_text": POSITIVE_TEXT if pred.final_label else NEGATIVE_TEXT,
            "votes": [
                {"classifier": name, "vote": vote,
                 "weight": float(bundle.weights.values[i]),
                 "probability": pred.probabilities[i]}
                for i, (name, vote) in enumerate(zip(CLASSIFIER_NAMES, pred.votes))
            ],
            "weights": [float(w) for w in bundle.weights.values],
            "weighted_tally": {"positive": pred.weighted_tally_positive,
                               "negative": pred.weighted_tally_negative},
            "latency_ms": (time.perf_counter() - started) * 1000.0,
            "model_version": _model_version(bundle),
        }

    @app.post("/api/v1/predict")
    async def predict(request: Request):
        started = time.perf_counter()
        bundle = current_model()
        if bundle is None:
            return _error(503, "model_not_loaded", "no model bundle is loaded")
        raw = await request.body()
        if len(raw) > app.state.max_upload_bytes:
            return _error(413, "payload_too_large",
                          f"body exceeds {max_upload_mb} MB")
        try:
            body = json.loads(raw)
        except (json.JSONDecodeError, UnicodeDecodeError):
            return _error(400, "malformed_body", "request body is not valid JSON")
        features = body.get("features") if isinstance(body, dict) else None
        if not isinstance(features, list) or len(features) != 32:
            got = len(features) if isinstance(features, list) else "none"
            return _error(422, "bad_feature_count",
                          f"expected 32 features, got {got}")
        try:
            vector = np.array([float(v) for v in features])
        except (TypeError, ValueError):
            return _error(422, "non_numeric_feature",
                          "every feature must be a number")
        if not np.all(np.isfinite(vector)):
            return _error(422, "non_finite_feature",
                          "features must all be finite")
        return run_prediction(bundle, vector, started)

    @app.post("/api/v1/predict-audio")
    async def predict_audio(request: Request, audio: UploadFile | None = None):
        started = time.perf_counter()
        bundle = current_model()
        if bundle is None:
            return _error(503, "model_not_loaded", "no model bundle is loaded")
        if audio is None:
            return _error(400, "malformed_body",
                          "multipart field 'audio' is required")
        data = await audio.read()
        if len(data) > app.state.max_upload_bytes:
            return _error(413, "payload_too_large",
                          f"audio exceeds {max_upload_mb} MB")
        try:
            clip = decode_wav(data)
            vector = extract_features(clip, app.state.dsp_config).to_array()
        except PdadsvError as exc:
            return _error(422, exc.code, str(exc))
        return run_prediction(bundle, vector, started)

    @app.post("/api/v1/admin/reload")
    async def reload_model(request: Request):
        raw = await request.body()
        path = app.state.model_path
        if raw:
            try:
                body = json.loads(raw)
                path = body.get("path", path)
            except json.JSONDecodeError:
                return _error(400, "malformed_body", "body must be JSON")
        if not path:
            return _error(422, "no_model_path", "no bundle path configured")
        try:
            fresh = load_model(path)
        except (OSError, PdadsvError) as exc:
            return _error(422, "reload_failed", str(exc))
        app.state.model = fresh  # atomic swap; in-flight requests keep the old one
        app.state.model_path = path
        return {"reloaded": True, "model_version": _model_version(fresh)}

    ui = ui_dir or os.environ.get(UI_ENV)
    if ui and Path(ui).is_dir():
        app.mount("/", StaticFiles(directory=ui, html=True), name="ui")
    return app


def install_sighup_reload(app: FastAPI) -> None:
    """SIGHUP re-reads the configured bundle path (POSIX only)."""
    import signal

    def handler(signum, frame):
        if app.state.model_path:
            app.state.model = load_model(app.state.model_path)

    signal.signal(signal.SIGHUP, handler)


def serve(model_path: str | None, bind: str = DEFAULT_BIND,
          max_upload_mb: int = DEFAULT_MAX_UPLOAD_MB,
          ui_dir: str | None = None) -> None:
    import uvicorn

    host, _, port = bind.rpartition(":")
    app = create_app(model_path=model_path, max_upload_mb=max_upload_mb,
                     ui_dir=ui_dir)
    install_sighup_reload(app)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="info")
