"""HTTP service contract tests over the in-process ASGI app."""

import io
import json
import threading

import numpy as np
import pytest
from fastapi.testclient import TestClient

from pdadsv.dataset_io import parse_dataset_csv
from pdadsv.eval_harness import save_model, train_final
from pdadsv.gbdt_core import BaggingParams, TreeParams
from pdadsv.service_api import create_app
from pdadsv.signal_features import encode_wav

from .synth import make_corpus_csv, vowel_clip


@pytest.fixture(scope="module")
def model_path(tmp_path_factory):
    ds = parse_dataset_csv(io.StringIO(make_corpus_csv(n_subjects=16, seed=0)))
    bundle = train_final(ds, seed=0, tree_params=TreeParams(n_rounds=15),
                         bagging_params=BaggingParams(n_trees=15))
    path = tmp_path_factory.mktemp("model") / "ensemble.pdadsv.json"
    save_model(bundle, str(path))
    return str(path)


@pytest.fixture(scope="module")
def client(model_path):
    return TestClient(create_app(model_path=model_path))


@pytest.fixture(scope="module")
def wav_bytes():
    clip = vowel_clip(duration_s=5.2, sr=8000)
    return encode_wav(clip.samples, clip.sample_rate_hz)


def features_body(n=32, value=0.1):
    return {"features": [value] * n}


# --------------------------------------------------------------------------
# health and metadata
# --------------------------------------------------------------------------

def test_healthz_with_model(client):
    r = client.get("/healthz")
    assert r.status_code == 200
    assert r.json() == {"status": "ok", "ready": True}
    assert client.get("/healthz").json() == r.json()


def test_healthz_without_model():
    bare = TestClient(create_app())
    r = bare.get("/healthz")
    assert r.status_code == 200
    assert r.json()["ready"] is False


def test_model_info(client, model_path):
    r = client.get("/api/v1/model")
    assert r.status_code == 200
    body = r.json()
    assert body["classifiers"] == ["classic_gb", "second_order",
                                   "histogram_goss_efb", "bagging"]
    assert len(body["feature_names"]) == 32
    assert sum(body["weights"]) == pytest.approx(1.0, abs=1e-12)
    # weights pass through the bundle bit-exactly
    saved = json.load(open(model_path))
    assert body["weights"] == saved["weights"]


def test_model_info_without_model():
    bare = TestClient(create_app())
    r = bare.get("/api/v1/model")
    assert r.status_code == 503
    assert r.json()["error"]["code"] == "model_not_loaded"


# --------------------------------------------------------------------------
# feature endpoint
# --------------------------------------------------------------------------

def test_predict_contract_shape(client):
    r = client.post("/api/v1/predict", json=features_body())
    assert r.status_code == 200
    body = r.json()
    assert body["final_label"] in (0, 1)
    assert body["final_text"] in ("PD signs detected", "No PD signs detected")
    assert [v["classifier"] for v in body["votes"]] == [
        "classic_gb", "second_order", "histogram_goss_efb", "bagging"]
    for vote in body["votes"]:
        assert vote["vote"] in (0, 1)
        assert 0.0 <= vote["probability"] <= 1.0
    tally = body["weighted_tally"]
    assert tally["positive"] + tally["negative"] == pytest.approx(1.0)
    assert body["latency_ms"] >= 0.0


def test_predict_wrong_length(client):
    r = client.post("/api/v1/predict", json=features_body(31))
    assert r.status_code == 422
    assert "expected 32 features" in r.json()["error"]["message"]


def test_predict_non_finite(client):
    body = features_body()
    body["features"][5] = float("nan")
    r = client.post("/api/v1/predict",
                    content=json.dumps(body).replace("NaN", "1e999"),
                    headers={"content-type": "application/json"})
    assert r.status_code == 422
    assert r.json()["error"]["code"] in ("non_finite_feature", "non_numeric_feature")


def test_predict_malformed_json(client):
    r = client.post("/api/v1/predict", content=b"{not json",
                    headers={"content-type": "application/json"})
    assert r.status_code == 400
    assert r.json()["error"]["code"] == "malformed_body"


def test_predict_no_model():
    bare = TestClient(create_app())
    r = bare.post("/api/v1/predict", json=features_body())
    assert r.status_code == 503


def test_predict_replay_identical(client):
    a = client.post("/api/v1/predict", json=features_body(value=0.3)).json()
    b = client.post("/api/v1/predict", json=features_body(value=0.3)).json()
    a.pop("latency_ms"), b.pop("latency_ms")
    assert a == b


def test_predict_concurrent_identical(client):
    results = [None] * 64
    body = features_body(value=-0.2)

    def call(i):
        r = client.post("/api/v1/predict", json=body).json()
        r.pop("latency_ms")
        results[i] = json.dumps(r, sort_keys=True)

    threads = [threading.Thread(target=call, args=(i,)) for i in range(64)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(set(results)) == 1


# --------------------------------------------------------------------------
# audio endpoint
# --------------------------------------------------------------------------

def test_predict_audio_ok(client, wav_bytes):
    r = client.post("/api/v1/predict-audio",
                    files={"audio": ("voice.wav", wav_bytes, "audio/wav")})
    assert r.status_code == 200
    assert r.json()["final_label"] in (0, 1)


def test_predict_audio_too_short(client):
    clip = vowel_clip(duration_s=3.0, sr=8000)
    data = encode_wav(clip.samples, clip.sample_rate_hz)
    r = client.post("/api/v1/predict-audio",
                    files={"audio": ("short.wav", data, "audio/wav")})
    assert r.status_code == 422
    assert r.json()["error"]["code"] == "clip_too_short"


def test_predict_audio_silent(client):
    data = encode_wav(np.zeros(8000 * 6), 8000)
    r = client.post("/api/v1/predict-audio",
                    files={"audio": ("silent.wav", data, "audio/wav")})
    assert r.status_code == 422
    assert r.json()["error"]["code"] == "silent_signal"


def test_predict_audio_corrupt(client):
    r = client.post("/api/v1/predict-audio",
                    files={"audio": ("bad.wav", b"definitely not a wav", "audio/wav")})
    assert r.status_code == 422
    assert r.json()["error"]["code"] == "malformed_container"


def test_predict_audio_missing_field(client):
    r = client.post("/api/v1/predict-audio",
                    files={"sound": ("x.wav", b"123", "audio/wav")})
    assert r.status_code == 400


def test_predict_audio_payload_cap(model_path, wav_bytes):
    tiny = TestClient(create_app(model_path=model_path, max_upload_mb=0))
    r = tiny.post("/api/v1/predict-audio",
                  files={"audio": ("voice.wav", wav_bytes, "audio/wav")})
    assert r.status_code == 413


def test_predict_audio_replay_identical(client, wav_bytes):
    a = client.post("/api/v1/predict-audio",
                    files={"audio": ("v.wav", wav_bytes, "audio/wav")}).json()
    b = client.post("/api/v1/predict-audio",
                    files={"audio": ("v.wav", wav_bytes, "audio/wav")}).json()
    a.pop("latency_ms"), b.pop("latency_ms")
    assert a == b


# --------------------------------------------------------------------------
# reload
# --------------------------------------------------------------------------

def test_reload_swaps_model(model_path):
    app = create_app(model_path=model_path)
    client = TestClient(app)
    before = client.get("/api/v1/model").json()["model_version"]
    r = client.post("/api/v1/admin/reload")
    assert r.status_code == 200
    assert r.json()["reloaded"] is True
    assert client.get("/api/v1/model").json()["model_version"] == before


def test_reload_missing_path():
    client = TestClient(create_app())
    r = client.post("/api/v1/admin/reload")
    assert r.status_code == 422
