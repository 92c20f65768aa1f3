"""Wire-protocol conformance, including the 100-request replay suite."""

import random

import pytest
from fastapi.testclient import TestClient

from model_server import ServerConfig, create_app

VOCAB = ["int", "char", "buf", "strcpy", "gets", "fgets", "len", "1337",
         "(", ")", "{", "}", ";", "=", "if", "x"]


def _record_requests(n=100, seed=13):
    """A deterministic mixed workload of /predict and /predict_batch calls."""
    rng = random.Random(seed)
    recorded = []
    for _ in range(n):
        if rng.random() < 0.7:
            k = rng.randint(1, 20)
            tokens = [rng.choice(VOCAB) for _ in range(k)]
            mask = [rng.randint(0, 1) for _ in range(k)]
            recorded.append(("/predict", {"tokens": tokens, "mask": mask,
                                          "mask_token": "<mask>"}))
        else:
            rows = rng.randint(1, 5)
            k = rng.randint(1, 12)
            tokens = [[rng.choice(VOCAB) for _ in range(k)] for _ in range(rows)]
            mask = [[rng.randint(0, 1) for _ in range(k)] for _ in range(rows)]
            recorded.append(("/predict_batch", {"tokens": tokens, "mask": mask,
                                                "mask_token": "<mask>"}))
    return recorded


def _replay(client, recorded):
    out = []
    for path, payload in recorded:
        resp = client.post(path, json=payload)
        assert resp.status_code == 200, (path, resp.text)
        body = resp.json()
        assert set(body) == {"p_positive"}
        if path == "/predict":
            assert isinstance(body["p_positive"], float)
            assert 0.0 <= body["p_positive"] <= 1.0
        else:
            assert len(body["p_positive"]) == len(payload["tokens"])
            assert all(0.0 <= p <= 1.0 for p in body["p_positive"])
        out.append(body)
    return out


def test_info_shape(client, config):
    body = client.get("/info").json()
    assert body == {"name": "builtin-tiny", "max_tokens": 500,
                    "deterministic": True}


def test_replay_suite_100_requests(client):
    recorded = _record_requests()
    first = _replay(client, recorded)
    second = _replay(client, recorded)
    overflow = client.post("/predict", json={
        "tokens": ["x"] * 501, "mask": [1] * 501, "mask_token": "<mask>"})
    ok = first == second and overflow.status_code == 413
    print(f"[criterion 10] protocol conformance replay: "
          f"{'PASS' if ok else 'FAIL'}  (100 requests, deterministic repeat: "
          f"{first == second}, 413 on 501 tokens: "
          f"{overflow.status_code == 413})")
    assert ok


def test_batch_order_matches_singles(client):
    recorded = [(p, b) for p, b in _record_requests(40, seed=5)
                if p == "/predict_batch"]
    for _, payload in recorded[:5]:
        batch = client.post("/predict_batch", json=payload).json()["p_positive"]
        singles = [
            client.post("/predict", json={
                "tokens": t, "mask": m, "mask_token": payload["mask_token"]},
            ).json()["p_positive"]
            for t, m in zip(payload["tokens"], payload["mask"])
        ]
        assert batch == singles


def test_mask_semantics_parity(client):
    tokens = ["int", "x", "=", "1337", ";"]
    server_side = client.post("/predict", json={
        "tokens": tokens, "mask": [1, 1, 1, 0, 1], "mask_token": "<mask>"})
    pre_masked = client.post("/predict", json={
        "tokens": ["int", "x", "=", "<mask>", ";"], "mask": [1] * 5,
        "mask_token": "<mask>"})
    assert server_side.json() == pre_masked.json()


def test_empty_mask_differs_from_full(client):
    tokens = ["gets", "(", "buf", ")", ";"]
    full = client.post("/predict", json={
        "tokens": tokens, "mask": [1] * 5, "mask_token": "<mask>"}).json()
    empty = client.post("/predict", json={
        "tokens": tokens, "mask": [0] * 5, "mask_token": "<mask>"}).json()
    assert full != empty


@pytest.mark.parametrize("payload", [
    {"mask": [1], "mask_token": "<mask>"},                     # missing tokens
    {"tokens": ["x"], "mask": [1, 0], "mask_token": "<mask>"},  # length mismatch
    {"tokens": ["x"], "mask": [2], "mask_token": "<mask>"},     # non-binary
    {"tokens": "x", "mask": [1], "mask_token": "<mask>"},       # wrong type
    {"tokens": [], "mask": [], "mask_token": "<mask>"},         # empty input
])
def test_schema_violations_return_400(client, payload):
    assert client.post("/predict", json=payload).status_code == 400


def test_batch_length_mismatch_400(client):
    resp = client.post("/predict_batch", json={
        "tokens": [["x"], ["y"]], "mask": [[1]], "mask_token": "<mask>"})
    assert resp.status_code == 400


def test_overflow_is_413_not_400(client):
    resp = client.post("/predict", json={
        "tokens": ["x"] * 501, "mask": [1] * 501, "mask_token": "<mask>"})
    assert resp.status_code == 413


def test_unloaded_model_503(config, backend):
    from model_server import TransformerBackend
    bare = TransformerBackend(config)
    app = create_app(config, backend=bare, load=False)
    resp = TestClient(app).post("/predict", json={
        "tokens": ["x"], "mask": [1], "mask_token": "<mask>"})
    assert resp.status_code == 503


def test_seeded_weights_reproducible(config):
    from model_server import TransformerBackend
    a, b = TransformerBackend(config), TransformerBackend(config)
    a.load()
    b.load()
    req = (["strcpy", "(", "buf", ")", ";"], [1, 1, 1, 1, 1], "<mask>")
    assert a.predict_one(*req) == b.predict_one(*req)


def test_max_tokens_must_fit_context():
    from model_server import TransformerBackend
    backend = TransformerBackend(ServerConfig(max_tokens=100000))
    with pytest.raises(ValueError):
        backend.load()
