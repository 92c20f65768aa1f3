"""Integration smoke: the attribution pipeline against a live server socket."""

import math
import socket
import threading
import time

import pytest
import uvicorn

from model_server import create_app


@pytest.fixture(scope="module")
def live_server(config, backend):
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    server = uvicorn.Server(uvicorn.Config(
        create_app(config, backend=backend), host="127.0.0.1", port=port,
        log_level="error"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 30
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("server did not start")
        time.sleep(0.05)
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=10)


SHORT_BODIES = [
    "int f0 ( ) { }",
    "int f1 ( ) { return 0 ; }",
    "char g2 ( ) { gets ( buf ) ; }",
    "int f3 ( ) { x = 1337 ; }",
    "void h4 ( ) { strcpy ( buf , src ) ; }",
]


def _short_corpus(tmp_path):
    from nspc.lexing import ClassLabel, Language, SourceSnippet
    from nspc.synth import write_corpus

    snippets = []
    for i, text in enumerate(SHORT_BODIES):
        for label in (ClassLabel.SECURE, ClassLabel.INSECURE):
            snippets.append(SourceSnippet(
                id=f"{label.value}-{i:03d}", language=Language.C,
                text=text, label=label))
    d = tmp_path / "corpus"
    write_corpus(snippets, d)
    return d


def test_remote_info(live_server):
    from nspc.predictor import RemotePredictor

    info = RemotePredictor(live_server).info()
    assert info["max_tokens"] == 500
    assert info["deterministic"] is True


def test_criterion_11_integration_smoke(live_server, tmp_path):
    from nspc.pipeline import ExperimentConfig, attribute_corpus, make_predictor
    from nspc.synth import load_corpus

    corpus = _short_corpus(tmp_path)
    cfg = ExperimentConfig(corpus_dir=str(corpus), seed=3,
                           predictor=live_server)
    snippets = load_corpus(corpus)
    assert len(snippets) == 10
    _, shap_vectors, (secure_t, insecure_t) = attribute_corpus(
        cfg, snippets, make_predictor(cfg))
    worst = max(
        abs(math.fsum(v.phis) - (v.f_full - v.f_empty))
        for v in shap_vectors.values()
    )
    rows = len(secure_t.rows) + len(insecure_t.rows)
    ok = len(shap_vectors) == 10 and rows > 0 and worst <= 1e-6
    print(f"[criterion 11] integration smoke: {'PASS' if ok else 'FAIL'}  "
          f"(10 snippets attributed, {rows} tensor rows, "
          f"max efficiency residual {worst:.2e})")
    assert ok


def test_remote_matches_local_backend(live_server, backend):
    from nspc.predictor import RemotePredictor, full_mask

    tokens = ["int", "x", "=", "1337", ";"]
    remote = RemotePredictor(live_server).predict(tokens, full_mask(5))
    local = backend.predict_one(tokens, [1] * 5, "<mask>")
    assert remote == local
