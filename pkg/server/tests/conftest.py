import pytest
from fastapi.testclient import TestClient

from model_server import ServerConfig, TransformerBackend, create_app


@pytest.fixture(scope="session")
def config():
    return ServerConfig(seed=0, max_tokens=500)


@pytest.fixture(scope="session")
def backend(config):
    b = TransformerBackend(config)
    b.load()
    return b


@pytest.fixture(scope="session")
def client(config, backend):
    return TestClient(create_app(config, backend=backend))
