"""FastAPI application implementing the predictor wire protocol.

Endpoints:
    POST /predict        {"tokens": [...], "mask": [...], "mask_token": str}
                         -> {"p_positive": float}
    POST /predict_batch  parallel arrays of the above -> {"p_positive": [...]}
    GET  /info           {"name", "max_tokens", "deterministic"}

Statuses: 400 schema violation, 413 token overflow, 503 model not loaded.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .backend import TransformerBackend
from .config import ServerConfig

DEFAULT_MASK_TOKEN = "<mask>"


class PredictRequest(BaseModel):
    tokens: list[str] = Field(min_length=1)
    mask: list[int]
    mask_token: str = DEFAULT_MASK_TOKEN


class BatchRequest(BaseModel):
    tokens: list[list[str]] = Field(min_length=1)
    mask: list[list[int]]
    mask_token: str = DEFAULT_MASK_TOKEN


class _HttpError(Exception):
    def __init__(self, status: int, detail: str):
        self.status = status
        self.detail = detail


def _validate(tokens: list[str], mask: list[int], max_tokens: int) -> None:
    if len(mask) != len(tokens):
        raise _HttpError(400, "mask length must equal token length")
    if any(m not in (0, 1) for m in mask):
        raise _HttpError(400, "mask entries must be 0 or 1")
    if len(tokens) > max_tokens:
        raise _HttpError(413, f"{len(tokens)} tokens exceeds the "
                              f"{max_tokens}-token cap")


def create_app(config: ServerConfig,
               backend: TransformerBackend | None = None,
               load: bool = True) -> FastAPI:
    """Build the app; ``load=False`` defers model loading (503 until then)."""
    if backend is None:
        backend = TransformerBackend(config)
    if load and not backend.loaded:
        backend.load()

    app = FastAPI(title="nspc model server")
    app.state.backend = backend
    app.state.config = config

    @app.exception_handler(RequestValidationError)
    async def schema_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"detail": "schema violation"})

    @app.exception_handler(_HttpError)
    async def http_error(request: Request, exc: _HttpError):
        return JSONResponse(status_code=exc.status,
                            content={"detail": exc.detail})

    def _ready() -> None:
        if not backend.loaded:
            raise _HttpError(503, "model not loaded")

    @app.get("/info")
    def info():
        return {
            "name": backend.name,
            "max_tokens": config.max_tokens,
            "deterministic": config.deterministic,
        }

    @app.post("/predict")
    def predict(req: PredictRequest):
        _ready()
        _validate(req.tokens, req.mask, config.max_tokens)
        p = backend.predict_one(req.tokens, req.mask, req.mask_token)
        return {"p_positive": p}

    @app.post("/predict_batch")
    def predict_batch(req: BatchRequest):
        _ready()
        if len(req.mask) != len(req.tokens):
            raise _HttpError(400, "batch mask/tokens length mismatch")
        for tokens, mask in zip(req.tokens, req.mask):
            _validate(tokens, mask, config.max_tokens)
        items = [(tokens, mask, req.mask_token)
                 for tokens, mask in zip(req.tokens, req.mask)]
        return {"p_positive": backend.predict_batch(items)}

    return app
