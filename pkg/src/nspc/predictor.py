"""Black-box classifier abstraction over (possibly masked) token sequences.

A mask pattern is a 0/1 vector the length of the token list; masked positions
are replaced by a sentinel lexeme before scoring.  Two deterministic built-in
predictors support testing, and a remote client speaks the predictor wire
protocol served by the model server.
"""

from __future__ import annotations

import hashlib
import math
import threading
from dataclasses import dataclass, field

import numpy as np
import requests

from .errors import EmptyCorpus, PredictorUnavailable, ProtocolError

DEFAULT_MASK_TOKEN = "<mask>"

MaskPattern = tuple[int, ...]


def full_mask(n: int) -> MaskPattern:
    return (1,) * n


def empty_mask(n: int) -> MaskPattern:
    return (0,) * n


def apply_mask(tokens: list[str], mask, mask_token: str = DEFAULT_MASK_TOKEN) -> list[str]:
    if len(tokens) != len(mask):
        raise ValueError(f"mask length {len(mask)} != token count {len(tokens)}")
    return [t if m else mask_token for t, m in zip(tokens, mask)]


def confidence(p_positive: float) -> float:
    """Guard-layer confidence: max(p, 1-p)."""
    return max(p_positive, 1.0 - p_positive)


@dataclass(frozen=True)
class BaselineExpectation:
    """Mean positive-class probability over a stated reference corpus."""
    value: float
    corpus_size: int


class Predictor:
    """Deterministic scorer f(tokens, mask) -> P(insecure)."""

    name = "predictor"
    mask_token = DEFAULT_MASK_TOKEN

    def predict(self, tokens: list[str], mask) -> float:
        raise NotImplementedError

    def predict_many(self, tokens: list[str], masks: np.ndarray) -> np.ndarray:
        """Score a (m, n) 0/1 mask matrix; default loops over rows."""
        return np.array([self.predict(tokens, tuple(row)) for row in masks])


class ToyLogit(Predictor):
    """sigma(bias + sum of marker weights over unmasked lexemes).

    The sentinel lexeme may itself carry a marker weight (defaults to 0),
    so masking a position swaps its weight for the sentinel's.
    """

    def __init__(self, markers: dict[str, float], bias: float = 0.0,
                 mask_token: str = DEFAULT_MASK_TOKEN):
        self.markers = dict(markers)
        self.bias = bias
        self.mask_token = mask_token
        self.name = "toy-logit"

    def _weights(self, tokens: list[str]) -> np.ndarray:
        return np.array([self.markers.get(t, 0.0) for t in tokens])

    def predict(self, tokens, mask) -> float:
        lexemes = apply_mask(tokens, mask, self.mask_token)
        score = self.bias + sum(self.markers.get(t, 0.0) for t in lexemes)
        return 1.0 / (1.0 + math.exp(-score))

    def predict_many(self, tokens, masks):
        masks = np.asarray(masks, dtype=float)
        w = self._weights(tokens)
        s = self.markers.get(self.mask_token, 0.0)
        scores = self.bias + masks @ (w - s) + s * len(tokens)
        return 1.0 / (1.0 + np.exp(-scores))


class ToyLinear(Predictor):
    """clamp(sum of per-position coefficients over unmasked positions, 0, 1).

    When no mask pattern drives the sum outside [0, 1] the game is additive
    and the exact attribution of position i is its coefficient c_i.
    """

    def __init__(self, coefficients: list[float], mask_token: str = DEFAULT_MASK_TOKEN):
        self.coefficients = np.array(coefficients, dtype=float)
        self.mask_token = mask_token
        self.name = "toy-linear"

    def predict(self, tokens, mask) -> float:
        if len(mask) != len(self.coefficients):
            raise ValueError("mask length != coefficient count")
        return float(np.clip(np.asarray(mask, dtype=float) @ self.coefficients, 0.0, 1.0))

    def predict_many(self, tokens, masks):
        masks = np.asarray(masks, dtype=float)
        return np.clip(masks @ self.coefficients, 0.0, 1.0)


class FlawedToyLogit(ToyLogit):
    """ToyLogit that flips its output on a seeded fraction of low-confidence inputs.

    Used to exercise the rule guard: flipped items stay below the confidence
    threshold, so a correct rule can override them.
    """

    def __init__(self, markers, bias=0.0, mask_token=DEFAULT_MASK_TOKEN,
                 flaw_rate: float = 0.2, flaw_threshold: float = 0.6, flaw_seed: int = 0):
        super().__init__(markers, bias, mask_token)
        self.flaw_rate = flaw_rate
        self.flaw_threshold = flaw_threshold
        self.flaw_seed = flaw_seed
        self.name = "toy-logit-flawed"

    def _flawed(self, tokens) -> bool:
        # stable across processes, unlike hash()
        key = repr((self.flaw_seed, tuple(tokens))).encode("utf-8")
        h = int.from_bytes(hashlib.sha256(key).digest()[:8], "big")
        return (h / 2.0 ** 64) < self.flaw_rate

    def predict(self, tokens, mask) -> float:
        p = super().predict(tokens, mask)
        if confidence(p) < self.flaw_threshold and self._flawed(tokens):
            return 1.0 - p
        return p

    def predict_many(self, tokens, masks):
        p = super().predict_many(tokens, masks)
        if self._flawed(tokens):
            low = np.maximum(p, 1.0 - p) < self.flaw_threshold
            p = np.where(low, 1.0 - p, p)
        return p


class RemotePredictor(Predictor):
    """Client for the predictor wire protocol (POST /predict, /predict_batch)."""

    def __init__(self, base_url: str, mask_token: str = DEFAULT_MASK_TOKEN,
                 timeout: float = 30.0, batch_size: int = 64):
        self.base_url = base_url.rstrip("/")
        self.mask_token = mask_token
        self.timeout = timeout
        self.batch_size = batch_size
        self._session = requests.Session()
        self._lock = threading.Lock()
        self.name = f"remote:{self.base_url}"

    def _post(self, path: str, payload: dict) -> dict:
        try:
            resp = self._session.post(self.base_url + path, json=payload,
                                      timeout=self.timeout)
        except requests.RequestException as exc:
            raise PredictorUnavailable(f"{self.base_url}{path}: {exc}") from exc
        if resp.status_code != 200:
            raise ProtocolError(f"{path} returned HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError as exc:
            raise ProtocolError(f"{path} returned non-JSON body") from exc

    def info(self) -> dict:
        try:
            resp = self._session.get(self.base_url + "/info", timeout=self.timeout)
        except requests.RequestException as exc:
            raise PredictorUnavailable(f"{self.base_url}/info: {exc}") from exc
        if resp.status_code != 200:
            raise ProtocolError(f"/info returned HTTP {resp.status_code}")
        return resp.json()

    def predict(self, tokens, mask) -> float:
        body = self._post("/predict", {
            "tokens": list(tokens), "mask": list(int(m) for m in mask),
            "mask_token": self.mask_token,
        })
        try:
            p = float(body["p_positive"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed /predict reply: {body!r}") from exc
        if not 0.0 <= p <= 1.0:
            raise ProtocolError(f"p_positive out of range: {p}")
        return p

    def predict_many(self, tokens, masks):
        masks = np.asarray(masks, dtype=int)
        out = np.empty(len(masks))
        for start in range(0, len(masks), self.batch_size):
            chunk = masks[start:start + self.batch_size]
            body = self._post("/predict_batch", {
                "tokens": [list(tokens)] * len(chunk),
                "mask": [list(int(m) for m in row) for row in chunk],
                "mask_token": self.mask_token,
            })
            try:
                probs = [float(p) for p in body["p_positive"]]
            except (KeyError, TypeError, ValueError) as exc:
                raise ProtocolError(f"malformed /predict_batch reply: {body!r}") from exc
            if len(probs) != len(chunk):
                raise ProtocolError("batch reply length != request length")
            out[start:start + len(chunk)] = probs
        return out


def baseline_expectation(snippets, predictor: Predictor, max_tokens: int = 500) -> BaselineExpectation:
    """Arithmetic mean of unmasked predictions over a corpus of snippets."""
    from .lexing import tokenize

    if not snippets:
        raise EmptyCorpus("baseline expectation over empty corpus")
    total = 0.0
    for snippet in snippets:
        tokens = [t.lexeme for t in tokenize(snippet, max_tokens)]
        total += predictor.predict(tokens, full_mask(len(tokens)))
    return BaselineExpectation(value=total / len(snippets), corpus_size=len(snippets))
