"""Per-token Shapley attribution of a black-box predictor.

Exact coalition enumeration up to ``exact_limit`` tokens (2^n predictor
calls, batched); above that, permutation sampling with antithetic pairing.
Both estimators satisfy the efficiency identity
sum(phi) = f(full) - f(empty): exactly by construction for the enumerator,
and per-permutation (telescoping prefix sums) for the sampler.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import InvalidSampleCount, TooManyTokens
from .predictor import BaselineExpectation, Predictor, empty_mask, full_mask

DEFAULT_EXACT_LIMIT = 14


@dataclass(frozen=True)
class ShapVector:
    snippet_id: str
    phis: tuple[float, ...]
    method: str  # "exact" | "sampled"
    sample_count: int  # 0 for exact
    seed: int
    f_full: float
    f_empty: float
    reference: Optional[float] = None  # corpus baseline expectation

    def to_dict(self) -> dict:
        return {
            "snippet_id": self.snippet_id,
            "phis": list(self.phis),
            "method": self.method,
            "sample_count": self.sample_count,
            "seed": self.seed,
            "f_full": self.f_full,
            "f_empty": self.f_empty,
            "reference": self.reference,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ShapVector":
        return cls(
            snippet_id=d["snippet_id"], phis=tuple(d["phis"]), method=d["method"],
            sample_count=d["sample_count"], seed=d["seed"], f_full=d["f_full"],
            f_empty=d["f_empty"], reference=d.get("reference"),
        )


def _coalition_values(tokens: list[str], predictor: Predictor) -> np.ndarray:
    """f over all 2^n masks, indexed by bitmask (bit i = token i unmasked)."""
    n = len(tokens)
    bits = (np.arange(2 ** n)[:, None] >> np.arange(n)) & 1
    return np.asarray(predictor.predict_many(tokens, bits), dtype=float)


def shap_exact(tokens: list[str], predictor: Predictor,
               exact_limit: int = DEFAULT_EXACT_LIMIT,
               snippet_id: str = "") -> ShapVector:
    """Exact Shapley values by full coalition enumeration."""
    n = len(tokens)
    if n > exact_limit:
        raise TooManyTokens(f"{n} tokens exceeds exact limit {exact_limit}")
    values = _coalition_values(tokens, predictor)
    fact = [math.factorial(k) for k in range(n + 1)]
    # weight of a coalition S (excluding i) in the classic average-over-orders form
    weights = np.array([fact[s] * fact[n - s - 1] / fact[n] for s in range(n)])
    popcount = np.array([bin(s).count("1") for s in range(2 ** n)])
    phis = []
    for i in range(n):
        without_i = np.nonzero(((np.arange(2 ** n) >> i) & 1) == 0)[0]
        contrib = weights[popcount[without_i]] * (
            values[without_i | (1 << i)] - values[without_i]
        )
        phis.append(math.fsum(contrib))
    return ShapVector(
        snippet_id=snippet_id, phis=tuple(phis), method="exact", sample_count=0,
        seed=0, f_full=float(values[-1]), f_empty=float(values[0]),
    )


def shap_sampled(tokens: list[str], predictor: Predictor, m: int, seed: int,
                 snippet_id: str = "", batch_permutations: int = 256) -> ShapVector:
    """Permutation-sampling Shapley estimate with antithetic (reversed) pairs.

    Each of the m permutations contributes one marginal-contribution walk of
    n+1 prefix masks; phi_i is the mean contribution of token i.
    """
    if m < 2 or m % 2 != 0:
        raise InvalidSampleCount(f"sample count must be even and >= 2, got {m}")
    n = len(tokens)
    rng = np.random.default_rng(seed)
    base = np.array([rng.permutation(n) for _ in range(m // 2)])
    perms = np.empty((m, n), dtype=int)
    perms[0::2] = base
    perms[1::2] = base[:, ::-1]

    totals = np.zeros(n)
    eye = np.arange(n)
    for start in range(0, m, batch_permutations):
        chunk = perms[start:start + batch_permutations]
        b = len(chunk)
        onehot = (chunk[:, :, None] == eye).astype(np.int8)  # (b, n, n)
        masks = np.zeros((b, n + 1, n), dtype=np.int8)
        np.cumsum(onehot, axis=1, out=masks[:, 1:, :])
        values = np.asarray(
            predictor.predict_many(tokens, masks.reshape(b * (n + 1), n)),
            dtype=float,
        ).reshape(b, n + 1)
        contribs = np.diff(values, axis=1)  # (b, n), step j adds token chunk[:, j]
        for row, perm in zip(contribs, chunk):
            totals[perm] += row
    phis = totals / m
    f_empty = float(predictor.predict(tokens, empty_mask(n)))
    f_full = float(predictor.predict(tokens, full_mask(n)))
    return ShapVector(
        snippet_id=snippet_id, phis=tuple(phis), method="sampled", sample_count=m,
        seed=seed, f_full=f_full, f_empty=f_empty,
    )


def shap_auto(tokens: list[str], predictor: Predictor, m: int, seed: int,
              exact_limit: int = DEFAULT_EXACT_LIMIT,
              snippet_id: str = "") -> ShapVector:
    """Exact enumeration when affordable, sampling otherwise."""
    if len(tokens) <= exact_limit:
        return shap_exact(tokens, predictor, exact_limit, snippet_id)
    return shap_sampled(tokens, predictor, m, seed, snippet_id)


def relative_to_expectation(v: ShapVector, baseline: BaselineExpectation) -> ShapVector:
    """Attach the corpus baseline as the reporting reference; phis unchanged."""
    return replace(v, reference=baseline.value)
