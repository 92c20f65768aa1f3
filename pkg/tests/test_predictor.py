import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nspc.errors import EmptyCorpus, PredictorUnavailable
from nspc.lexing import Language, SourceSnippet
from nspc.predictor import (
    FlawedToyLogit, RemotePredictor, ToyLinear, ToyLogit, baseline_expectation,
    confidence, empty_mask, full_mask,
)


def sigma(x):
    return 1.0 / (1.0 + math.exp(-x))


def test_toy_logit_marker_example():
    p = ToyLogit({"strcpy": 2.0}, bias=-1.0)
    assert p.predict(["strcpy"], (1,)) == pytest.approx(sigma(1.0), abs=1e-12)
    assert p.predict(["strcpy"], (0,)) == pytest.approx(sigma(-1.0), abs=1e-12)


def test_all_masked_equals_empty_context():
    p = ToyLogit({"a": 1.0, "b": -2.0}, bias=0.3)
    masked_a = p.predict(["a", "b"], (0, 0))
    masked_b = p.predict(["x", "y"], (0, 0))
    assert masked_a == masked_b


def test_masked_sentinel_weight_counts():
    p = ToyLogit({"a": 1.0, "<mask>": 0.5}, bias=0.0)
    assert p.predict(["a"], (0,)) == pytest.approx(sigma(0.5), abs=1e-12)


def test_predict_many_matches_predict():
    p = ToyLogit({"a": 0.7, "b": -0.2}, bias=0.1)
    tokens = ["a", "b", "c"]
    masks = np.array([[1, 1, 1], [0, 1, 0], [0, 0, 0], [1, 0, 1]])
    many = p.predict_many(tokens, masks)
    each = [p.predict(tokens, tuple(row)) for row in masks]
    assert np.allclose(many, each, atol=1e-12)


def test_toy_linear_clamps():
    p = ToyLinear([0.8, 0.8])
    assert p.predict(["a", "b"], (1, 1)) == 1.0
    assert p.predict(["a", "b"], (1, 0)) == pytest.approx(0.8)
    assert p.predict(["a", "b"], (0, 0)) == 0.0


def test_idempotent_determinism():
    p = ToyLogit({"a": 0.3}, bias=-0.4)
    vals = {p.predict(["a", "b"], (1, 0)) for _ in range(10)}
    assert len(vals) == 1


@settings(max_examples=50, deadline=None)
@given(
    st.dictionaries(st.sampled_from(["a", "b", "c"]), st.floats(0.0, 3.0), min_size=1),
    st.lists(st.sampled_from(["a", "b", "c", "d"]), min_size=1, max_size=6),
    st.integers(0, 5),
)
def test_mask_monotonicity_positive_markers(markers, tokens, pos):
    """Unmasking a non-negative-weight marker never decreases p_positive."""
    pos = pos % len(tokens)
    p = ToyLogit(markers, bias=-0.5)
    off = [1] * len(tokens)
    off[pos] = 0
    on = [1] * len(tokens)
    assert p.predict(tokens, tuple(on)) >= p.predict(tokens, tuple(off)) - 1e-15


def test_confidence():
    assert confidence(0.9) == 0.9
    assert confidence(0.2) == 0.8


def logit(p):
    return math.log(p / (1 - p))


def test_baseline_expectation_examples():
    predictor = ToyLogit({"aa": logit(0.2), "bb": logit(0.6)})
    one = [SourceSnippet("1", Language.C, "aa")]
    # singleton mean: p itself
    assert baseline_expectation(one, predictor).value == pytest.approx(0.2, abs=1e-12)
    two = one + [SourceSnippet("2", Language.C, "bb")]
    assert baseline_expectation(two, predictor).value == pytest.approx(0.4, abs=1e-12)


def test_baseline_expectation_empty():
    with pytest.raises(EmptyCorpus):
        baseline_expectation([], ToyLogit({}))


def test_baseline_streaming_mean_oracle(small_corpus_dir):
    from nspc.lexing import tokenize
    from nspc.synth import load_corpus
    from nspc.synth import default_markers, DEFAULT_BIAS

    snippets = load_corpus(small_corpus_dir)
    predictor = ToyLogit(default_markers(), DEFAULT_BIAS)
    got = baseline_expectation(snippets, predictor).value
    # independent single-pass streaming mean
    mean = 0.0
    for k, s in enumerate(snippets, 1):
        tokens = [t.lexeme for t in tokenize(s)]
        p = predictor.predict(tokens, full_mask(len(tokens)))
        mean += (p - mean) / k
    assert got == pytest.approx(mean, abs=1e-12)


def test_flawed_toy_deterministic():
    p = FlawedToyLogit({"a": 0.2}, bias=0.0, flaw_seed=3)
    tokens = ["a", "b"]
    assert p.predict(tokens, (1, 1)) == p.predict(tokens, (1, 1))


def test_flawed_toy_flips_only_low_confidence():
    p = FlawedToyLogit({"big": 5.0}, bias=0.0, flaw_rate=1.0, flaw_seed=0)
    # high confidence untouched
    assert p.predict(["big"], (1,)) > 0.9
    # low confidence flipped (rate 1.0)
    base = ToyLogit({"big": 5.0}, bias=0.0)
    assert p.predict(["x"], (1,)) == pytest.approx(
        1.0 - base.predict(["x"], (1,)), abs=1e-15)


def test_remote_predictor_unavailable():
    p = RemotePredictor("http://127.0.0.1:9", timeout=0.5)
    with pytest.raises(PredictorUnavailable):
        p.predict(["x"], (1,))


def test_mask_helpers():
    assert full_mask(3) == (1, 1, 1)
    assert empty_mask(2) == (0, 0)
