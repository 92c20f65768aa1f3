import itertools
import math

import pytest

from nspc.lexing import AstTag, ClassLabel
from nspc.probing import PositionRange
from nspc.synth import PlantSpec, generate_synthetic_corpus


def shapley_brute_force(tokens, predictor):
    """Independent oracle: per-size coalition averaging, 1/(n*C(n-1,s)) weights."""
    n = len(tokens)
    cache = {}

    def f(subset):
        if subset not in cache:
            mask = tuple(1 if i in subset else 0 for i in range(n))
            cache[subset] = predictor.predict(tokens, mask)
        return cache[subset]

    phis = []
    for i in range(n):
        others = [j for j in range(n) if j != i]
        total = 0.0
        for s in range(n):
            coeff = 1.0 / (n * math.comb(n - 1, s))
            for subset in itertools.combinations(others, s):
                base = frozenset(subset)
                total += coeff * (f(base | {i}) - f(base))
        phis.append(total)
    return phis


PLANT = PlantSpec(AstTag.LITERAL, PositionRange(0, 49), ClassLabel.INSECURE, 0.9)


@pytest.fixture(scope="session")
def planted_corpus_dir(tmp_path_factory):
    """Seeded 200+200 corpus with the literal-in-[0,49] insecure pattern."""
    d = tmp_path_factory.mktemp("corpus") / "planted"
    generate_synthetic_corpus(200, [PLANT], seed=42, corpus_dir=d)
    return d


@pytest.fixture(scope="session")
def small_corpus_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("corpus-small") / "planted"
    generate_synthetic_corpus(60, [PLANT], seed=42, corpus_dir=d)
    return d
