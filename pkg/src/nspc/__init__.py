"""Symbolic rule mining from per-token attributions of a black-box code classifier."""

from .attribution import ShapVector, relative_to_expectation, shap_auto, shap_exact, shap_sampled
from .lexing import (
    AlignedToken, AstTag, ClassLabel, Language, SourceSnippet,
    align, default_taxonomy, tokenize, tokenize_and_align,
)
from .predictor import (
    BaselineExpectation, FlawedToyLogit, Predictor, RemotePredictor, ToyLinear,
    ToyLogit, baseline_expectation, confidence,
)
from .probing import LogisticProbe, PositionRange, ProbeConfig, ProbeGrid, bin_ranges, probe_grid
from .rules import GuardedPrediction, RuleSet, SymbolicRule, derive_rules, guard_predict, rule_fires
from .synth import PlantSpec, generate_synthetic_corpus, load_corpus
from .tensor import ClassTensor, Provenance, ShapTensorRow, build_tensors, merge_tensors

__version__ = "0.1.0"
