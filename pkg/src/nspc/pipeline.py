"""End-to-end desk-scale experiment orchestration.

Stages: attribute -> tensors -> probe grid -> rules -> guarded apply ->
markdown report.  Every stage persists its artifact, stages can be re-run
from predecessors, and the whole run is a pure function of
(config, corpus, seed): artifacts are byte-identical across reruns.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from .attribution import (
    DEFAULT_EXACT_LIMIT, ShapVector, relative_to_expectation, shap_auto,
)
from .errors import ConfigError, LengthMismatch
from .lexing import AlignedToken, AstTag, ClassLabel, Language, SourceSnippet, \
    default_taxonomy, tokenize_and_align
from .predictor import (
    DEFAULT_MASK_TOKEN, FlawedToyLogit, Predictor, RemotePredictor, ToyLogit,
    baseline_expectation, full_mask,
)
from .probing import (
    PositionRange, ProbeConfig, ProbeGrid, bin_ranges, grid_records, probe_grid,
    write_grid_csv, write_grid_meta, write_plot_data,
)
from .rules import GuardedPrediction, RuleSet, derive_rules_from_records, \
    guard_predict, save_ruleset
from .synth import DEFAULT_BIAS, default_markers, load_corpus
from .tensor import (
    ClassTensor, Provenance, build_tensors, merge_tensors, persist_tensor,
)

ALL_TAGS = list(AstTag)


@dataclass(frozen=True)
class ExperimentConfig:
    language: Language = Language.C
    corpus_dir: str = ""
    class_cap: int = 300       # snippets used per class
    token_cap: int = 500
    probe_max_len: int = 300
    bin_count: int = 6
    custom_ranges: Optional[tuple[PositionRange, ...]] = None
    seed: int = 0
    predictor: str = "toy"     # toy | toy-flawed | http(s) URL
    mask_token: str = DEFAULT_MASK_TOKEN
    sample_count: int = 200    # permutations for sampled attribution
    exact_limit: int = DEFAULT_EXACT_LIMIT
    tau: float = 0.6
    gate: float = 0.6
    min_samples: int = 30
    probe_features: str = "pos_phi"  # pos_phi | phi
    split_by: str = "label"    # label | prediction
    workers: int = 1

    def __post_init__(self):
        if self.class_cap < 1 or self.token_cap < 1 or self.bin_count < 1:
            raise ConfigError("caps and bin_count must be >= 1")
        if not 0.5 < self.gate < 1.0:
            raise ConfigError(f"gate must be in (0.5, 1), got {self.gate}")
        if self.split_by not in ("label", "prediction"):
            raise ConfigError(f"split_by must be label or prediction, got {self.split_by!r}")
        if self.probe_features not in ("pos_phi", "phi"):
            raise ConfigError(f"bad probe_features {self.probe_features!r}")

    def ranges(self) -> list[PositionRange]:
        if self.custom_ranges is not None:
            return list(self.custom_ranges)
        return bin_ranges(self.probe_max_len, self.bin_count)

    def probe_config(self) -> ProbeConfig:
        return ProbeConfig(min_samples=self.min_samples, gate=self.gate,
                           feature_mode=self.probe_features)


_INT_KEYS = {"class_cap", "token_cap", "probe_max_len", "bin_count", "seed",
             "sample_count", "exact_limit", "min_samples", "workers"}
_FLOAT_KEYS = {"tau", "gate"}


def parse_config_text(text: str) -> ExperimentConfig:
    """`key = value` per line; blank lines and # comments ignored."""
    known = {f.name for f in fields(ExperimentConfig)}
    kwargs = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        try:
            if key in _INT_KEYS:
                kwargs[key] = int(value)
            elif key in _FLOAT_KEYS:
                kwargs[key] = float(value)
            elif key == "language":
                kwargs[key] = Language(value)
            elif key == "custom_ranges":
                # e.g. 0-43,44-99,100-299
                kwargs[key] = tuple(
                    PositionRange(int(a), int(b))
                    for a, b in (part.split("-") for part in value.split(","))
                )
            else:
                kwargs[key] = value
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from exc
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def config_hash(config: ExperimentConfig) -> str:
    payload = {f.name: str(getattr(config, f.name)) for f in fields(ExperimentConfig)}
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True).encode("utf-8")
    ).hexdigest()[:16]


def corpus_hash(snippets: list[SourceSnippet]) -> str:
    h = hashlib.sha256()
    for s in sorted(snippets, key=lambda s: s.id):
        label = s.label.value if s.label else ""
        h.update(f"{s.id}\x00{s.language.value}\x00{label}\x00".encode("utf-8"))
        h.update(s.text.encode("utf-8"))
    return h.hexdigest()[:16]


def make_predictor(config: ExperimentConfig) -> Predictor:
    if config.predictor == "toy":
        return ToyLogit(default_markers(), DEFAULT_BIAS, config.mask_token)
    if config.predictor == "toy-flawed":
        return FlawedToyLogit(default_markers(), DEFAULT_BIAS, config.mask_token,
                              flaw_rate=0.2, flaw_threshold=config.tau,
                              flaw_seed=config.seed)
    if config.predictor.startswith(("http://", "https://")):
        return RemotePredictor(config.predictor, config.mask_token)
    raise ConfigError(f"unknown predictor spec {config.predictor!r}")


def select_snippets(snippets: list[SourceSnippet], class_cap: int) -> list[SourceSnippet]:
    """First class_cap snippets per class in id order."""
    out = []
    for label in (ClassLabel.SECURE, ClassLabel.INSECURE):
        per = sorted((s for s in snippets if s.label == label), key=lambda s: s.id)
        out.extend(per[:class_cap])
    return sorted(out, key=lambda s: s.id)


def _snippet_seed(seed: int, snippet_id: str) -> int:
    digest = hashlib.sha256(f"{seed}:{snippet_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big")


def attribute_corpus(config: ExperimentConfig, snippets: list[SourceSnippet],
                     predictor: Predictor):
    """Tokenize, align, and attribute every snippet.

    Returns (aligned, shap_vectors, tensors) where tensors is the
    (secure, insecure) pair.
    """
    taxonomy = default_taxonomy(config.language)
    snippets = sorted(snippets, key=lambda s: s.id)
    aligned: dict[str, list[AlignedToken]] = {}
    for s in snippets:
        aligned[s.id] = tokenize_and_align(s, config.token_cap, taxonomy)

    def one(s: SourceSnippet) -> ShapVector:
        lexemes = [t.lexeme for t in aligned[s.id]]
        return shap_auto(lexemes, predictor, m=config.sample_count,
                         seed=_snippet_seed(config.seed, s.id),
                         exact_limit=config.exact_limit, snippet_id=s.id)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            vectors = list(pool.map(one, snippets))
    else:
        vectors = [one(s) for s in snippets]

    baseline = baseline_expectation(snippets, predictor, config.token_cap)
    shap_vectors = {
        s.id: relative_to_expectation(v, baseline) for s, v in zip(snippets, vectors)
    }

    if config.split_by == "prediction":
        routed = []
        for s in snippets:
            lexemes = [t.lexeme for t in aligned[s.id]]
            p = predictor.predict(lexemes, full_mask(len(lexemes)))
            label = ClassLabel.INSECURE if p >= 0.5 else ClassLabel.SECURE
            routed.append(replace(s, label=label))
    else:
        routed = snippets

    provenance = Provenance(
        predictor=predictor.name, seed=config.seed,
        method="auto", mask_sentinel=config.mask_token,
        corpus_hash=corpus_hash(snippets),
    )
    tensors = build_tensors(routed, aligned, shap_vectors, provenance)
    return aligned, shap_vectors, tensors


def apply_guard(config: ExperimentConfig, snippets: list[SourceSnippet],
                predictor: Predictor, rule_set: RuleSet,
                shap_vectors: Optional[dict[str, ShapVector]] = None):
    """Guarded predictions for every snippet, ordered by snippet id."""
    taxonomy = default_taxonomy(config.language)
    results = []
    for s in sorted(snippets, key=lambda s: s.id):
        tokens = tokenize_and_align(s, config.token_cap, taxonomy)
        shap = shap_vectors.get(s.id) if shap_vectors else None
        results.append((s, guard_predict(tokens, predictor, rule_set,
                                         tau=config.tau, shap=shap)))
    return results


def evaluate_guard(results: list[tuple[SourceSnippet, GuardedPrediction]]) -> dict:
    """Guarded-vs-bare accuracy plus the net effect of rule flips."""
    if not any(s.label for s, _ in results):
        raise LengthMismatch("no labelled snippets to evaluate")
    n = correct = bare_correct = flipped = flip_gain = 0
    for snippet, pred in results:
        if snippet.label is None:
            raise LengthMismatch(f"snippet {snippet.id!r} lacks a label")
        n += 1
        correct += pred.final_class == snippet.label
        bare_correct += pred.model_class == snippet.label
        if pred.decided_by == "rule" and pred.final_class != pred.model_class:
            flipped += 1
            if pred.final_class == snippet.label:
                flip_gain += 1
            elif pred.model_class == snippet.label:
                flip_gain -= 1
    return {
        "n": n,
        "accuracy": correct / n,
        "bare_accuracy": bare_correct / n,
        "flipped_count": flipped,
        "flip_gain": flip_gain,
    }


def write_predictions(results, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for snippet, pred in results:
            obj = {"snippet_id": snippet.id,
                   "label": snippet.label.value if snippet.label else None}
            obj.update(pred.to_dict())
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def render_report(config: ExperimentConfig, grid: ProbeGrid, rule_set: RuleSet,
                  metrics: Optional[dict], baseline: Optional[float]) -> str:
    tags, ranges = ALL_TAGS, config.ranges()
    lines = ["# Attribution probe report", ""]
    lines.append(f"- predictor: `{config.predictor}`")
    lines.append(f"- seed: {config.seed}")
    if baseline is not None:
        lines.append(f"- baseline expectation: {baseline:.6f}")
    lines.append(f"- accuracy gate: {config.gate}, guard tau: {config.tau}")
    lines += ["", "## Probe accuracy by AST type and position range", ""]
    header = "| tag | " + " | ".join(r.label for r in ranges) + " |"
    lines.append(header)
    lines.append("|" + "---|" * (len(ranges) + 1))
    for tag in tags:
        cells = []
        for rng in ranges:
            cell = grid.cells[(tag, rng)]
            if cell.status != "ok":
                cells.append("--")
            else:
                mark = "**" if grid.passed_gate(tag, rng) else ""
                cells.append(f"{mark}{cell.probe.test_accuracy:.3f}{mark}")
        lines.append(f"| {tag.value} | " + " | ".join(cells) + " |")
    lines += ["", "(** marks cells passing the gate; -- insufficient data)", ""]
    lines.append("## Derived rules")
    lines.append("")
    positive = rule_set.positive_rules()
    if positive:
        for rule in positive:
            cond = ""
            if rule.phi_condition is not None:
                cond = (f" with phi {rule.phi_condition.comparator} "
                        f"{rule.phi_condition.threshold:.6f}")
            lines.append(
                f"- {rule.tag.value} in [{rule.range.label}]{cond} "
                f"=> {rule.target_class.value} (confidence {rule.confidence:.3f})"
            )
    else:
        lines.append("- none passed the gate")
    low = [r for r in rule_set.rules if r.part == "low-reliability"]
    lines += ["", f"Low-reliability cells: {len(low)}", ""]
    if metrics is not None:
        lines.append("## Guarded evaluation")
        lines.append("")
        lines.append(f"- snippets: {metrics['n']}")
        lines.append(f"- bare model accuracy: {metrics['bare_accuracy']:.4f}")
        lines.append(f"- guarded accuracy: {metrics['accuracy']:.4f}")
        lines.append(f"- rule flips: {metrics['flipped_count']} "
                     f"(net correct: {metrics['flip_gain']})")
        lines.append("")
    return "\n".join(lines)


@dataclass
class PipelineResult:
    tensors: tuple[ClassTensor, ClassTensor]
    grid: ProbeGrid
    rule_set: RuleSet
    results: list
    metrics: dict
    report: str
    out_dir: Path


def run_pipeline(config: ExperimentConfig, out_dir) -> PipelineResult:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    snippets = select_snippets(load_corpus(config.corpus_dir), config.class_cap)
    predictor = make_predictor(config)

    aligned, shap_vectors, (secure_t, insecure_t) = attribute_corpus(
        config, snippets, predictor)
    persist_tensor(secure_t, out_dir / "tensor_secure.jsonl")
    persist_tensor(insecure_t, out_dir / "tensor_insecure.jsonl")

    rows = merge_tensors(secure_t, insecure_t)
    tags, ranges = ALL_TAGS, config.ranges()
    grid = probe_grid(rows, tags, ranges, config.seed, config.probe_config())
    write_grid_csv(grid, tags, ranges, out_dir / "grid.csv")
    write_grid_meta(grid, tags, ranges, out_dir / "grid.csv.meta")
    write_plot_data(grid, rows, tags, ranges, out_dir / "plot_data.jsonl")

    provenance = {
        "grid_hash": hashlib.sha256(
            (out_dir / "grid.csv.meta").read_bytes()).hexdigest()[:16],
        "config_hash": config_hash(config),
    }
    rule_set = derive_rules_from_records(
        grid_records(grid, tags, ranges), config.gate, provenance)
    save_ruleset(rule_set, out_dir / "rules.json")

    results = apply_guard(config, snippets, predictor, rule_set)
    write_predictions(results, out_dir / "predictions.jsonl")
    metrics = evaluate_guard(results)

    baseline = next(iter(shap_vectors.values())).reference if shap_vectors else None
    report = render_report(config, grid, rule_set, metrics, baseline)
    (out_dir / "report.md").write_text(report, encoding="utf-8")
    return PipelineResult(
        tensors=(secure_t, insecure_t), grid=grid, rule_set=rule_set,
        results=results, metrics=metrics, report=report, out_dir=out_dir,
    )
