import pytest

from nspc.errors import ConfigError, LengthMismatch
from nspc.lexing import ClassLabel, Language
from nspc.pipeline import (
    ExperimentConfig, apply_guard, attribute_corpus, evaluate_guard, load_config,
    make_predictor, parse_config_text, run_pipeline, select_snippets,
)
from nspc.probing import PositionRange
from nspc.rules import RuleSet
from nspc.synth import load_corpus

ARTIFACTS = [
    "tensor_secure.jsonl", "tensor_insecure.jsonl", "grid.csv", "grid.csv.meta",
    "plot_data.jsonl", "rules.json", "predictions.jsonl", "report.md",
]


def test_parse_config_defaults_and_overrides():
    cfg = parse_config_text("seed = 9\n# comment\n\ntau = 0.7\nlanguage = java\n")
    assert cfg.seed == 9
    assert cfg.tau == 0.7
    assert cfg.language == Language.JAVA
    assert cfg.bin_count == 6


def test_parse_config_custom_ranges():
    cfg = parse_config_text("custom_ranges = 0-43,44-250,251-280\n")
    assert cfg.ranges() == [
        PositionRange(0, 43), PositionRange(44, 250), PositionRange(251, 280)]


def test_parse_config_unknown_key():
    with pytest.raises(ConfigError):
        parse_config_text("nope = 1\n")


def test_parse_config_bad_value():
    with pytest.raises(ConfigError):
        parse_config_text("seed = abc\n")


def test_gate_bounds_enforced():
    with pytest.raises(ConfigError):
        ExperimentConfig(gate=0.5)
    with pytest.raises(ConfigError):
        ExperimentConfig(gate=1.0)


def test_unknown_predictor_spec():
    with pytest.raises(ConfigError):
        make_predictor(ExperimentConfig(predictor="nope"))


def test_select_snippets_caps_per_class(small_corpus_dir):
    snippets = select_snippets(load_corpus(small_corpus_dir), 10)
    per = {label: sum(1 for s in snippets if s.label == label)
           for label in ClassLabel}
    assert per[ClassLabel.SECURE] == 10
    assert per[ClassLabel.INSECURE] == 10


@pytest.fixture(scope="module")
def small_run(small_corpus_dir, tmp_path_factory):
    config = ExperimentConfig(corpus_dir=str(small_corpus_dir), class_cap=60,
                              seed=7, sample_count=100)
    out = tmp_path_factory.mktemp("run")
    return config, run_pipeline(config, out)


def test_run_writes_all_artifacts(small_run):
    _, result = small_run
    for name in ARTIFACTS:
        assert (result.out_dir / name).exists(), name


def test_run_rerun_byte_identical(small_run, tmp_path):
    config, result = small_run
    second = run_pipeline(config, tmp_path / "again")
    for name in ARTIFACTS:
        assert (result.out_dir / name).read_bytes() == \
            (second.out_dir / name).read_bytes(), name


def test_stage_isolation_probe_from_persisted_tensors(small_run, tmp_path):
    from nspc.pipeline import ALL_TAGS
    from nspc.probing import probe_grid, write_grid_csv
    from nspc.tensor import load_tensor, merge_tensors

    config, result = small_run
    rows = merge_tensors(
        load_tensor(result.out_dir / "tensor_secure.jsonl"),
        load_tensor(result.out_dir / "tensor_insecure.jsonl"),
    )
    grid = probe_grid(rows, ALL_TAGS, config.ranges(), config.seed,
                      config.probe_config())
    out = tmp_path / "grid.csv"
    write_grid_csv(grid, ALL_TAGS, config.ranges(), out)
    assert out.read_bytes() == (result.out_dir / "grid.csv").read_bytes()


def test_recovered_rule_matches_plant(small_run):
    _, result = small_run
    ids = [r.rule_id for r in result.rule_set.positive_rules()]
    assert "literal[0-49]:presence->insecure:positive-correlation" in ids


def test_split_by_prediction_routes_by_model(small_corpus_dir):
    config = ExperimentConfig(corpus_dir=str(small_corpus_dir), class_cap=10,
                              seed=1, sample_count=50, split_by="prediction")
    snippets = select_snippets(load_corpus(small_corpus_dir), 10)
    predictor = make_predictor(config)
    _, _, (secure_t, insecure_t) = attribute_corpus(config, snippets, predictor)
    # routed counts reflect predictions, not necessarily 10/10 labels
    assert len(secure_t.rows) + len(insecure_t.rows) > 0
    for row in insecure_t.rows:
        assert row.class_label == ClassLabel.INSECURE


def test_evaluate_guard_no_rules(small_corpus_dir):
    config = ExperimentConfig(corpus_dir=str(small_corpus_dir), class_cap=20, seed=2)
    snippets = select_snippets(load_corpus(small_corpus_dir), 20)
    results = apply_guard(config, snippets, make_predictor(config),
                          RuleSet((), {}))
    metrics = evaluate_guard(results)
    assert metrics["accuracy"] == metrics["bare_accuracy"]
    assert metrics["flipped_count"] == 0
    assert metrics["flip_gain"] == 0


def test_evaluate_guard_needs_labels():
    with pytest.raises(LengthMismatch):
        evaluate_guard([])


def test_load_config_file(tmp_path):
    p = tmp_path / "cfg"
    p.write_text("seed = 3\nclass_cap = 5\n")
    cfg = load_config(p)
    assert cfg.seed == 3
    assert cfg.class_cap == 5
