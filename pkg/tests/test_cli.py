import json

from nspc.cli import main


def test_full_cli_chain(tmp_path):
    corpus = tmp_path / "corpus"
    assert main(["--seed", "5", "generate", "--out", str(corpus),
                 "--n-per-class", "20",
                 "--plant", "literal:0:49:insecure:0.9"]) == 0

    cfg = tmp_path / "cfg"
    cfg.write_text(f"corpus_dir = {corpus}\nclass_cap = 20\nseed = 5\n"
                   "sample_count = 50\nmin_samples = 20\n")

    secure = tmp_path / "secure.jsonl"
    insecure = tmp_path / "insecure.jsonl"
    assert main(["--config", str(cfg), "attribute", "--corpus", str(corpus),
                 "--out", str(secure), "--class", "secure"]) == 0
    assert main(["--config", str(cfg), "attribute", "--corpus", str(corpus),
                 "--out", str(insecure), "--class", "insecure"]) == 0

    grid = tmp_path / "grid.csv"
    assert main(["--config", str(cfg), "probe", "--secure", str(secure),
                 "--insecure", str(insecure), "--out", str(grid)]) == 0
    assert grid.exists()
    meta = tmp_path / "grid.csv.meta"
    assert meta.exists()

    rules = tmp_path / "rules.json"
    assert main(["--config", str(cfg), "rules", "--grid", str(meta),
                 "--out", str(rules)]) == 0
    objs = json.loads(rules.read_text())
    assert "provenance" in objs[0]

    preds = tmp_path / "predictions.jsonl"
    assert main(["--config", str(cfg), "apply", "--rules", str(rules),
                 "--tau", "0.6", "--corpus", str(corpus),
                 "--out", str(preds)]) == 0
    lines = preds.read_text().splitlines()
    assert len(lines) == 40
    rec = json.loads(lines[0])
    assert {"snippet_id", "final_class", "model_class", "decided_by"} <= rec.keys()


def test_run_subcommand(tmp_path, small_corpus_dir):
    cfg = tmp_path / "cfg"
    cfg.write_text(f"corpus_dir = {small_corpus_dir}\nclass_cap = 30\nseed = 5\n"
                   "sample_count = 50\n")
    out = tmp_path / "run"
    assert main(["--config", str(cfg), "run", "--out-dir", str(out)]) == 0
    assert (out / "report.md").exists()


def test_config_error_exit_code(tmp_path):
    cfg = tmp_path / "cfg"
    cfg.write_text("bogus_key = 1\n")
    assert main(["--config", str(cfg), "run", "--out-dir", str(tmp_path / "o")]) == 2


def test_predictor_error_exit_code(tmp_path, small_corpus_dir):
    cfg = tmp_path / "cfg"
    cfg.write_text(f"corpus_dir = {small_corpus_dir}\nclass_cap = 5\n"
                   "predictor = http://127.0.0.1:9\n")
    rc = main(["--config", str(cfg), "attribute", "--corpus",
               str(small_corpus_dir), "--out", str(tmp_path / "t.jsonl"),
               "--class", "secure"])
    assert rc == 3


def test_data_error_exit_code(tmp_path):
    rc = main(["apply", "--rules", str(tmp_path / "missing.json"),
               "--corpus", str(tmp_path / "nowhere"),
               "--out", str(tmp_path / "p.jsonl")])
    assert rc == 4


def test_bad_plant_spec_exit_code(tmp_path):
    rc = main(["generate", "--out", str(tmp_path / "c"),
               "--plant", "literal:bad"])
    assert rc == 2
