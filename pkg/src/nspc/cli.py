"""``nspc`` command line interface.

Subcommands mirror the pipeline stages: generate, attribute, probe, rules,
apply, report, run.  Exit codes: 0 success, 2 config error, 3 predictor
error, 4 data error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
from pathlib import Path

from .errors import ConfigError, DataError, NspcError, PredictorError
from .lexing import AstTag, ClassLabel, Language
from .pipeline import (
    ALL_TAGS, ExperimentConfig, apply_guard, attribute_corpus, evaluate_guard,
    load_config, make_predictor, render_report, run_pipeline, select_snippets,
    write_predictions,
)
from .probing import (
    PositionRange, probe_grid, write_grid_csv, write_grid_meta, write_plot_data,
)
from .rules import derive_rules_from_records, load_ruleset, save_ruleset
from .synth import PlantSpec, generate_synthetic_corpus, load_corpus
from .tensor import load_tensor, merge_tensors, persist_tensor


def _base_config(args) -> ExperimentConfig:
    if getattr(args, "config", None):
        config = load_config(args.config)
    else:
        config = ExperimentConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        overrides["workers"] = args.workers
    if getattr(args, "language", None) is not None:
        overrides["language"] = Language(args.language)
    if getattr(args, "corpus", None) is not None:
        overrides["corpus_dir"] = args.corpus
    if getattr(args, "tau", None) is not None:
        overrides["tau"] = args.tau
    if overrides:
        config = dataclasses.replace(config, **overrides)
    return config


def _parse_plant(text: str) -> PlantSpec:
    # tag:lo:hi:class:rate, e.g. literal:0:49:insecure:0.9
    try:
        tag, lo, hi, cls, rate = text.split(":")
        return PlantSpec(AstTag(tag), PositionRange(int(lo), int(hi)),
                         ClassLabel(cls), float(rate))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad --plant spec {text!r} "
                          "(want tag:lo:hi:class:rate)") from exc


def cmd_generate(args) -> int:
    config = _base_config(args)
    plants = [_parse_plant(p) for p in args.plant]
    snippets = generate_synthetic_corpus(
        args.n_per_class, plants, config.seed, args.out)
    print(f"wrote {len(snippets)} snippets to {args.out}")
    return 0


def cmd_attribute(args) -> int:
    config = _base_config(args)
    snippets = select_snippets(load_corpus(config.corpus_dir), config.class_cap)
    predictor = make_predictor(config)
    _, _, (secure_t, insecure_t) = attribute_corpus(config, snippets, predictor)
    tensor = secure_t if args.cls == "secure" else insecure_t
    persist_tensor(tensor, args.out)
    print(f"wrote {len(tensor.rows)} rows to {args.out}")
    return 0


def cmd_probe(args) -> int:
    config = _base_config(args)
    rows = merge_tensors(load_tensor(args.secure), load_tensor(args.insecure))
    tags, ranges = ALL_TAGS, config.ranges()
    grid = probe_grid(rows, tags, ranges, config.seed, config.probe_config())
    out = Path(args.out)
    write_grid_csv(grid, tags, ranges, out)
    write_grid_meta(grid, tags, ranges, out.with_suffix(out.suffix + ".meta"))
    write_plot_data(grid, rows, tags, ranges, out.with_suffix(".plot.jsonl"))
    passed = sum(grid.passed_gate(t, r) for t in tags for r in ranges)
    print(f"fitted grid {len(tags)}x{len(ranges)}; {passed} cells passed the gate")
    return 0


def cmd_rules(args) -> int:
    config = _base_config(args)
    meta = json.loads(Path(args.grid).read_text(encoding="utf-8"))
    provenance = {
        "grid_hash": hashlib.sha256(
            Path(args.grid).read_bytes()).hexdigest()[:16],
    }
    rule_set = derive_rules_from_records(meta["cells"], config.gate, provenance)
    save_ruleset(rule_set, args.out)
    print(f"wrote {len(rule_set.rules)} rules to {args.out}")
    return 0


def cmd_apply(args) -> int:
    config = _base_config(args)
    snippets = select_snippets(load_corpus(config.corpus_dir), config.class_cap)
    predictor = make_predictor(config)
    rule_set = load_ruleset(args.rules)
    results = apply_guard(config, snippets, predictor, rule_set)
    write_predictions(results, args.out)
    if all(s.label for s, _ in results):
        metrics = evaluate_guard(results)
        print(f"guarded accuracy {metrics['accuracy']:.4f} "
              f"(bare {metrics['bare_accuracy']:.4f}, "
              f"flips {metrics['flipped_count']}, net {metrics['flip_gain']})")
    else:
        print(f"wrote {len(results)} predictions to {args.out}")
    return 0


def cmd_report(args) -> int:
    config = _base_config(args)
    result = run_pipeline(config, args.out_dir)
    print(result.report)
    return 0


def cmd_run(args) -> int:
    config = _base_config(args)
    result = run_pipeline(config, args.out_dir)
    passed = [r.rule_id for r in result.rule_set.positive_rules()]
    print(f"run complete in {result.out_dir}")
    print(f"rules passing gate: {len(passed)}")
    for rid in passed:
        print(f"  {rid}")
    print(f"guarded accuracy {result.metrics['accuracy']:.4f} "
          f"(bare {result.metrics['bare_accuracy']:.4f})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nspc",
        description="Mine symbolic classification rules from per-token "
                    "attributions of a black-box code classifier.",
    )
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--workers", type=int, default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic planted corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n-per-class", type=int, default=200)
    p.add_argument("--plant", action="append", default=[],
                   metavar="TAG:LO:HI:CLASS:RATE")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("attribute", help="compute one class tensor")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--class", dest="cls", required=True,
                   choices=["secure", "insecure"])
    p.add_argument("--language", choices=["c", "java"])
    p.set_defaults(func=cmd_attribute)

    p = sub.add_parser("probe", help="fit the probe grid from two tensors")
    p.add_argument("--secure", required=True)
    p.add_argument("--insecure", required=True)
    p.add_argument("--out", required=True, help="grid CSV path")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("rules", help="derive rules from a fitted grid")
    p.add_argument("--grid", required=True, help="grid .meta file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rules)

    p = sub.add_parser("apply", help="guarded predictions over a corpus")
    p.add_argument("--rules", required=True)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--language", choices=["c", "java"])
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("report", help="full pipeline, print the report")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run", help="full pipeline")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except PredictorError as exc:
        print(f"predictor error: {exc}", file=sys.stderr)
        return 3
    except (DataError, NspcError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
