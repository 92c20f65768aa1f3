#!/usr/bin/env python3
"""Desk-scale planted-pattern recovery experiment.

Generates a seeded synthetic C corpus with an insecure-literal pattern planted
in positions [0, 49], runs the full attribution -> probe -> rules pipeline
against the built-in toy predictor, and prints the report.  This is the
self-contained analog of pointing the pipeline at a real classifier.

Usage:
    python scripts/planted_recovery.py [--out-dir runs/planted] [--seed 42]
        [--n-per-class 200] [--flawed]
"""

import argparse
import tempfile
from pathlib import Path

from nspc.lexing import AstTag, ClassLabel
from nspc.pipeline import ExperimentConfig, run_pipeline
from nspc.probing import PositionRange
from nspc.synth import PlantSpec, generate_synthetic_corpus


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default=None)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--n-per-class", type=int, default=200)
    ap.add_argument("--flawed", action="store_true",
                    help="use the deliberately flawed predictor to exercise "
                         "the guard")
    args = ap.parse_args()

    out = Path(args.out_dir) if args.out_dir else Path(tempfile.mkdtemp(
        prefix="nspc-planted-"))
    corpus = out / "corpus"
    plant = PlantSpec(AstTag.LITERAL, PositionRange(0, 49),
                      ClassLabel.INSECURE, 0.9)
    generate_synthetic_corpus(args.n_per_class, [plant], args.seed, corpus)
    print(f"corpus: {2 * args.n_per_class} snippets in {corpus}")

    config = ExperimentConfig(
        corpus_dir=str(corpus), seed=args.seed,
        predictor="toy-flawed" if args.flawed else "toy",
    )
    result = run_pipeline(config, out / "run")
    print(result.report)
    print(f"artifacts in {out / 'run'}")


if __name__ == "__main__":
    main()
