"""``nspc-model-server`` entry point."""

from __future__ import annotations

import argparse

import uvicorn

from .app import create_app
from .config import BUILTIN_MODEL_ID, ServerConfig


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nspc-model-server",
        description="Serve a transformer code classifier behind the nspc "
                    "predictor wire protocol.",
    )
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8230)
    parser.add_argument("--model-id", default=BUILTIN_MODEL_ID,
                        help="builtin-tiny or a local checkpoint directory")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--max-tokens", type=int, default=500)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--non-deterministic", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = ServerConfig(
        model_id=args.model_id, device=args.device,
        max_tokens=args.max_tokens, seed=args.seed,
        deterministic=not args.non_deterministic,
    )
    app = create_app(config)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
