"""Server configuration."""

from __future__ import annotations

from dataclasses import dataclass

BUILTIN_MODEL_ID = "builtin-tiny"


@dataclass(frozen=True)
class ServerConfig:
    """What to serve and how.

    ``model_id`` is either the sentinel ``builtin-tiny`` (a small seeded
    transformer built in-process, no weights to fetch) or a local directory
    containing a Hugging Face sequence-classification checkpoint.
    """

    model_id: str = BUILTIN_MODEL_ID
    device: str = "cpu"
    max_tokens: int = 500
    deterministic: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")
