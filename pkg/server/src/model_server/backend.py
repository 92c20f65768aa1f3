"""Model loading and masked inference.

The default backend builds a small randomly-initialized BERT sequence
classifier from a pinned seed: a real transformer inference path with nothing
to download, suitable for protocol and integration testing.  Point
``model_id`` at a local Hugging Face checkpoint directory to serve a
genuinely fine-tuned model instead.

Masking convention: each masked lexeme is replaced by the tokenizer's mask
token *before* subword tokenization (one mask token per masked lexeme).
Lexemes equal to the request's ``mask_token`` sentinel are treated the same
way, so a pre-masked token list with an all-ones mask is equivalent to
masking server-side.
"""

from __future__ import annotations

import string
import tempfile
import threading
from pathlib import Path

import torch

from .config import BUILTIN_MODEL_ID, ServerConfig

_CODE_WORDS = [
    "int", "char", "void", "if", "else", "for", "while", "return", "sizeof",
    "strcpy", "strncpy", "strcat", "sprintf", "snprintf", "gets", "fgets",
    "system", "malloc", "free", "memcpy", "buf", "src", "dst", "len", "size",
    "size_t", "NULL", "struct", "static", "const",
]


def _builtin_vocab() -> list[str]:
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    vocab += _CODE_WORDS
    chars = [c for c in string.printable if not c.isspace()]
    vocab += chars
    vocab += ["##" + c for c in chars]
    return vocab


def _build_builtin(seed: int):
    from transformers import BertConfig, BertForSequenceClassification, BertTokenizer

    vocab = _builtin_vocab()
    with tempfile.TemporaryDirectory() as tmp:
        vocab_file = Path(tmp) / "vocab.txt"
        vocab_file.write_text("\n".join(vocab) + "\n", encoding="utf-8")
        tokenizer = BertTokenizer(str(vocab_file), do_lower_case=False)

    torch.manual_seed(seed)
    config = BertConfig(
        vocab_size=len(vocab), hidden_size=64, num_hidden_layers=2,
        num_attention_heads=4, intermediate_size=128,
        max_position_embeddings=2048, num_labels=2,
    )
    model = BertForSequenceClassification(config)
    return tokenizer, model


def _load_checkpoint(model_id: str):
    from transformers import AutoModelForSequenceClassification, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(model_id)
    model = AutoModelForSequenceClassification.from_pretrained(model_id)
    return tokenizer, model


class TransformerBackend:
    """Serialized, deterministic masked inference over one model."""

    def __init__(self, config: ServerConfig):
        self.config = config
        self._tokenizer = None
        self._model = None
        self._lock = threading.Lock()

    @property
    def loaded(self) -> bool:
        return self._model is not None

    @property
    def name(self) -> str:
        return self.config.model_id

    def load(self) -> None:
        if self.config.model_id == BUILTIN_MODEL_ID:
            tokenizer, model = _build_builtin(self.config.seed)
        else:
            tokenizer, model = _load_checkpoint(self.config.model_id)
        context = getattr(model.config, "max_position_embeddings", None)
        if context is not None and self.config.max_tokens > context:
            raise ValueError(
                f"max_tokens {self.config.max_tokens} exceeds model context "
                f"length {context}")
        model.to(self.config.device)
        model.eval()
        self._tokenizer, self._model = tokenizer, model

    def _mask_lexemes(self, tokens: list[str], mask: list[int],
                      mask_token: str) -> str:
        sentinel = self._tokenizer.mask_token
        pieces = [
            sentinel if (not keep or lexeme == mask_token) else lexeme
            for lexeme, keep in zip(tokens, mask)
        ]
        return " ".join(pieces)

    def predict_batch(self, requests: list[tuple[list[str], list[int], str]]
                      ) -> list[float]:
        texts = [self._mask_lexemes(tokens, mask, mask_token)
                 for tokens, mask, mask_token in requests]
        context = getattr(self._model.config, "max_position_embeddings", 512)
        with self._lock, torch.no_grad():
            probs = []
            # one sequence at a time: padding-free, so batch composition can
            # never perturb an individual result
            for text in texts:
                enc = self._tokenizer(text, return_tensors="pt",
                                      truncation=True, max_length=context)
                enc = {k: v.to(self.config.device) for k, v in enc.items()}
                logits = self._model(**enc).logits[0]
                probs.append(float(torch.softmax(logits, dim=-1)[1]))
        return probs

    def predict_one(self, tokens: list[str], mask: list[int],
                    mask_token: str) -> float:
        return self.predict_batch([(tokens, mask, mask_token)])[0]
