"""Synthetic snippet corpus with planted (AST type, position range) patterns.

Snippets are small, lexable C functions assembled token-by-token so a
planted token can be dropped at an exact position.  Marker call lexemes
(strcpy vs strncpy, etc.) correlate with the class label, which makes the
additive toy predictor non-trivially accurate, and planted insecure
literals carry their own marker weight so their attribution separates the
classes inside the planted cell.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, InvalidPlantSpec
from .lexing import AstTag, ClassLabel, Language, SourceSnippet
from .probing import PositionRange

HEADER = "int {name} ( char * buf , char * src ) {{"
HEADER_LEN = 13

FILLERS = [
    "dst = src ;".split(),
    "p = & buf ;".split(),
    "n = n + i ;".split(),
    "tmp = data ;".split(),
    "out = res ;".split(),
    "copy ( dst , src ) ;".split(),
    "q = p ;".split(),
    "cnt = cnt + n ;".split(),
]

INSECURE_CALL_MARKERS = {"strcpy": 1.6, "gets": 1.6, "sprintf": 1.2, "system": 1.2}
SECURE_CALL_MARKERS = {"strncpy": -1.6, "fgets": -1.2, "snprintf": -1.2}
INSECURE_LITERALS = {"1337": 0.15, "4096": 0.15, "65535": 0.15}
NEUTRAL_LITERALS = ["0", "1", "8", "16"]

INSECURE_CALL_STMTS = [
    "strcpy ( buf , src ) ;".split(),
    "gets ( buf ) ;".split(),
    "sprintf ( buf , src ) ;".split(),
    "system ( src ) ;".split(),
]
SECURE_CALL_STMTS = [
    "strncpy ( buf , src , n ) ;".split(),
    "fgets ( buf , n , fd ) ;".split(),
    "snprintf ( buf , n , src ) ;".split(),
]

DEFAULT_BIAS = -0.1


def default_markers() -> dict[str, float]:
    """Lexeme weights for the toy predictor matched to this generator."""
    markers = {}
    markers.update(INSECURE_CALL_MARKERS)
    markers.update(SECURE_CALL_MARKERS)
    markers.update(INSECURE_LITERALS)
    return markers


@dataclass(frozen=True)
class PlantSpec:
    tag: AstTag
    range: PositionRange
    target_class: ClassLabel
    plant_rate: float

    def __post_init__(self):
        if not 0.0 < self.plant_rate <= 1.0:
            raise InvalidPlantSpec(f"plant_rate must be in (0, 1], got {self.plant_rate}")
        if self.tag not in (AstTag.LITERAL, AstTag.TYPE, AstTag.KEYWORD):
            raise InvalidPlantSpec(f"unsupported plant tag {self.tag.value!r}")


def _plant_statement(tag: AstTag, label: ClassLabel, rng) -> tuple[list[str], int]:
    """Statement tokens plus the offset of the planted tag-typed token."""
    if tag is AstTag.LITERAL:
        if label is ClassLabel.INSECURE:
            lit = sorted(INSECURE_LITERALS)[rng.integers(len(INSECURE_LITERALS))]
        else:
            lit = NEUTRAL_LITERALS[rng.integers(len(NEUTRAL_LITERALS))]
        return ["len", "=", lit, ";"], 2
    if tag is AstTag.TYPE:
        return ["size_t", "sz", ";"], 0
    return ["if", "(", "n", ")", "{", "}"], 0  # keyword


@dataclass(frozen=True)
class _Event:
    start: int
    tokens: tuple[str, ...]


def _snippet_tokens(label: ClassLabel, rng, plant_specs, length: int) -> list[str]:
    events = []
    # planted tokens at exact in-range positions
    for spec in plant_specs:
        rate = spec.plant_rate if label == spec.target_class else spec.plant_rate / 4.0
        if rng.random() >= rate:
            continue
        stmt, offset = _plant_statement(spec.tag, label, rng)
        lo = max(spec.range.lo, HEADER_LEN + offset)
        hi = min(spec.range.hi, length - len(stmt) - 1 + offset)
        if hi < lo:
            hi = lo
            length = max(length, lo - offset + len(stmt) + 2)
        pos = int(rng.integers(lo, hi + 1))
        events.append(_Event(pos - offset, tuple(stmt)))
    # class-marker call, sometimes absent so the guard sees low-confidence items
    marker_rate = 0.7 if label is ClassLabel.INSECURE else 0.85
    if rng.random() < marker_rate:
        pool = INSECURE_CALL_STMTS if label is ClassLabel.INSECURE else SECURE_CALL_STMTS
        stmt = pool[rng.integers(len(pool))]
        start = int(rng.integers(HEADER_LEN, max(HEADER_LEN + 1, length - len(stmt) - 1)))
        events.append(_Event(start, tuple(stmt)))
    # class-neutral background literal in later positions, so off-range literal
    # cells carry balanced data without diluting planted ranges
    bg_lo = max(HEADER_LEN, 50)
    if rng.random() < 0.35 and length - 6 > bg_lo:
        lit = NEUTRAL_LITERALS[rng.integers(len(NEUTRAL_LITERALS))]
        stmt = ("len", "=", lit, ";")
        start = int(rng.integers(bg_lo, length - 5))
        events.append(_Event(start, stmt))

    name = f"fn_{label.value}"
    tokens = HEADER.format(name=name).split()
    fillers = sorted(FILLERS, key=len)
    for event in sorted(events, key=lambda e: e.start):
        start = max(event.start, len(tokens))  # overlapping events shift right
        while len(tokens) < start:
            gap = start - len(tokens)
            usable = [f for f in fillers if len(f) <= gap]
            if not usable:
                tokens.append(";")
                continue
            tokens.extend(usable[int(rng.integers(len(usable)))])
        tokens.extend(event.tokens)
    while len(tokens) < length - 1:
        gap = length - 1 - len(tokens)
        usable = [f for f in fillers if len(f) <= gap]
        if not usable:
            tokens.append(";")
            continue
        tokens.extend(usable[int(rng.integers(len(usable)))])
    tokens.append("}")
    return tokens


def _render(tokens: list[str]) -> str:
    parts = []
    for tok in tokens:
        parts.append(tok)
        parts.append("\n" if tok in (";", "{", "}") else " ")
    return "".join(parts).rstrip() + "\n"


def generate_snippets(n_per_class: int, plant_specs: list[PlantSpec], seed: int,
                      min_len: int = 40, max_len: int = 140) -> list[SourceSnippet]:
    """Deterministic corpus of n_per_class snippets per class, C syntax."""
    if n_per_class < 1:
        raise InvalidPlantSpec(f"n_per_class must be >= 1, got {n_per_class}")
    snippets = []
    for class_code, label in enumerate((ClassLabel.SECURE, ClassLabel.INSECURE)):
        for i in range(n_per_class):
            rng = np.random.default_rng([seed, class_code, i])
            length = int(rng.integers(min_len, max_len + 1))
            tokens = _snippet_tokens(label, rng, plant_specs, length)
            snippets.append(SourceSnippet(
                id=f"{label.value}-{i:05d}",
                language=Language.C,
                text=_render(tokens),
                label=label,
            ))
    return snippets


# ---------------------------------------------------------------------------
# corpus directory layout: one source file per snippet plus a manifest

def write_corpus(snippets: list[SourceSnippet], corpus_dir) -> None:
    corpus_dir = Path(corpus_dir)
    corpus_dir.mkdir(parents=True, exist_ok=True)
    ext = {"c": "c", "java": "java"}
    lines = []
    for snippet in snippets:
        filename = f"{snippet.id}.{ext[snippet.language.value]}"
        (corpus_dir / filename).write_text(snippet.text, encoding="utf-8")
        label = snippet.label.value if snippet.label else ""
        lines.append(f"{snippet.id}\t{snippet.language.value}\t{label}\t{filename}")
    (corpus_dir / "manifest.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_corpus(corpus_dir) -> list[SourceSnippet]:
    corpus_dir = Path(corpus_dir)
    manifest = corpus_dir / "manifest.tsv"
    if not manifest.exists():
        raise DataError(f"no manifest.tsv in {corpus_dir}")
    snippets = []
    for line in manifest.read_text(encoding="utf-8").splitlines():
        if not line:
            continue
        snippet_id, language, label, filename = line.split("\t")
        snippets.append(SourceSnippet(
            id=snippet_id,
            language=Language(language),
            text=(corpus_dir / filename).read_text(encoding="utf-8"),
            label=ClassLabel(label) if label else None,
        ))
    return snippets


def generate_synthetic_corpus(n_per_class: int, plant_specs: list[PlantSpec],
                              seed: int, corpus_dir) -> list[SourceSnippet]:
    snippets = generate_snippets(n_per_class, plant_specs, seed)
    write_corpus(snippets, corpus_dir)
    return snippets
