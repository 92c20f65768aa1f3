"""Per-class attribution tensors: build, merge, persist, load.

File format is JSONL: the first line is a provenance object, every
following line one row with fields ``snippet_id, i, w, phi, mu, class``.
Floats survive the round trip bit-exactly (shortest-repr encoding).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

from .attribution import ShapVector
from .errors import DataError, LengthMismatch, MissingLabel, ProvenanceMismatch
from .lexing import AlignedToken, AstTag, ClassLabel, SourceSnippet


@dataclass(frozen=True)
class Provenance:
    predictor: str
    seed: int
    method: str
    mask_sentinel: str
    corpus_hash: str

    def __post_init__(self):
        for name in ("predictor", "method", "mask_sentinel", "corpus_hash"):
            if not getattr(self, name):
                raise DataError(f"provenance field {name!r} must be non-empty")


@dataclass(frozen=True)
class ShapTensorRow:
    snippet_id: str
    position: int
    lexeme: str
    phi: float
    tag: AstTag
    class_label: ClassLabel


@dataclass(frozen=True)
class ClassTensor:
    class_label: ClassLabel
    rows: tuple[ShapTensorRow, ...]
    provenance: Provenance


def build_tensors(
    snippets: list[SourceSnippet],
    aligned: dict[str, list[AlignedToken]],
    shap_vectors: dict[str, ShapVector],
    provenance: Provenance,
) -> tuple[ClassTensor, ClassTensor]:
    """One row per (snippet, token), routed by the snippet's ground-truth label.

    Returns (secure, insecure) tensors.
    """
    per_class: dict[ClassLabel, list[ShapTensorRow]] = {
        ClassLabel.SECURE: [], ClassLabel.INSECURE: [],
    }
    for snippet in snippets:
        if snippet.label is None:
            raise MissingLabel(f"snippet {snippet.id!r} has no ground-truth label")
        tokens = aligned[snippet.id]
        phis = shap_vectors[snippet.id].phis
        if len(tokens) != len(phis):
            raise LengthMismatch(
                f"snippet {snippet.id!r}: {len(tokens)} tokens vs {len(phis)} phis"
            )
        rows = per_class[snippet.label]
        for tok, phi in zip(tokens, phis):
            rows.append(ShapTensorRow(
                snippet_id=snippet.id, position=tok.position, lexeme=tok.lexeme,
                phi=float(phi), tag=tok.tag, class_label=snippet.label,
            ))
    return (
        ClassTensor(ClassLabel.SECURE, tuple(per_class[ClassLabel.SECURE]), provenance),
        ClassTensor(ClassLabel.INSECURE, tuple(per_class[ClassLabel.INSECURE]), provenance),
    )


def merge_tensors(a: ClassTensor, b: ClassTensor) -> list[ShapTensorRow]:
    """Multiset union of two class tensors' rows, labels retained."""
    if a.class_label == b.class_label:
        raise ProvenanceMismatch("cannot merge tensors of the same class")
    for field in ("predictor", "mask_sentinel"):
        if getattr(a.provenance, field) != getattr(b.provenance, field):
            raise ProvenanceMismatch(
                f"provenance {field} differs: "
                f"{getattr(a.provenance, field)!r} vs {getattr(b.provenance, field)!r}"
            )
    return list(a.rows) + list(b.rows)


def group_by_tag(rows: list[ShapTensorRow]) -> dict[AstTag, list[ShapTensorRow]]:
    groups: dict[AstTag, list[ShapTensorRow]] = {}
    for row in rows:
        groups.setdefault(row.tag, []).append(row)
    return groups


def persist_tensor(tensor: ClassTensor, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        header = {"provenance": asdict(tensor.provenance), "class": tensor.class_label.value}
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for row in tensor.rows:
            fh.write(json.dumps({
                "snippet_id": row.snippet_id, "i": row.position, "w": row.lexeme,
                "phi": row.phi, "mu": row.tag.value, "class": row.class_label.value,
            }, sort_keys=True) + "\n")


def load_tensor(path) -> ClassTensor:
    with open(path, encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line:
            raise DataError(f"{path}: empty tensor file")
        header = json.loads(header_line)
        try:
            provenance = Provenance(**header["provenance"])
            class_label = ClassLabel(header["class"])
        except (KeyError, TypeError) as exc:
            raise DataError(f"{path}: malformed provenance header") from exc
        rows = []
        for line in fh:
            d = json.loads(line)
            row = ShapTensorRow(
                snippet_id=d["snippet_id"], position=d["i"], lexeme=d["w"],
                phi=d["phi"], tag=AstTag(d["mu"]), class_label=ClassLabel(d["class"]),
            )
            if row.class_label != class_label:
                raise DataError(f"{path}: row class {row.class_label} != tensor class")
            rows.append(row)
    return ClassTensor(class_label, tuple(rows), provenance)
