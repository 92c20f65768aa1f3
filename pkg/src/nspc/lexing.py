"""Concrete-syntax tokenization and AST-type tagging for C and Java snippets.

The lexer emits leaf tokens with tree-sitter-style node kinds (named kinds
such as ``number_literal`` plus anonymous kinds that are the lexeme itself,
e.g. ``;``).  A per-language taxonomy map, shipped as an editable TSV data
file, collapses node kinds into the coarse AST-type enumeration used by the
rest of the pipeline.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from enum import Enum
from importlib import resources
from typing import Optional

from .errors import ConfigError, LengthMismatch, UnlexableInput


class Language(str, Enum):
    C = "c"
    JAVA = "java"


class ClassLabel(str, Enum):
    SECURE = "secure"
    INSECURE = "insecure"


class AstTag(str, Enum):
    PUNCTUATION = "punctuation"
    OPERATOR = "operator"
    LITERAL = "literal"
    TYPE = "type"
    PRIMITIVE = "primitive"
    IDENTIFIER = "identifier"
    KEYWORD = "keyword"
    COMMENT = "comment"
    OTHER = "other"


@dataclass(frozen=True)
class SourceSnippet:
    id: str
    language: Language
    text: str
    label: Optional[ClassLabel] = None

    def __post_init__(self):
        if not self.text:
            raise ValueError(f"snippet {self.id!r} has empty text")


@dataclass(frozen=True)
class AlignedToken:
    position: int
    lexeme: str
    tag: Optional[AstTag]
    byte_span: tuple[int, int]


# ---------------------------------------------------------------------------
# word classification tables

C_PRIMITIVES = frozenset(
    "void char short int long float double signed unsigned bool _Bool".split()
)
C_KEYWORDS = frozenset(
    "if else for while do return switch case default break continue goto "
    "struct union enum typedef static const extern volatile register inline "
    "sizeof auto restrict".split()
)
C_TYPE_WORDS = frozenset("FILE DIR va_list".split())

JAVA_PRIMITIVES = frozenset(
    "boolean byte char short int long float double void".split()
)
JAVA_KEYWORDS = frozenset(
    "abstract assert break case catch class const continue default do else "
    "enum extends final finally for goto if implements import instanceof "
    "interface native new package private protected public return static "
    "strictfp super switch synchronized this throw throws transient try "
    "volatile while var".split()
)

_SYMBOLS = [
    "<<=", ">>=", ">>>", "...",
    "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "::",
    "+", "-", "*", "/", "%", "=", "<", ">", "!", "&", "|", "^", "~", "?", "@",
    ";", ",", "(", ")", "{", "}", "[", "]", ".", ":",
]

_TOKEN_RE = re.compile(
    r"(?P<comment>//[^\n]*|/\*.*?\*/)"
    r"|(?P<string_literal>\"(?:\\.|[^\"\\\n])*\")"
    r"|(?P<char_literal>'(?:\\.|[^'\\\n])*')"
    r"|(?P<number_literal>0[xX][0-9a-fA-F]+[uUlL]*"
    r"|\d+\.\d*(?:[eE][+-]?\d+)?[fFlL]?"
    r"|\.\d+(?:[eE][+-]?\d+)?[fFlL]?"
    r"|\d+(?:[eE][+-]?\d+)?[uUlLfF]*)"
    r"|(?P<word>[A-Za-z_$][A-Za-z0-9_$]*)"
    r"|(?P<symbol>" + "|".join(re.escape(s) for s in _SYMBOLS) + r")"
    r"|(?P<stray>\S)",
    re.DOTALL,
)

_C_TYPE_RE = re.compile(r"[A-Za-z_]\w*_t$")


def _classify_word(word: str, language: Language) -> str:
    if language is Language.C:
        if word in C_PRIMITIVES:
            return "primitive_type"
        if word in C_KEYWORDS:
            return word
        if word in ("true", "false"):
            return word
        if word == "NULL":
            return "null"
        if word in C_TYPE_WORDS or _C_TYPE_RE.match(word):
            return "type_identifier"
        return "identifier"
    if word in JAVA_PRIMITIVES:
        return "primitive_type"
    if word in JAVA_KEYWORDS:
        return word
    if word in ("true", "false"):
        return word
    if word == "null":
        return "null"
    if word[0].isupper():
        return "type_identifier"
    return "identifier"


def known_kinds(language: Language) -> frozenset[str]:
    """All node kinds the lexer can emit for a language (the grammar manifest)."""
    named = {
        "comment", "string_literal", "char_literal", "number_literal",
        "identifier", "type_identifier", "primitive_type", "null",
        "true", "false",
    }
    keywords = C_KEYWORDS if language is Language.C else JAVA_KEYWORDS
    return frozenset(named | set(keywords) | set(_SYMBOLS))


@dataclass(frozen=True)
class LexedToken:
    kind: str
    lexeme: str
    char_span: tuple[int, int]


def lex(snippet: SourceSnippet) -> list[LexedToken]:
    """Scan the snippet into kind-labelled leaf tokens, whitespace dropped."""
    out = []
    for m in _TOKEN_RE.finditer(snippet.text):
        kind = m.lastgroup
        lexeme = m.group()
        if kind == "word":
            kind = _classify_word(lexeme, snippet.language)
        elif kind in ("symbol", "stray"):
            kind = lexeme
        out.append(LexedToken(kind, lexeme, (m.start(), m.end())))
    if not out:
        raise UnlexableInput(f"snippet {snippet.id!r} produced zero tokens")
    return out


def _char_spans_to_bytes(text: str, tokens: list[LexedToken]) -> list[tuple[int, int]]:
    # single pass so non-ASCII text stays O(n)
    spans = []
    char_pos = 0
    byte_pos = 0
    for tok in tokens:
        s, e = tok.char_span
        byte_pos += len(text[char_pos:s].encode("utf-8"))
        start = byte_pos
        byte_pos += len(text[s:e].encode("utf-8"))
        spans.append((start, byte_pos))
        char_pos = e
    return spans


def tokenize(snippet: SourceSnippet, max_tokens: int = 500) -> list[AlignedToken]:
    """Leaf tokens in source order, truncated to max_tokens; tags unset."""
    if max_tokens < 1:
        raise ConfigError(f"max_tokens must be >= 1, got {max_tokens}")
    lexed = lex(snippet)[:max_tokens]
    spans = _char_spans_to_bytes(snippet.text, lexed)
    return [
        AlignedToken(position=i, lexeme=t.lexeme, tag=None, byte_span=spans[i])
        for i, t in enumerate(lexed)
    ]


def node_kinds(snippet: SourceSnippet, max_tokens: int = 500) -> list[str]:
    """Node kinds position-aligned with tokenize() output."""
    return [t.kind for t in lex(snippet)[:max_tokens]]


# ---------------------------------------------------------------------------
# taxonomy map

def load_taxonomy(path) -> dict[str, AstTag]:
    """Parse a node_kind<TAB>ast_tag map; unknown tags are rejected."""
    taxonomy = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            try:
                kind, tag = line.split("\t")
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: expected node_kind<TAB>ast_tag")
            try:
                taxonomy[kind] = AstTag(tag)
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: unknown ast_tag {tag!r}")
    return taxonomy


def default_taxonomy(language: Language) -> dict[str, AstTag]:
    name = f"taxonomy_{language.value}.tsv"
    with resources.as_file(resources.files("nspc.data").joinpath(name)) as path:
        return load_taxonomy(path)


def align(
    tokens: list[AlignedToken],
    kinds: list[str],
    taxonomy: dict[str, AstTag],
) -> list[AlignedToken]:
    """Set each token's AST-type tag from its node kind; unknown kinds -> other."""
    if len(tokens) != len(kinds):
        raise LengthMismatch(f"{len(tokens)} tokens vs {len(kinds)} node kinds")
    return [
        replace(tok, tag=taxonomy.get(kind, AstTag.OTHER))
        for tok, kind in zip(tokens, kinds)
    ]


def tokenize_and_align(
    snippet: SourceSnippet,
    max_tokens: int = 500,
    taxonomy: Optional[dict[str, AstTag]] = None,
) -> list[AlignedToken]:
    if taxonomy is None:
        taxonomy = default_taxonomy(snippet.language)
    return align(tokenize(snippet, max_tokens), node_kinds(snippet, max_tokens), taxonomy)
