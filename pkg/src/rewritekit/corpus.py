"""Sentence and parallel-pair data model plus corpus file I/O.

Tokenization detaches common punctuation from word edges and then splits on
whitespace. The rule is deliberately simple so that token sequences are
stable under re-tokenization and easy to check by hand in tests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

# Punctuation detached from the start/end of whitespace-separated chunks.
_DETACH = set('.,!?;:"()')

FORMATS = ("tsv", "jsonl")


class CorpusFormatError(ValueError):
    """Raised when a corpus file cannot be parsed."""


@dataclass(frozen=True, eq=False)
class Sentence:
    """A tokenized sentence; ``raw`` preserves the original surface text.

    Equality and hashing are token-level: two sentences are equal when their
    token sequences are equal, regardless of surface spacing.
    """

    raw: str
    tokens: tuple[str, ...]

    @classmethod
    def from_tokens(cls, tokens: Iterable[str]) -> "Sentence":
        toks = tuple(tokens)
        return cls(" ".join(toks), toks)

    @property
    def text(self) -> str:
        """Normalized form: tokens joined by single spaces."""
        return " ".join(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def __bool__(self) -> bool:
        return bool(self.tokens)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Sentence) and self.tokens == other.tokens

    def __hash__(self) -> int:
        return hash(self.tokens)

    def __repr__(self) -> str:
        return f"Sentence({self.text!r})"


def tokenize(raw: str) -> Sentence:
    """Split ``raw`` into tokens, detaching punctuation from word edges.

    Deterministic and idempotent: tokenizing the normalized text of any
    Sentence reproduces the same tokens. Empty input yields an empty
    Sentence. No case folding is applied (rewriting edits are
    case-sensitive).
    """
    tokens: list[str] = []
    for chunk in raw.split():
        head: list[str] = []
        while chunk and chunk[0] in _DETACH:
            head.append(chunk[0])
            chunk = chunk[1:]
        tail: list[str] = []
        while chunk and chunk[-1] in _DETACH:
            tail.append(chunk[-1])
            chunk = chunk[:-1]
        tokens.extend(head)
        if chunk:
            tokens.append(chunk)
        tokens.extend(reversed(tail))
    return Sentence(raw, tuple(tokens))


@dataclass(frozen=True)
class Origin:
    """Provenance tag for a pair: gold, augmented:<method>, or task:<name>."""

    kind: str
    name: str = ""

    def __post_init__(self) -> None:
        if self.kind not in ("gold", "augmented", "task"):
            raise ValueError(f"unknown origin kind: {self.kind!r}")
        if self.kind == "gold" and self.name:
            raise ValueError("gold origin carries no name")
        if self.kind != "gold" and not self.name:
            raise ValueError(f"{self.kind} origin requires a name")

    @classmethod
    def gold(cls) -> "Origin":
        return cls("gold")

    @classmethod
    def augmented(cls, method: str) -> "Origin":
        return cls("augmented", method)

    @classmethod
    def task(cls, name: str) -> "Origin":
        return cls("task", name)

    @classmethod
    def parse(cls, text: str) -> "Origin":
        if text == "gold":
            return cls("gold")
        kind, sep, name = text.partition(":")
        if not sep:
            raise ValueError(f"malformed origin tag: {text!r}")
        return cls(kind, name)

    def __str__(self) -> str:
        return self.kind if self.kind == "gold" else f"{self.kind}:{self.name}"


@dataclass(frozen=True)
class ParallelPair:
    """A source/target sentence pair with provenance and a sampling weight."""

    source: Sentence
    target: Sentence
    origin: Origin = Origin.gold()
    weight: float = 1.0

    def __post_init__(self) -> None:
        if self.weight < 0:
            raise ValueError(f"pair weight must be >= 0, got {self.weight}")

    def with_origin(self, origin: Origin) -> "ParallelPair":
        return ParallelPair(self.source, self.target, origin, self.weight)

    def with_weight(self, weight: float) -> "ParallelPair":
        return ParallelPair(self.source, self.target, self.origin, weight)


@dataclass
class Corpus:
    """An ordered collection of parallel pairs. Iteration order is insertion order."""

    pairs: list[ParallelPair] = field(default_factory=list)
    id: str = field(default="", compare=False)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[ParallelPair]:
        return iter(self.pairs)

    def __getitem__(self, idx: int) -> ParallelPair:
        return self.pairs[idx]

    def append(self, pair: ParallelPair) -> None:
        self.pairs.append(pair)

    def extend(self, pairs: Iterable[ParallelPair]) -> None:
        self.pairs.extend(pairs)

    def sources(self) -> list[Sentence]:
        return [p.source for p in self.pairs]

    def targets(self) -> list[Sentence]:
        return [p.target for p in self.pairs]


def _format_for(path: str | Path, format: str | None) -> str:
    if format is not None:
        if format not in FORMATS:
            raise ValueError(f"unknown corpus format: {format!r} (expected one of {FORMATS})")
        return format
    suffix = Path(path).suffix.lower()
    return "jsonl" if suffix == ".jsonl" else "tsv"


def write_corpus(corpus: Corpus, path: str | Path, format: str | None = None) -> None:
    """Write a corpus as TSV (``source\\ttarget\\torigin\\tweight``) or JSONL."""
    fmt = _format_for(path, format)
    with open(path, "w", encoding="utf-8") as fh:
        for pair in corpus:
            if fmt == "tsv":
                fh.write(
                    f"{pair.source.text}\t{pair.target.text}\t{pair.origin}\t{pair.weight!r}\n"
                )
            else:
                fh.write(
                    json.dumps(
                        {
                            "source": pair.source.text,
                            "target": pair.target.text,
                            "origin": str(pair.origin),
                            "weight": pair.weight,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )


def read_corpus(path: str | Path, format: str | None = None) -> Corpus:
    """Read a corpus file; malformed lines raise errors naming the line number."""
    fmt = _format_for(path, format)
    pairs: list[ParallelPair] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if fmt == "tsv":
                pairs.append(_parse_tsv_line(path, lineno, line))
            else:
                pairs.append(_parse_jsonl_line(path, lineno, line))
    return Corpus(pairs, id=Path(path).stem)


def _parse_tsv_line(path: str | Path, lineno: int, line: str) -> ParallelPair:
    fields = line.split("\t")
    if not 2 <= len(fields) <= 4:
        raise CorpusFormatError(
            f"{path}:{lineno}: expected 2-4 tab-separated fields, got {len(fields)}"
        )
    source, target = tokenize(fields[0]), tokenize(fields[1])
    origin = Origin.gold()
    weight = 1.0
    if len(fields) >= 3 and fields[2]:
        try:
            origin = Origin.parse(fields[2])
        except ValueError as exc:
            raise CorpusFormatError(f"{path}:{lineno}: {exc}") from exc
    if len(fields) == 4 and fields[3]:
        try:
            weight = float(fields[3])
        except ValueError as exc:
            raise CorpusFormatError(
                f"{path}:{lineno}: malformed weight {fields[3]!r}"
            ) from exc
    try:
        return ParallelPair(source, target, origin, weight)
    except ValueError as exc:
        raise CorpusFormatError(f"{path}:{lineno}: {exc}") from exc


def _parse_jsonl_line(path: str | Path, lineno: int, line: str) -> ParallelPair:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorpusFormatError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise CorpusFormatError(f"{path}:{lineno}: expected a JSON object")
    for required in ("source", "target"):
        if required not in obj:
            raise CorpusFormatError(f"{path}:{lineno}: missing field {required!r}")
    try:
        return ParallelPair(
            tokenize(str(obj["source"])),
            tokenize(str(obj["target"])),
            Origin.parse(str(obj.get("origin", "gold"))),
            float(obj.get("weight", 1.0)),
        )
    except ValueError as exc:
        raise CorpusFormatError(f"{path}:{lineno}: {exc}") from exc


def read_sentences(path: str | Path) -> list[Sentence]:
    """Read a plain text file, one sentence per line (blank lines are kept empty)."""
    with open(path, "r", encoding="utf-8") as fh:
        return [tokenize(line.rstrip("\n")) for line in fh]


def write_sentences(sentences: Iterable[Sentence], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in sentences:
            fh.write(s.text + "\n")
