"""Byte-pair-encoding subword segmentation: greedy merge learning and application.

Non-final pieces of a segmented word carry the ``@@`` continuation marker, so
joining pieces and stripping markers reconstructs the original tokens exactly.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .corpus import Corpus, Sentence

MARKER = "@@"


@dataclass(frozen=True)
class BpeModel:
    """An ordered list of learned symbol-pair merges plus the piece marker."""

    merges: tuple[tuple[str, str], ...]
    vocab_size_target: int = 0
    marker: str = MARKER


def word_frequencies(corpus: Corpus) -> Counter:
    """Token frequency table over both sides of a corpus (shared vocabulary)."""
    counts: Counter = Counter()
    for pair in corpus:
        counts.update(pair.source.tokens)
        counts.update(pair.target.tokens)
    return counts


def learn_bpe(corpus: Corpus, num_merges: int) -> BpeModel:
    """Learn up to ``num_merges`` merges by greedy most-frequent-pair counting."""
    return learn_bpe_from_counts(word_frequencies(corpus), num_merges)


def learn_bpe_from_counts(
    word_counts: Mapping[str, int], num_merges: int, marker: str = MARKER
) -> BpeModel:
    """Greedy BPE over a word frequency table.

    At each step the most frequent adjacent symbol pair is merged; ties are
    broken by taking the lexicographically smallest pair, which makes the
    learned merge list deterministic. Stops early once no adjacent pairs
    remain, so the result has ``min(num_merges, available pairs)`` merges.
    """
    if num_merges < 0:
        raise ValueError(f"num_merges must be >= 0, got {num_merges}")
    words: dict[tuple[str, ...], int] = {}
    for word, count in word_counts.items():
        if word:
            key = tuple(word)
            words[key] = words.get(key, 0) + count
    merges: list[tuple[str, str]] = []
    for _ in range(num_merges):
        pair_counts: Counter = Counter()
        for symbols, count in words.items():
            for left, right in zip(symbols, symbols[1:]):
                pair_counts[(left, right)] += count
        if not pair_counts:
            break
        best = min(pair_counts, key=lambda p: (-pair_counts[p], p))
        merges.append(best)
        merged: dict[tuple[str, ...], int] = {}
        for symbols, count in words.items():
            key = _merge_symbols(symbols, best)
            merged[key] = merged.get(key, 0) + count
        words = merged
    return BpeModel(tuple(merges), vocab_size_target=num_merges, marker=marker)


def _merge_symbols(symbols: tuple[str, ...], pair: tuple[str, str]) -> tuple[str, ...]:
    left, right = pair
    out: list[str] = []
    i = 0
    while i < len(symbols):
        if i + 1 < len(symbols) and symbols[i] == left and symbols[i + 1] == right:
            out.append(left + right)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return tuple(out)


def segment_word(model: BpeModel, word: str) -> list[str]:
    """Split one word into subword pieces (no markers attached)."""
    symbols = tuple(word)
    for pair in model.merges:
        if len(symbols) == 1:
            break
        symbols = _merge_symbols(symbols, pair)
    return list(symbols)


def apply_bpe(model: BpeModel, sentence: Sentence) -> Sentence:
    """Segment every token; non-final pieces get the continuation marker."""
    pieces: list[str] = []
    for token in sentence.tokens:
        segs = segment_word(model, token)
        pieces.extend(seg + model.marker for seg in segs[:-1])
        if segs:
            pieces.append(segs[-1])
    return Sentence(sentence.raw, tuple(pieces))


def undo_bpe(model: BpeModel, sentence: Sentence) -> Sentence:
    """Rejoin subword pieces into whole tokens (inverse of apply_bpe)."""
    marker = model.marker
    tokens: list[str] = []
    buffer = ""
    for piece in sentence.tokens:
        if piece.endswith(marker):
            buffer += piece[: -len(marker)]
        else:
            tokens.append(buffer + piece)
            buffer = ""
    if buffer:
        tokens.append(buffer)
    return Sentence(sentence.raw, tuple(tokens))


def save_bpe(model: BpeModel, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("#bpe v1\n")
        for left, right in model.merges:
            fh.write(f"{left} {right}\n")


def load_bpe(path: str | Path) -> BpeModel:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != "#bpe v1":
            raise ValueError(f"{path}: not a BPE model file (bad header {header!r})")
        merges: list[tuple[str, str]] = []
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(" ")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'left right' merge entry")
            merges.append((parts[0], parts[1]))
    return BpeModel(tuple(merges), vocab_size_target=len(merges))


def segment_corpus(model: BpeModel, sentences: Iterable[Sentence]) -> list[Sentence]:
    return [apply_bpe(model, s) for s in sentences]
