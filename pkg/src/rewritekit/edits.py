"""Token-level edit extraction between parallel sentences.

The O(n*m) DP table fill is the hot loop of rule learning and edit-based
scoring, so it lives in a compiled kernel (``_levkernel``) with a
pure-Python twin (``_levkernel_py``) selected at import time. Set
``REWRITEKIT_PURE=1`` to force the fallback.

Backtrace ties are resolved deterministically, preferring (in this order)
match, substitute, delete, insert, walking back from the sentence ends.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Sequence

if os.environ.get("REWRITEKIT_PURE") == "1":
    from . import _levkernel_py as _kernel

    COMPILED_KERNEL = False
else:
    try:
        from . import _levkernel as _kernel  # type: ignore[attr-defined]

        COMPILED_KERNEL = True
    except ImportError:
        from . import _levkernel_py as _kernel

        COMPILED_KERNEL = False

from .corpus import Sentence

INSERT = "insert"
DELETE = "delete"
SUBSTITUTE = "substitute"

# Bound on enumerated cost-equivalent decompositions (see all_decompositions).
DEFAULT_DECOMP_CAP = 64


@dataclass(frozen=True)
class EditOp:
    """A contiguous source-span rewrite.

    ``start``/``end`` index the source token sequence (half-open). Inserts
    have an empty span (start == end), deletes an empty target.
    """

    kind: str
    start: int
    end: int
    source: tuple[str, ...]
    target: tuple[str, ...]

    @classmethod
    def make(
        cls, start: int, end: int, source: Sequence[str], target: Sequence[str]
    ) -> "EditOp":
        src, tgt = tuple(source), tuple(target)
        if len(src) != end - start:
            raise ValueError(f"span [{start},{end}) does not cover {len(src)} source tokens")
        if start == end:
            kind = INSERT
        elif not tgt:
            kind = DELETE
        else:
            kind = SUBSTITUTE
        return cls(kind, start, end, src, tgt)


def _encode(a: Sequence[str], b: Sequence[str]) -> tuple[list[int], list[int]]:
    ids: dict[str, int] = {}
    enc_a = [ids.setdefault(t, len(ids)) for t in a]
    enc_b = [ids.setdefault(t, len(ids)) for t in b]
    return enc_a, enc_b


def levenshtein(a: Sequence[str], b: Sequence[str]) -> int:
    """Unit-cost token edit distance."""
    ea, eb = _encode(a, b)
    dp = _kernel.dp_table(ea, eb)
    return dp[len(a) * (len(b) + 1) + len(b)]


def atomic_edits(source: Sentence, target: Sentence) -> list[EditOp]:
    """One minimal-cost edit script as single-token ops; length == edit distance."""
    a, b = source.tokens, target.tokens
    ea, eb = _encode(a, b)
    dp = _kernel.dp_table(ea, eb)
    width = len(b) + 1
    i, j = len(a), len(b)
    ops: list[EditOp] = []
    while i > 0 or j > 0:
        cur = dp[i * width + j]
        if i > 0 and j > 0 and a[i - 1] == b[j - 1] and dp[(i - 1) * width + j - 1] == cur:
            i -= 1
            j -= 1
        elif i > 0 and j > 0 and a[i - 1] != b[j - 1] and dp[(i - 1) * width + j - 1] + 1 == cur:
            ops.append(EditOp.make(i - 1, i, (a[i - 1],), (b[j - 1],)))
            i -= 1
            j -= 1
        elif i > 0 and dp[(i - 1) * width + j] + 1 == cur:
            ops.append(EditOp.make(i - 1, i, (a[i - 1],), ()))
            i -= 1
        else:
            ops.append(EditOp.make(i, i, (), (b[j - 1],)))
            j -= 1
    ops.reverse()
    return ops


def merge_adjacent(ops: Sequence[EditOp]) -> list[EditOp]:
    """Merge runs of ops whose source spans abut into phrase-level ops."""
    merged: list[EditOp] = []
    for op in ops:
        if merged and merged[-1].end == op.start:
            prev = merged[-1]
            merged[-1] = EditOp.make(
                prev.start, op.end, prev.source + op.source, prev.target + op.target
            )
        else:
            merged.append(op)
    return merged


def extract_edits(source: Sentence, target: Sentence) -> list[EditOp]:
    """Phrase-level edit ops turning ``source`` into ``target``.

    Ops are sorted, non-overlapping, and applying them to the source
    reproduces the target exactly.
    """
    return merge_adjacent(atomic_edits(source, target))


def apply_edits(ops: Sequence[EditOp], source: Sentence) -> Sentence:
    """Apply non-overlapping ops (any order) to a source sentence."""
    ordered = sorted(ops, key=lambda op: (op.start, op.end))
    for prev, nxt in zip(ordered, ordered[1:]):
        if nxt.start < prev.end:
            raise ValueError(f"overlapping edit spans: {prev} / {nxt}")
    tokens: list[str] = []
    idx = 0
    for op in ordered:
        tokens.extend(source.tokens[idx : op.start])
        tokens.extend(op.target)
        idx = op.end
    tokens.extend(source.tokens[idx:])
    return Sentence.from_tokens(tokens)


def all_decompositions(
    source: Sentence,
    target: Sentence,
    cap: int = DEFAULT_DECOMP_CAP,
) -> list[tuple[EditOp, ...]]:
    """Enumerate distinct decompositions of minimal edit cost.

    Every optimal atomic edit script contributes its phrase-merged variant
    and, when different, the unmerged atomic variant, covering the two
    granularities gold edits are usually written at. Bounded at ``cap``
    decompositions; the first entry is always the canonical one from
    extract_edits. Used by the edit-matching scorer to search over
    cost-equivalent edit scripts.
    """
    a, b = source.tokens, target.tokens
    ea, eb = _encode(a, b)
    dp = _kernel.dp_table(ea, eb)
    width = len(b) + 1

    seen: set[tuple[EditOp, ...]] = set()
    results: list[tuple[EditOp, ...]] = []
    # Path cap keeps pathological inputs bounded: distinct atomic scripts can
    # exceed distinct merged scripts by a large factor.
    budget = [cap * 8]

    def walk(i: int, j: int, acc: list[EditOp]) -> None:
        if len(results) >= cap or budget[0] <= 0:
            return
        if i == 0 and j == 0:
            budget[0] -= 1
            atomic = tuple(reversed(acc))
            merged = tuple(merge_adjacent(list(atomic)))
            for variant in (merged, atomic):
                if variant not in seen and len(results) < cap:
                    seen.add(variant)
                    results.append(variant)
            return
        cur = dp[i * width + j]
        if i > 0 and j > 0 and a[i - 1] == b[j - 1] and dp[(i - 1) * width + j - 1] == cur:
            walk(i - 1, j - 1, acc)
        if i > 0 and j > 0 and a[i - 1] != b[j - 1] and dp[(i - 1) * width + j - 1] + 1 == cur:
            acc.append(EditOp.make(i - 1, i, (a[i - 1],), (b[j - 1],)))
            walk(i - 1, j - 1, acc)
            acc.pop()
        if i > 0 and dp[(i - 1) * width + j] + 1 == cur:
            acc.append(EditOp.make(i - 1, i, (a[i - 1],), ()))
            walk(i - 1, j, acc)
            acc.pop()
        if j > 0 and dp[i * width + j - 1] + 1 == cur:
            acc.append(EditOp.make(i, i, (), (b[j - 1],)))
            walk(i, j - 1, acc)
            acc.pop()

    walk(len(a), len(b), [])
    return results


def count_kinds(ops: Sequence[EditOp]) -> dict[str, int]:
    """Number of ops per kind (phrase-level)."""
    counts = {INSERT: 0, DELETE: 0, SUBSTITUTE: 0}
    for op in ops:
        counts[op.kind] += 1
    return counts
