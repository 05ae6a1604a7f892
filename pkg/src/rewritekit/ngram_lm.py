"""Interpolated Kneser-Ney n-gram language model with fluency scoring.

Probability structure
---------------------
At each order k the model interpolates a discounted count estimate with the
next-lower order:

    P_k(w | c) = (max(count(c,w) - D, 0) + D * types(c) * P_{k-1}(w | c'))
                 / total(c)

where ``c'`` drops the oldest context token and ``types(c)`` is the number
of distinct continuations of ``c``. The highest order uses raw counts; lower
orders use continuation (type) counts, except contexts anchored at the
sentence-begin symbol, which keep raw counts (they have no left extensions
to type-count). The base case is uniform over the event space, which makes
every level normalize exactly and gives every event positive probability.

Event space
-----------
The sentence-end symbol is a predictable event and therefore part of the
model's vocabulary; the begin symbol is context-only and never predicted.
Distributions normalize over vocab (which includes the end symbol) plus the
reserved unknown token.

Entropy is averaged in nats over the token events plus the end event, so a
sentence of length L contributes L+1 events and the denominator is L+1.
"""

from __future__ import annotations

import math
import pickle
from collections import Counter, defaultdict
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Sentence

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

DEFAULT_ORDER = 5
DEFAULT_DISCOUNT = 0.75

_BINARY_MAGIC = b"#rewritekit-lm v1\n"
_LN10 = math.log(10.0)


class NgramModel:
    """Immutable after training; scoring is reentrant."""

    def __init__(
        self,
        order: int,
        discount: float,
        tables: list[dict[tuple[str, ...], dict[str, float]]],
        vocab: set[str],
    ) -> None:
        self.order = order
        self.discount = discount
        # tables[k-1] maps context (k-1 tokens) -> {word: count} for order k.
        self._tables = tables
        self.vocab = vocab  # includes EOS, excludes BOS and UNK
        self._totals: list[dict[tuple[str, ...], float]] = [
            {ctx: sum(row.values()) for ctx, row in table.items()} for table in tables
        ]
        self._n_events = len(vocab) + 1  # + UNK

    def events(self) -> set[str]:
        """The full event space: vocabulary (with the end symbol) plus unk."""
        return self.vocab | {UNK}

    def _map_token(self, token: str) -> str:
        if token == BOS or token in self.vocab:
            return token
        return UNK

    def prob(self, token: str, context: Sequence[str] = ()) -> float:
        """P(token | context).

        The context is truncated to the last order-1 tokens; shorter
        contexts are left-padded with the begin symbol, so a short prefix
        means "sentence start", matching training-time conditioning.
        """
        ctx = self._window(context)
        word = self._map_token(token)
        return self._p(len(ctx) + 1, ctx, word)

    def _window(self, context: Sequence[str]) -> tuple[str, ...]:
        n_ctx = self.order - 1
        if n_ctx == 0:
            return ()
        window = tuple(self._map_token(t) for t in context[-n_ctx:])
        if len(window) < n_ctx:
            window = (BOS,) * (n_ctx - len(window)) + window
        return window

    def _p(self, k: int, ctx: tuple[str, ...], word: str) -> float:
        if k == 0:
            return 1.0 / self._n_events
        row = self._tables[k - 1].get(ctx)
        if not row:
            return self._p(k - 1, ctx[1:], word)
        total = self._totals[k - 1][ctx]
        d = self.discount
        count = row.get(word, 0.0)
        lower = self._p(k - 1, ctx[1:], word)
        return (max(count - d, 0.0) + d * len(row) * lower) / total

    def log_prob(self, token: str, context: Sequence[str] = ()) -> float:
        """Natural log of prob; finite because smoothing guarantees support."""
        return math.log(self.prob(token, context))

    def contexts(self, k: int) -> list[tuple[str, ...]]:
        """All observed contexts for order k (1-based); useful for audits."""
        return list(self._tables[k - 1].keys())

    def distribution(self, context: Sequence[str] = ()) -> dict[str, float]:
        """Full next-event distribution; sums to 1 within fp rounding."""
        return {w: self.prob(w, context) for w in sorted(self.events())}


def train_lm(
    sentences: Iterable[Sentence],
    order: int = DEFAULT_ORDER,
    discount: float = DEFAULT_DISCOUNT,
) -> NgramModel:
    """Count n-grams and continuation types over a tokenized corpus."""
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    if not 0.0 < discount < 1.0:
        raise ValueError(f"discount must be in (0,1), got {discount}")
    sents = [s.tokens if isinstance(s, Sentence) else tuple(s) for s in sentences]
    if not sents:
        raise ValueError("empty LM corpus")

    raw: list[dict[tuple[str, ...], Counter]] = [defaultdict(Counter) for _ in range(order)]
    vocab: set[str] = {EOS}
    for tokens in sents:
        vocab.update(tokens)
        padded = (BOS,) * (order - 1) + tuple(tokens) + (EOS,)
        for pos in range(order - 1, len(padded)):
            word = padded[pos]
            for k in range(1, order + 1):
                ctx = padded[pos - k + 1 : pos]
                raw[k - 1][ctx][word] += 1

    tables: list[dict[tuple[str, ...], dict[str, float]]] = [dict() for _ in range(order)]
    # Highest order: raw counts.
    tables[order - 1] = {ctx: dict(row) for ctx, row in raw[order - 1].items()}
    # Lower orders: continuation type counts from the next order up, keeping
    # raw counts for begin-anchored contexts (no left extensions exist).
    for k in range(order - 1, 0, -1):
        cont: dict[tuple[str, ...], Counter] = defaultdict(Counter)
        for hi_ctx, row in raw[k].items():  # order k+1 raw counts
            lo_ctx = hi_ctx[1:]
            for word in row:
                cont[lo_ctx][word] += 1
        table_k: dict[tuple[str, ...], dict[str, float]] = {}
        for ctx, row in raw[k - 1].items():
            if ctx and ctx[0] == BOS:
                table_k[ctx] = dict(row)
            else:
                table_k[ctx] = dict(cont.get(ctx) or row)
        tables[k - 1] = table_k

    return NgramModel(order, discount, tables, vocab)


def entropy(model, sentence: Sentence) -> float:
    """Per-event negative mean log-likelihood in nats, end event included."""
    tokens = sentence.tokens
    if not tokens:
        raise ValueError("entropy of empty sentence")
    total = 0.0
    for i, token in enumerate(tokens):
        total += model.log_prob(token, tokens[:i])
    total += model.log_prob(EOS, tokens)
    return -total / (len(tokens) + 1)


def fluency(model, sentence: Sentence) -> float:
    """Fluency score 1 / (1 + H); 1.0 exactly when every event has prob 1."""
    return 1.0 / (1.0 + entropy(model, sentence))


def save_lm(model: NgramModel, path: str | Path, fmt: str = "arpa") -> None:
    """Write the model as ARPA text or as the versioned binary cache."""
    if fmt == "binary":
        payload = (model.order, model.discount, model._tables, model.vocab)
        with open(path, "wb") as fh:
            fh.write(_BINARY_MAGIC)
            pickle.dump(payload, fh, protocol=4)
        return
    if fmt != "arpa":
        raise ValueError(f"unknown LM format: {fmt!r}")
    _write_arpa(model, path)


def _write_arpa(model: NgramModel, path: str | Path) -> None:
    order = model.order
    # Entries per order: real events from the model tables, plus rows that
    # exist only to carry backoff weights (contexts of the next order up),
    # plus an explicit <unk> unigram.
    entries: list[list[tuple[tuple[str, ...], str]]] = [[] for _ in range(order)]
    context_rows: list[set[tuple[str, ...]]] = [set() for _ in range(order + 1)]
    for k in range(1, order + 1):
        for ctx in model._tables[k - 1]:
            if len(ctx) == k - 1:
                context_rows[k - 1].add(ctx)
    for k in range(1, order + 1):
        grams = set()
        for ctx, row in model._tables[k - 1].items():
            for word in row:
                grams.add(ctx + (word,))
        if k < order:
            grams.update(context_rows[k])  # bow carriers (e.g. <s> prefixes)
        if k == 1:
            grams.add((UNK,))
        entries[k - 1] = sorted((g[:-1], g[-1]) for g in grams)

    def bow(ctx: tuple[str, ...]) -> float | None:
        k = len(ctx) + 1
        if k > order:
            return None
        row = model._tables[k - 1].get(ctx)
        if not row:
            return None
        return model.discount * len(row) / model._totals[k - 1][ctx]

    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\\data\\\n")
        for k in range(1, order + 1):
            fh.write(f"ngram {k}={len(entries[k - 1])}\n")
        fh.write("\n")
        for k in range(1, order + 1):
            fh.write(f"\\{k}-grams:\n")
            for ctx, word in entries[k - 1]:
                if word == BOS or (word == UNK and len(ctx) > 0):
                    logp = -99.0
                elif word == UNK:
                    logp = math.log10(model._p(1, (), UNK))
                else:
                    in_table = word in (model._tables[k - 1].get(ctx) or {})
                    logp = math.log10(model._p(k, ctx, word)) if in_table else -99.0
                gram = " ".join(ctx + (word,))
                weight = bow(ctx + (word,)) if k < order else None
                if weight is not None:
                    fh.write(f"{logp:.17g}\t{gram}\t{math.log10(weight):.17g}\n")
                else:
                    fh.write(f"{logp:.17g}\t{gram}\n")
            fh.write("\n")
        fh.write("\\end\\\n")


class ArpaModel:
    """Backoff evaluator over a loaded ARPA file.

    Produces the same probabilities as the training-time model: stored rows
    are fully interpolated estimates and backoff weights carry the
    interpolation mass for unseen continuations.
    """

    def __init__(
        self, order: int, logprobs: dict[tuple[str, ...], float], bows: dict[tuple[str, ...], float]
    ) -> None:
        self.order = order
        self._logprobs = logprobs  # log10
        self._bows = bows  # log10
        self.vocab = {
            g[0] for g in logprobs if len(g) == 1 and g[0] not in (BOS, UNK)
        }

    def events(self) -> set[str]:
        return self.vocab | {UNK}

    def _map_token(self, token: str) -> str:
        if token == BOS or token in self.vocab:
            return token
        return UNK

    def log10_prob(self, token: str, context: Sequence[str] = ()) -> float:
        n_ctx = self.order - 1
        ctx: tuple[str, ...] = ()
        if n_ctx > 0:
            ctx = tuple(self._map_token(t) for t in context[-n_ctx:])
            if len(ctx) < n_ctx:
                ctx = (BOS,) * (n_ctx - len(ctx)) + ctx
        word = self._map_token(token)
        return self._log10_backoff(ctx, word)

    def _log10_backoff(self, ctx: tuple[str, ...], word: str) -> float:
        hit = self._logprobs.get(ctx + (word,))
        if hit is not None and hit > -98.0:  # -99 rows are bow carriers only
            return hit
        if not ctx:
            if hit is not None:
                return hit
            raise KeyError(f"event {word!r} missing from unigram block")
        return self._bows.get(ctx, 0.0) + self._log10_backoff(ctx[1:], word)

    def prob(self, token: str, context: Sequence[str] = ()) -> float:
        return 10.0 ** self.log10_prob(token, context)

    def log_prob(self, token: str, context: Sequence[str] = ()) -> float:
        return self.log10_prob(token, context) * _LN10


def load_lm(path: str | Path) -> NgramModel | ArpaModel:
    """Load a saved model, sniffing binary cache vs. ARPA text."""
    with open(path, "rb") as fh:
        head = fh.read(len(_BINARY_MAGIC))
        if head == _BINARY_MAGIC:
            order, discount, tables, vocab = pickle.load(fh)
            return NgramModel(order, discount, tables, vocab)
    return _read_arpa(path)


def _read_arpa(path: str | Path) -> ArpaModel:
    logprobs: dict[tuple[str, ...], float] = {}
    bows: dict[tuple[str, ...], float] = {}
    order = 0
    in_grams = False
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line == "\\data\\":
                continue
            if line == "\\end\\":
                break
            if line.startswith("ngram "):
                continue
            if line.endswith("-grams:") and line.startswith("\\"):
                order = max(order, int(line[1:].split("-")[0]))
                in_grams = True
                continue
            if not in_grams:
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                raise ValueError(f"{path}: malformed ARPA entry {line!r}")
            gram = tuple(parts[1].split(" "))
            logprobs[gram] = float(parts[0])
            if len(parts) >= 3:
                bows[gram] = float(parts[2])
    if not logprobs:
        raise ValueError(f"{path}: no n-gram entries found")
    return ArpaModel(order, logprobs, bows)
