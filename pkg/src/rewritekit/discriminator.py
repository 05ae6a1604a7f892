"""Feature discriminators for augmented-data filtering.

Two filters are provided:

- the fluency filter keeps a (candidate, correct) pair only when the
  candidate scores strictly less fluent than the correct sentence;
- the formality filter keeps a pair when the formality probability gain of
  the target over the source meets the threshold (inclusive).

Tie behavior matters for the audit trail and is pinned: strict ``<`` for
fluency, inclusive ``>=`` for formality. Degenerate pairs (an empty side)
are rejected with a reason instead of aborting the batch.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

from .corpus import Corpus, Origin, ParallelPair, Sentence
from .ngram_lm import fluency


@dataclass(frozen=True)
class FilterDecision:
    """Audit record for one filtered pair."""

    pair: ParallelPair
    retained: bool
    score_source: float | None
    score_target: float | None
    reason: str = ""

    def to_dict(self, index: int | None = None) -> dict:
        out = {
            "source": self.pair.source.text,
            "target": self.pair.target.text,
            "retained": self.retained,
            "score_source": self.score_source,
            "score_target": self.score_target,
            "reason": self.reason,
        }
        if index is not None:
            out["pair"] = index
        return out


def _map_maybe_parallel(fn: Callable, items: Sequence, threads: int = 1) -> list:
    # Output order always equals input order, whatever the thread count.
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def fluency_filter(
    pairs: Iterable[ParallelPair], lm, threads: int = 1
) -> tuple[Corpus, list[FilterDecision]]:
    """Keep pairs whose source is strictly less fluent than its target."""
    pair_list = list(pairs)

    def decide(pair: ParallelPair) -> FilterDecision:
        if not pair.source or not pair.target:
            side = "source" if not pair.source else "target"
            return FilterDecision(pair, False, None, None, f"empty {side}")
        f_src = fluency(lm, pair.source)
        f_tgt = fluency(lm, pair.target)
        retained = f_src < f_tgt
        reason = "" if retained else "source not strictly less fluent"
        return FilterDecision(pair, retained, f_src, f_tgt, reason)

    decisions = _map_maybe_parallel(decide, pair_list, threads)
    kept = Corpus([d.pair for d in decisions if d.retained], id="fluency-filtered")
    return kept, decisions


def select_from_nbest(
    correct: Sentence,
    candidates: Sequence[Sentence],
    lm,
    origin: Origin = Origin.augmented("bt"),
) -> Optional[ParallelPair]:
    """Pick the highest-ranked candidate strictly less fluent than ``correct``.

    Candidates must be ordered best-first by the generator's own score; the
    first qualifying one wins, preserving generator plausibility. Returns
    None when nothing qualifies (including an empty candidate list).
    """
    if not correct:
        return None
    f_correct = fluency(lm, correct)
    for cand in candidates:
        if not cand:
            continue
        if fluency(lm, cand) < f_correct:
            return ParallelPair(cand, correct, origin)
    return None


@dataclass(frozen=True)
class FeatureConfig:
    """Sparse n-gram feature inventory for the formality classifier."""

    word_orders: tuple[int, ...] = (1, 2)
    char_orders: tuple[int, ...] = (3, 4, 5)


def extract_features(sentence: Sentence, config: FeatureConfig) -> set[str]:
    """Presence features: word n-grams over tokens, char n-grams over text."""
    feats: set[str] = set()
    tokens = sentence.tokens
    for n in config.word_orders:
        for i in range(len(tokens) - n + 1):
            feats.add(f"w{n}:" + " ".join(tokens[i : i + n]))
    text = sentence.text
    for n in config.char_orders:
        for i in range(len(text) - n + 1):
            feats.add(f"c{n}:" + text[i : i + n])
    return feats


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


@dataclass
class FormalityClassifier:
    """Linear logistic model over sparse n-gram presence features."""

    weights: dict[str, float] = field(default_factory=dict)
    bias: float = 0.0
    config: FeatureConfig = FeatureConfig()

    def score(self, sentence: Sentence) -> float:
        feats = extract_features(sentence, self.config)
        return self.bias + sum(self.weights.get(f, 0.0) for f in sorted(feats))

    def prob(self, sentence: Sentence) -> float:
        """Probability of the sentence being formal, in [0, 1]."""
        return _sigmoid(self.score(sentence))


def formality_prob(clf, sentence: Sentence) -> float:
    return clf.prob(sentence)


def train_formality_classifier(
    formal: Sequence[Sentence],
    informal: Sequence[Sentence],
    config: FeatureConfig = FeatureConfig(),
    learning_rate: float = 0.5,
    max_iters: int = 200,
    tol: float = 1e-8,
) -> FormalityClassifier:
    """Full-batch gradient descent on logistic loss, initialized at zero.

    Deterministic for fixed data and hyperparameters. With zero
    initialization the learner is exactly label-symmetric: swapping the
    classes negates every weight.
    """
    if not formal or not informal:
        raise ValueError("empty class")
    examples = [(extract_features(s, config), 1.0) for s in formal]
    examples += [(extract_features(s, config), 0.0) for s in informal]
    n = len(examples)

    weights: dict[str, float] = {}
    bias = 0.0
    prev_loss = math.inf
    for _ in range(max_iters):
        grad_w: dict[str, float] = {}
        grad_b = 0.0
        loss = 0.0
        for feats, label in examples:
            z = bias + sum(weights.get(f, 0.0) for f in sorted(feats))
            p = _sigmoid(z)
            err = p - label
            grad_b += err
            for f in feats:
                grad_w[f] = grad_w.get(f, 0.0) + err
            eps = 1e-12
            loss -= label * math.log(p + eps) + (1.0 - label) * math.log(1.0 - p + eps)
        loss /= n
        bias -= learning_rate * grad_b / n
        for f, g in grad_w.items():
            weights[f] = weights.get(f, 0.0) - learning_rate * g / n
        if abs(prev_loss - loss) < tol:
            break
        prev_loss = loss
    return FormalityClassifier(weights, bias, config)


def formality_filter(
    pairs: Iterable[ParallelPair], clf, sigma: float, threads: int = 1
) -> tuple[Corpus, list[FilterDecision]]:
    """Keep pairs whose formality gain P+(target) - P+(source) >= sigma."""
    if not 0.0 <= sigma <= 1.0:
        raise ValueError(f"sigma must be in [0,1], got {sigma}")
    pair_list = list(pairs)

    def decide(pair: ParallelPair) -> FilterDecision:
        if not pair.source or not pair.target:
            side = "source" if not pair.source else "target"
            return FilterDecision(pair, False, None, None, f"empty {side}")
        p_src = clf.prob(pair.source)
        p_tgt = clf.prob(pair.target)
        retained = p_tgt - p_src >= sigma
        reason = "" if retained else "formality gain below threshold"
        return FilterDecision(pair, retained, p_src, p_tgt, reason)

    decisions = _map_maybe_parallel(decide, pair_list, threads)
    kept = Corpus([d.pair for d in decisions if d.retained], id="formality-filtered")
    return kept, decisions


def write_decisions(decisions: Sequence[FilterDecision], path: str | Path) -> None:
    """JSONL audit report, one decision per line, input order preserved."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, d in enumerate(decisions):
            fh.write(json.dumps(d.to_dict(index=i), ensure_ascii=False) + "\n")


_CLF_HEADER = "#formality-clf v1"


def save_classifier(clf: FormalityClassifier, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_CLF_HEADER + "\n")
        word = ",".join(str(n) for n in clf.config.word_orders)
        char = ",".join(str(n) for n in clf.config.char_orders)
        fh.write(f"config\tword={word}\tchar={char}\n")
        fh.write(f"bias\t{clf.bias!r}\n")
        for feat in sorted(clf.weights):
            fh.write(f"{feat}\t{clf.weights[feat]!r}\n")


def load_classifier(path: str | Path) -> FormalityClassifier:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != _CLF_HEADER:
            raise ValueError(f"{path}: not a classifier file (bad header {header!r})")
        config = FeatureConfig()
        bias = 0.0
        weights: dict[str, float] = {}
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            key, _, rest = line.partition("\t")
            if key == "config":
                parts = dict(p.split("=", 1) for p in rest.split("\t"))
                config = FeatureConfig(
                    tuple(int(x) for x in parts["word"].split(",")),
                    tuple(int(x) for x in parts["char"].split(",")),
                )
            elif key == "bias":
                bias = float(rest)
            else:
                weights[key] = float(rest)
    return FormalityClassifier(weights, bias, config)
