"""Evaluation stack: edit-overlap scoring, n-gram metrics, and n-best reranking.

Edit-overlap scoring (the max-match style metric) compares system edits
against per-annotator gold edit sets. System edits are not unique: many
minimal edit scripts can produce the same output, so the scorer searches a
bounded set of cost-equivalent decompositions (default cap 64) and keeps the
one matching each annotator best. Per sentence, the annotator that maximizes
the running cumulative F-score is selected. When the system proposes no
edits at all, precision is defined as 1.0 (and recall 0 when gold edits
exist, so the F-score is 0).

The GEC-style GLEU here rewards hypothesis n-grams found in the reference
and subtracts (floored at zero per sentence and order) hypothesis n-grams
that appear in the source but not the reference. Multiple references are
aggregated by the arithmetic mean of per-reference corpus scores, which
keeps the metric deterministic.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

from .corpus import Sentence, tokenize
from .edits import (
    DEFAULT_DECOMP_CAP,
    EditOp,
    all_decompositions,
    count_kinds,
    extract_edits,
)
from .ngram_lm import entropy
from .rewriter import ScoredCandidate


@dataclass(frozen=True)
class GoldAnnotation:
    """A source sentence with one edit set per annotator (at least one)."""

    source: Sentence
    annotators: tuple[tuple[EditOp, ...], ...]

    def __post_init__(self) -> None:
        if not self.annotators:
            raise ValueError("gold annotation needs at least one annotator")


@dataclass
class MetricReport:
    name: str
    value: float
    per_sentence: list[float]
    counts: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "metric": self.name,
            "value": self.value,
            "counts": self.counts,
            "per_sentence": self.per_sentence,
        }


def f_beta(p: float, r: float, beta: float) -> float:
    """(1 + b^2) p r / (b^2 p + r); 0 when both p and r are 0."""
    if p == 0.0 and r == 0.0:
        return 0.0
    b2 = beta * beta
    denom = b2 * p + r
    if denom == 0.0:
        return 0.0
    return (1.0 + b2) * p * r / denom


def _precision_recall(tp: float, fp: float, fn: float) -> tuple[float, float]:
    p = tp / (tp + fp) if tp + fp > 0 else 1.0
    r = tp / (tp + fn) if tp + fn > 0 else 1.0
    return p, r


def m2_score(
    system: Sequence[Sentence],
    gold: Sequence[GoldAnnotation],
    beta: float = 0.5,
    decomp_cap: int = DEFAULT_DECOMP_CAP,
) -> MetricReport:
    """Corpus precision/recall/F against multi-annotator gold edits."""
    if len(system) != len(gold):
        raise ValueError(f"system/gold length mismatch: {len(system)} vs {len(gold)}")
    total_tp = total_fp = total_fn = 0
    per_sentence: list[float] = []
    for hyp, ann in zip(system, gold):
        decomps = all_decompositions(ann.source, hyp, cap=decomp_cap)
        best: Optional[tuple[float, int, int, int]] = None
        for annotator in ann.annotators:
            gold_ops = set(annotator)
            # Best decomposition for this annotator: max matches, then
            # fewest proposed edits.
            tp, fp = 0, len(decomps[0]) if decomps else 0
            for decomp in decomps:
                matches = sum(1 for op in decomp if op in gold_ops)
                if (matches, -(len(decomp))) > (tp, -(tp + fp)):
                    tp, fp = matches, len(decomp) - matches
            fn = len(gold_ops) - tp
            cand_p, cand_r = _precision_recall(total_tp + tp, total_fp + fp, total_fn + fn)
            cand_f = f_beta(cand_p, cand_r, beta)
            # Tie-break on counts, not annotator position, so permuting a
            # sentence's annotators never changes the outcome.
            key = (cand_f, tp, -fp, -fn)
            if best is None or key > (best[0], best[1], -best[2], -best[3]):
                best = (cand_f, tp, fp, fn)
        assert best is not None
        _, tp, fp, fn = best
        total_tp += tp
        total_fp += fp
        total_fn += fn
        sp, sr = _precision_recall(tp, fp, fn)
        per_sentence.append(f_beta(sp, sr, beta))
    precision, recall = _precision_recall(total_tp, total_fp, total_fn)
    value = f_beta(precision, recall, beta)
    return MetricReport(
        name=f"m2-f{beta}",
        value=value,
        per_sentence=per_sentence,
        counts={
            "tp": total_tp,
            "fp": total_fp,
            "fn": total_fn,
            "precision": precision,
            "recall": recall,
        },
    )


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _closest_ref_length(hyp_len: int, ref_lens: Sequence[int]) -> int:
    # Ties go to the shorter reference.
    return min(ref_lens, key=lambda r: (abs(r - hyp_len), r))


def _brevity_penalty(hyp_len: int, ref_len: int) -> float:
    if hyp_len == 0:
        return 0.0
    if hyp_len > ref_len:
        return 1.0
    return math.exp(1.0 - ref_len / hyp_len)


def _geometric_precision(
    matched: Sequence[float], total: Sequence[float], hyp_len: int, ref_len: int
) -> float:
    logs: list[float] = []
    for m, t in zip(matched, total):
        if t == 0:
            continue  # order absent from the corpus entirely
        if m == 0:
            return 0.0
        logs.append(math.log(m / t))
    if not logs:
        return 0.0
    return _brevity_penalty(hyp_len, ref_len) * math.exp(sum(logs) / len(logs))


def bleu(
    system: Sequence[Sentence],
    references: Sequence[Sequence[Sentence]],
    max_order: int = 4,
) -> MetricReport:
    """Corpus BLEU with multi-reference clipping and no corpus-level smoothing.

    Per-sentence diagnostic values use add-one smoothing for orders >= 2 and
    are labeled as such in the counts; the corpus value does not smooth.
    """
    if len(system) != len(references):
        raise ValueError(f"system/references length mismatch: {len(system)} vs {len(references)}")
    matched = [0] * max_order
    total = [0] * max_order
    hyp_len_sum = 0
    ref_len_sum = 0
    per_sentence: list[float] = []
    for hyp, refs in zip(system, references):
        if not refs:
            raise ValueError("empty reference set")
        hyp_tokens = hyp.tokens
        hyp_len_sum += len(hyp_tokens)
        ref_len_sum += _closest_ref_length(len(hyp_tokens), [len(r) for r in refs])
        sent_logs: list[float] = []
        for n in range(1, max_order + 1):
            hyp_counts = _ngrams(hyp_tokens, n)
            clip: Counter = Counter()
            for ref in refs:
                ref_counts = _ngrams(ref.tokens, n)
                for gram, count in ref_counts.items():
                    clip[gram] = max(clip[gram], count)
            m = sum(min(count, clip[gram]) for gram, count in hyp_counts.items())
            t = sum(hyp_counts.values())
            matched[n - 1] += m
            total[n - 1] += t
            if n == 1:
                sent_logs.append(math.log(m / t) if m > 0 and t > 0 else -math.inf)
            else:
                sent_logs.append(math.log((m + 1) / (t + 1)) if t + 1 > 0 else -math.inf)
        bp = _brevity_penalty(len(hyp_tokens), _closest_ref_length(len(hyp_tokens), [len(r) for r in refs]))
        if any(l == -math.inf for l in sent_logs):
            per_sentence.append(0.0)
        else:
            per_sentence.append(bp * math.exp(sum(sent_logs) / max_order))

    # Orders with no hypothesis n-grams at all (corpus shorter than n) are
    # excluded from the geometric mean, so a perfect short corpus still
    # scores 1; any order with n-grams but zero matches forces 0.
    value = _geometric_precision(matched, total, hyp_len_sum, ref_len_sum)
    counts = {"hyp_len": hyp_len_sum, "ref_len": ref_len_sum, "smoothing": "sentence-only add-one n>=2"}
    for n in range(1, max_order + 1):
        counts[f"matched_{n}"] = matched[n - 1]
        counts[f"total_{n}"] = total[n - 1]
    return MetricReport("bleu", value, per_sentence, counts)


def _gleu_single_reference(
    system: Sequence[Sentence],
    sources: Sequence[Sentence],
    refs: Sequence[Sentence],
    max_order: int,
) -> tuple[float, list[float]]:
    numer = [0] * max_order
    denom = [0] * max_order
    hyp_len_sum = 0
    ref_len_sum = 0
    per_sentence: list[float] = []
    for hyp, src, ref in zip(system, sources, refs):
        hyp_len_sum += len(hyp.tokens)
        ref_len_sum += len(ref.tokens)
        sent_logs: list[float] = []
        for n in range(1, max_order + 1):
            hyp_counts = _ngrams(hyp.tokens, n)
            ref_counts = _ngrams(ref.tokens, n)
            src_counts = _ngrams(src.tokens, n)
            match = sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
            penalty = sum(
                min(c, src_counts[g]) for g, c in hyp_counts.items() if ref_counts[g] == 0
            )
            contribution = max(0, match - penalty)
            t = sum(hyp_counts.values())
            numer[n - 1] += contribution
            denom[n - 1] += t
            if n == 1:
                sent_logs.append(
                    math.log(contribution / t) if contribution > 0 and t > 0 else -math.inf
                )
            else:
                sent_logs.append(math.log((contribution + 1) / (t + 1)))
        bp = _brevity_penalty(len(hyp.tokens), len(ref.tokens))
        if any(l == -math.inf for l in sent_logs):
            per_sentence.append(0.0)
        else:
            per_sentence.append(bp * math.exp(sum(sent_logs) / max_order))
    return _geometric_precision(numer, denom, hyp_len_sum, ref_len_sum), per_sentence


def gleu(
    system: Sequence[Sentence],
    sources: Sequence[Sentence],
    references: Sequence[Sequence[Sentence]],
    max_order: int = 4,
) -> MetricReport:
    """GEC-style GLEU; multiple references average per-reference corpus runs.

    Reference sets are unordered: each sentence's references are
    canonicalized (sorted by token sequence) before being split into
    per-reference columns, so permuting a sentence's references never
    changes the score.
    """
    if not len(system) == len(sources) == len(references):
        raise ValueError(
            f"system/sources/references length mismatch: "
            f"{len(system)}/{len(sources)}/{len(references)}"
        )
    if any(not refs for refs in references):
        raise ValueError("empty reference set")
    n_refs = len(references[0])
    if any(len(refs) != n_refs for refs in references):
        raise ValueError("every sentence needs the same number of references")
    canonical = [sorted(refs, key=lambda r: r.tokens) for refs in references]
    scores: list[float] = []
    per_sentence_runs: list[list[float]] = []
    for ref_idx in range(n_refs):
        refs = [canonical[i][ref_idx] for i in range(len(system))]
        score, per_sentence = _gleu_single_reference(system, sources, refs, max_order)
        scores.append(score)
        per_sentence_runs.append(per_sentence)
    value = sum(scores) / len(scores)
    per_sentence = [
        sum(run[i] for run in per_sentence_runs) / n_refs for i in range(len(system))
    ]
    counts = {"references": float(n_refs)}
    for i, s in enumerate(scores):
        counts[f"ref_{i}_score"] = s
    return MetricReport("gleu", value, per_sentence, counts)


@dataclass(frozen=True)
class RerankWeights:
    w_model: float = 1.0
    w_lm: float = 0.0
    w_ins: float = 0.0
    w_del: float = 0.0
    w_sub: float = 0.0

    def __post_init__(self) -> None:
        for name, value in vars(self).items():
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")


def rerank_score(
    candidate: ScoredCandidate, source: Sentence, lm, weights: RerankWeights
) -> float:
    total = weights.w_model * candidate.model_score
    if weights.w_lm != 0.0:
        if lm is None:
            raise ValueError("rerank weights use the LM feature but no lm was given")
        if candidate.sentence.tokens:
            total += weights.w_lm * (-entropy(lm, candidate.sentence))
    kinds = count_kinds(extract_edits(source, candidate.sentence))
    total += weights.w_ins * kinds["insert"]
    total += weights.w_del * kinds["delete"]
    total += weights.w_sub * kinds["substitute"]
    return total


def rerank(
    candidates: Sequence[ScoredCandidate],
    source: Sentence,
    lm,
    weights: RerankWeights,
) -> ScoredCandidate:
    """Pick the candidate maximizing the weighted feature score.

    Ties break deterministically: fewest edits vs. the source, then
    candidate text.
    """
    if not candidates:
        raise ValueError("rerank needs at least one candidate")
    scored = [
        (
            -rerank_score(c, source, lm, weights),
            len(extract_edits(source, c.sentence)),
            c.sentence.text,
            i,
        )
        for i, c in enumerate(candidates)
    ]
    scored.sort()
    return candidates[scored[0][3]]


def tune_rerank_weights(
    dev: Sequence[tuple[Sentence, Sequence[ScoredCandidate]]],
    metric: Callable[[list[Sentence]], float],
    grid: Iterable[RerankWeights],
    lm=None,
) -> RerankWeights:
    """Exhaustive grid search; the first grid point achieving the max wins."""
    best_weights: Optional[RerankWeights] = None
    best_score = -math.inf
    for weights in grid:
        outputs = [rerank(cands, src, lm, weights).sentence for src, cands in dev]
        score = metric(outputs)
        if score > best_score:
            best_score = score
            best_weights = weights
    if best_weights is None:
        raise ValueError("empty weight grid")
    return best_weights


def weight_grid(
    w_model: Sequence[float] = (1.0,),
    w_lm: Sequence[float] = (0.0,),
    w_ins: Sequence[float] = (0.0,),
    w_del: Sequence[float] = (0.0,),
    w_sub: Sequence[float] = (0.0,),
) -> list[RerankWeights]:
    """Cartesian grid in deterministic (row-major) order."""
    grid = []
    for wm in w_model:
        for wl in w_lm:
            for wi in w_ins:
                for wd in w_del:
                    for ws in w_sub:
                        grid.append(RerankWeights(wm, wl, wi, wd, ws))
    return grid


# --- gold annotation file I/O (max-match scorer format) ---------------------

_NOOP_TYPES = {"noop", "-NONE-"}


def read_gold_annotations(path: str | Path) -> list[GoldAnnotation]:
    """Parse ``S``/``A`` formatted gold files.

    Each sentence block is an ``S <source>`` line followed by
    ``A start end|||type|||correction|||...|||annotator`` lines; noop edits
    (start == end == -1) register the annotator with an empty edit set.
    """
    annotations: list[GoldAnnotation] = []
    source: Optional[Sentence] = None
    edits_by_annotator: dict[int, list[EditOp]] = {}

    def flush() -> None:
        nonlocal source, edits_by_annotator
        if source is None:
            return
        if not edits_by_annotator:
            edits_by_annotator = {0: []}
        annotators = tuple(
            tuple(edits_by_annotator[key]) for key in sorted(edits_by_annotator)
        )
        annotations.append(GoldAnnotation(source, annotators))
        source = None
        edits_by_annotator = {}

    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                flush()
                continue
            if line.startswith("S "):
                flush()
                source = tokenize(line[2:])
            elif line.startswith("A "):
                if source is None:
                    raise ValueError(f"{path}:{lineno}: annotation before any source line")
                fields = line[2:].split("|||")
                if len(fields) < 3:
                    raise ValueError(f"{path}:{lineno}: expected at least 3 |||-fields")
                span = fields[0].split()
                if len(span) != 2:
                    raise ValueError(f"{path}:{lineno}: malformed span {fields[0]!r}")
                start, end = int(span[0]), int(span[1])
                annotator = int(fields[-1]) if fields[-1].strip() else 0
                edits_by_annotator.setdefault(annotator, [])
                if start == -1 and end == -1:
                    continue  # noop: annotator registered with no edits
                correction = fields[2]
                target = () if correction in ("", "-NONE-") else tuple(correction.split())
                op = EditOp.make(start, end, source.tokens[start:end], target)
                edits_by_annotator[annotator].append(op)
            else:
                raise ValueError(f"{path}:{lineno}: unexpected line {line!r}")
    flush()
    return annotations


def write_gold_annotations(annotations: Sequence[GoldAnnotation], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ann in annotations:
            fh.write(f"S {ann.source.text}\n")
            for idx, edits in enumerate(ann.annotators):
                if not edits:
                    fh.write(f"A -1 -1|||noop|||-NONE-|||REQUIRED|||-NONE-|||{idx}\n")
                    continue
                for op in edits:
                    correction = " ".join(op.target) if op.target else "-NONE-"
                    fh.write(
                        f"A {op.start} {op.end}|||UNK|||{correction}|||REQUIRED|||-NONE-|||{idx}\n"
                    )
            fh.write("\n")


def annotation_from_correction(source: Sentence, corrections: Sequence[Sentence]) -> GoldAnnotation:
    """Build per-annotator gold edits from corrected sentences."""
    return GoldAnnotation(
        source, tuple(tuple(extract_edits(source, corrected)) for corrected in corrections)
    )


def write_report(report: MetricReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
