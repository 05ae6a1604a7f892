"""Count-based phrase-edit rewriting model.

The model's parameters are edit rules: a source n-gram (1-3 tokens) mapped
to a target n-gram, with evidence counts split into two phase registers
(pretrain / finetune) that never mix implicitly. A rule's probability blends
the registers at query time:

    c_edit = gamma * edit_pretrain + edit_finetune
    c_keep = gamma * keep_pretrain + keep_finetune
    p      = (c_edit + alpha) / (c_edit + c_keep + 2 * alpha)

so gamma=1 reproduces pooled (single-phase) estimates and gamma=0 ignores
pre-training entirely. Keep evidence is collected per source n-gram: every
occurrence left untouched by a pair's edits counts as a vote against
rewriting it.

Decoding enumerates non-overlapping rule applications left-to-right under a
beam; every matched rule contributes log(p) when applied and log(1-p) when
not, so the candidate score is the model's log-probability of that exact
edit configuration (optionally mixed with a language-model term). The
identity candidate is always representable and never pruned.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import math

from .corpus import Corpus, Sentence
from .edits import EditOp, apply_edits, extract_edits
from .ngram_lm import entropy

PRETRAIN = "pretrain"
FINETUNE = "finetune"
PHASES = (PRETRAIN, FINETUNE)

MAX_SOURCE_NGRAM = 3
DEFAULT_GAMMA = 0.1
DEFAULT_ALPHA = 0.1
DEFAULT_EDIT_THRESHOLD = 0.5


@dataclass(frozen=True)
class EditRule:
    """source n-gram -> target n-gram, with an optional one-token left context."""

    source: tuple[str, ...]
    target: tuple[str, ...]
    context: str = ""

    def __post_init__(self) -> None:
        if not 1 <= len(self.source) <= MAX_SOURCE_NGRAM:
            raise ValueError(f"rule source must be 1-{MAX_SOURCE_NGRAM} tokens")


class RuleTable:
    """Phase-separated edit/keep evidence counts.

    Counting is a commutative monoid: tables learned on shards merge into
    the same counts regardless of order.
    """

    def __init__(self) -> None:
        self._edit: dict[str, dict[EditRule, float]] = {p: {} for p in PHASES}
        self._keep: dict[str, dict[tuple[str, ...], float]] = {p: {} for p in PHASES}

    def add_edit(self, rule: EditRule, phase: str, weight: float = 1.0) -> None:
        table = self._edit[self._check_phase(phase)]
        table[rule] = table.get(rule, 0.0) + weight

    def add_keep(self, source: tuple[str, ...], phase: str, weight: float = 1.0) -> None:
        table = self._keep[self._check_phase(phase)]
        table[source] = table.get(source, 0.0) + weight

    @staticmethod
    def _check_phase(phase: str) -> str:
        if phase not in PHASES:
            raise ValueError(f"unknown phase {phase!r}, expected one of {PHASES}")
        return phase

    def edit_count(self, rule: EditRule, phase: str) -> float:
        return self._edit[self._check_phase(phase)].get(rule, 0.0)

    def keep_count(self, source: tuple[str, ...], phase: str) -> float:
        return self._keep[self._check_phase(phase)].get(source, 0.0)

    def rules(self) -> list[EditRule]:
        seen = set(self._edit[PRETRAIN]) | set(self._edit[FINETUNE])
        return sorted(seen, key=lambda r: (r.source, r.target, r.context))

    def rules_by_source(self) -> dict[tuple[str, ...], list[EditRule]]:
        index: dict[tuple[str, ...], list[EditRule]] = {}
        for rule in self.rules():
            index.setdefault(rule.source, []).append(rule)
        return index

    def merge(self, other: "RuleTable") -> "RuleTable":
        merged = RuleTable()
        for phase in PHASES:
            for src in (self, other):
                for rule, count in src._edit[phase].items():
                    merged.add_edit(rule, phase, count)
                for ngram, count in src._keep[phase].items():
                    merged.add_keep(ngram, phase, count)
        return merged

    def snapshot(self) -> dict:
        """Plain-data view used by checkpoints and the rule-table file."""
        rows = []
        for rule in self.rules():
            rows.append(
                {
                    "context": rule.context,
                    "source": list(rule.source),
                    "target": list(rule.target),
                    "edit_pre": self.edit_count(rule, PRETRAIN),
                    "edit_ft": self.edit_count(rule, FINETUNE),
                }
            )
        keeps = []
        for ngram in sorted(set(self._keep[PRETRAIN]) | set(self._keep[FINETUNE])):
            keeps.append(
                {
                    "source": list(ngram),
                    "keep_pre": self.keep_count(ngram, PRETRAIN),
                    "keep_ft": self.keep_count(ngram, FINETUNE),
                }
            )
        return {"rules": rows, "keeps": keeps}

    @classmethod
    def from_snapshot(cls, payload: dict) -> "RuleTable":
        table = cls()
        for row in payload["rules"]:
            rule = EditRule(tuple(row["source"]), tuple(row["target"]), row.get("context", ""))
            if row["edit_pre"]:
                table.add_edit(rule, PRETRAIN, row["edit_pre"])
            if row["edit_ft"]:
                table.add_edit(rule, FINETUNE, row["edit_ft"])
        for row in payload["keeps"]:
            ngram = tuple(row["source"])
            if row["keep_pre"]:
                table.add_keep(ngram, PRETRAIN, row["keep_pre"])
            if row["keep_ft"]:
                table.add_keep(ngram, FINETUNE, row["keep_ft"])
        return table


def _anchor_insert(op: EditOp, tokens: tuple[str, ...]) -> Optional[EditOp]:
    # A pure insert has no source n-gram to key on; fold the neighboring
    # kept token into the rule so it becomes a 1-token rewrite.
    if op.start > 0:
        anchor = tokens[op.start - 1]
        return EditOp.make(op.start - 1, op.start, (anchor,), (anchor,) + op.target)
    if op.start < len(tokens):
        anchor = tokens[op.start]
        return EditOp.make(op.start, op.start + 1, (anchor,), op.target + (anchor,))
    return None  # empty source sentence: nothing to anchor on


def learn_rules(
    corpus: Corpus | Iterable, phase: str, table: RuleTable | None = None
) -> RuleTable:
    """Accumulate edit and keep evidence from a parallel corpus into ``table``.

    Pair weights scale every increment. Edits longer than the rule n-gram
    cap contribute no rule (but still mark their span as covered so no keep
    evidence is counted for it).
    """
    table = table if table is not None else RuleTable()
    RuleTable._check_phase(phase)
    for pair in corpus:
        tokens = pair.source.tokens
        weight = pair.weight
        covered: set[int] = set()
        for op in extract_edits(pair.source, pair.target):
            anchored = _anchor_insert(op, tokens) if op.start == op.end else op
            if anchored is None:
                continue
            covered.update(range(anchored.start, anchored.end))
            if len(anchored.source) <= MAX_SOURCE_NGRAM:
                table.add_edit(EditRule(anchored.source, anchored.target), phase, weight)
        for n in range(1, MAX_SOURCE_NGRAM + 1):
            for i in range(len(tokens) - n + 1):
                if covered.isdisjoint(range(i, i + n)):
                    table.add_keep(tokens[i : i + n], phase, weight)
    return table


def rule_prob(
    table: RuleTable,
    rule: EditRule,
    gamma: float = DEFAULT_GAMMA,
    alpha: float = DEFAULT_ALPHA,
) -> float:
    """Blended, smoothed probability that the rule's source should be rewritten."""
    c_edit = gamma * table.edit_count(rule, PRETRAIN) + table.edit_count(rule, FINETUNE)
    c_keep = gamma * table.keep_count(rule.source, PRETRAIN) + table.keep_count(
        rule.source, FINETUNE
    )
    return (c_edit + alpha) / (c_edit + c_keep + 2 * alpha)


@dataclass(frozen=True)
class ScoredCandidate:
    """A decoded rewrite with its model log-probability and applied edits."""

    sentence: Sentence
    model_score: float
    edits: tuple[EditOp, ...]
    score: float = 0.0  # model_score plus the weighted LM term

    def to_dict(self) -> dict:
        return {
            "sentence": self.sentence.text,
            "model_score": self.model_score,
            "score": self.score,
            "edits": [
                {
                    "start": op.start,
                    "end": op.end,
                    "source": list(op.source),
                    "target": list(op.target),
                }
                for op in self.edits
            ],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ScoredCandidate":
        from .corpus import tokenize

        edits = tuple(
            EditOp.make(e["start"], e["end"], e["source"], e["target"])
            for e in payload["edits"]
        )
        return cls(
            tokenize(payload["sentence"]),
            float(payload["model_score"]),
            edits,
            float(payload.get("score", payload["model_score"])),
        )


@dataclass(frozen=True)
class DecodeConfig:
    nbest: int = 12
    lm_weight: float = 0.0
    edit_threshold: float = DEFAULT_EDIT_THRESHOLD
    gamma: float = DEFAULT_GAMMA
    alpha: float = DEFAULT_ALPHA
    beam: int = 256

    def __post_init__(self) -> None:
        if self.nbest < 1:
            raise ValueError(f"nbest must be >= 1, got {self.nbest}")
        if self.beam < 1:
            raise ValueError(f"beam must be >= 1, got {self.beam}")


@dataclass(frozen=True)
class _Match:
    start: int
    end: int
    rule: EditRule
    log_p: float
    log_not: float


def _matched_rules(table: RuleTable, source: Sentence, config: DecodeConfig) -> list[_Match]:
    tokens = source.tokens
    index = table.rules_by_source()
    matches: list[_Match] = []
    for i in range(len(tokens)):
        for n in range(1, MAX_SOURCE_NGRAM + 1):
            if i + n > len(tokens):
                break
            for rule in index.get(tokens[i : i + n], ()):
                if rule.context and (i == 0 or tokens[i - 1] != rule.context):
                    continue
                p = rule_prob(table, rule, config.gamma, config.alpha)
                if p >= config.edit_threshold:
                    matches.append(_Match(i, i + n, rule, math.log(p), math.log(1.0 - p)))
    matches.sort(key=lambda m: (m.start, m.end, m.rule.target, m.rule.context))
    return matches


def _state_sort_key(state: tuple[tuple[tuple[int, int, EditRule], ...], float]):
    applied, score = state
    signature = tuple((s, e, r.target, r.context) for s, e, r in applied)
    return (-score, len(applied), signature)


def decode(
    table: RuleTable,
    lm,
    source: Sentence,
    config: DecodeConfig = DecodeConfig(),
) -> list[ScoredCandidate]:
    """N-best rewrites of ``source`` under the rule model.

    Ordering is total and reproducible: score descending, then fewer edits,
    then candidate text. The identity candidate is always present.
    """
    matches = _matched_rules(table, source, config)

    # Each state: (applied ops tuple, occupied spans, model log-prob).
    states: list[tuple[tuple[tuple[int, int, EditRule], ...], float]] = [((), 0.0)]
    for match in matches:
        nxt: list[tuple[tuple[tuple[int, int, EditRule], ...], float]] = []
        for applied, score in states:
            nxt.append((applied, score + match.log_not))
            if all(match.end <= s or e <= match.start for s, e, _ in applied):
                nxt.append(
                    (applied + ((match.start, match.end, match.rule),), score + match.log_p)
                )
        if len(nxt) > config.beam:
            nxt.sort(key=_state_sort_key)
            kept = nxt[: config.beam]
            if not any(not st[0] for st in kept):  # identity is never pruned
                identity = next(st for st in nxt if not st[0])
                kept[-1] = identity
            nxt = kept
        states = nxt

    candidates: list[ScoredCandidate] = []
    for applied, model_score in states:
        ops = [
            EditOp.make(start, end, source.tokens[start:end], rule.target)
            for start, end, rule in applied
        ]
        ops.sort(key=lambda op: (op.start, op.end))
        sentence = apply_edits(ops, source)
        total = model_score
        if config.lm_weight != 0.0:
            if lm is None:
                raise ValueError("decode config has lm_weight != 0 but no lm was given")
            if sentence.tokens:
                total = model_score - config.lm_weight * entropy(lm, sentence)
        candidates.append(ScoredCandidate(sentence, model_score, tuple(ops), total))

    candidates.sort(key=lambda c: (-c.score, len(c.edits), c.sentence.text))
    return candidates[: config.nbest]


class RewriterGenerator:
    """N-best candidate generator backed by a rule table.

    Trained target-to-source, this is the default back-translation
    generator: feed it clean target-side sentences and it proposes degraded
    source-side candidates, best-first by model score.
    """

    def __init__(self, table: RuleTable, lm=None, config: DecodeConfig = DecodeConfig()):
        self.table = table
        self.lm = lm
        self.config = config

    def generate(self, sentence: Sentence, n: int) -> list[Sentence]:
        config = DecodeConfig(
            nbest=n,
            lm_weight=self.config.lm_weight,
            edit_threshold=self.config.edit_threshold,
            gamma=self.config.gamma,
            alpha=self.config.alpha,
            beam=self.config.beam,
        )
        return [c.sentence for c in decode(self.table, self.lm, sentence, config)]


_TABLE_HEADER = "#rules v1"


def save_rules(table: RuleTable, path: str | Path) -> None:
    """TSV: ``context|source \\t target \\t edit_pre \\t keep_pre \\t edit_ft \\t keep_ft``.

    Keep evidence is keyed by source n-gram; rows with an empty target carry
    keep counts for n-grams that have no rewrite rule yet.
    """
    snap = table.snapshot()
    keep_pre = {tuple(k["source"]): k["keep_pre"] for k in snap["keeps"]}
    keep_ft = {tuple(k["source"]): k["keep_ft"] for k in snap["keeps"]}
    written: set[tuple[str, ...]] = set()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_TABLE_HEADER + "\n")
        for row in snap["rules"]:
            src = tuple(row["source"])
            written.add(src)
            fh.write(
                "{}|{}\t{}\t{!r}\t{!r}\t{!r}\t{!r}\n".format(
                    row["context"],
                    " ".join(row["source"]),
                    " ".join(row["target"]),
                    row["edit_pre"],
                    keep_pre.get(src, 0.0),
                    row["edit_ft"],
                    keep_ft.get(src, 0.0),
                )
            )
        for src in sorted(set(keep_pre) | set(keep_ft)):
            if src not in written:
                fh.write(
                    "|{}\t\t{!r}\t{!r}\t{!r}\t{!r}\n".format(
                        " ".join(src), 0.0, keep_pre.get(src, 0.0), 0.0, keep_ft.get(src, 0.0)
                    )
                )


def load_rules(path: str | Path) -> RuleTable:
    table = RuleTable()
    seen_keep: set[tuple[str, ...]] = set()
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != _TABLE_HEADER:
            raise ValueError(f"{path}: not a rule table file (bad header {header!r})")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 6:
                raise ValueError(f"{path}:{lineno}: expected 6 fields, got {len(fields)}")
            context, _, src_text = fields[0].partition("|")
            source = tuple(src_text.split(" ")) if src_text else ()
            target = tuple(fields[1].split(" ")) if fields[1] else ()
            edit_pre, keep_pre, edit_ft, keep_ft = (float(x) for x in fields[2:])
            if target:
                rule = EditRule(source, target, context)
                if edit_pre:
                    table.add_edit(rule, PRETRAIN, edit_pre)
                if edit_ft:
                    table.add_edit(rule, FINETUNE, edit_ft)
            if source not in seen_keep:
                seen_keep.add(source)
                if keep_pre:
                    table.add_keep(source, PRETRAIN, keep_pre)
                if keep_ft:
                    table.add_keep(source, FINETUNE, keep_ft)
    return table
