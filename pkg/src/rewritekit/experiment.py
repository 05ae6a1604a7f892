"""Packaged synthetic experiment: simultaneous training vs. pre-train & fine-tune.

The scenario plants two rewrite signals in the data:

- edit A ("recieve" -> "receive") is a genuine correction, taught by both
  the gold and the augmented corpus;
- edit B ("part" -> "parts") is spurious: the augmented corpus teaches it on
  a fraction of its pairs, while the gold corpus consistently keeps "part"
  unchanged.

Pooling everything into one register makes the spurious edit look
overwhelmingly true (augmented evidence swamps gold keep-evidence), so the
simultaneously-trained model rewrites probe sentences it should leave
alone. Two-phase training discounts the pretrain register at decode time
(gamma), letting the gold keep-evidence win, which shows up as a strictly
higher edit-overlap F-score on the probe set.

Everything is derived from the seed; reports are byte-stable.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from .augmentor import down_sample, up_sample
from .corpus import Corpus, Origin, ParallelPair, Sentence
from .metrics import GoldAnnotation, annotation_from_correction, m2_score
from .rewriter import FINETUNE, PRETRAIN, DecodeConfig, RuleTable, decode, learn_rules
from .trainer import MODES, PTFT, ST_DOWN, ST_UP

EDIT_A = ("recieve", "receive")  # genuine correction
EDIT_B = ("part", "parts")  # spurious rewrite

_FILLERS = (
    "today",
    "soon",
    "maybe",
    "again",
    "later",
    "quickly",
    "carefully",
    "together",
    "tomorrow",
    "often",
    "quietly",
    "early",
)


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 7
    gold_size: int = 200
    aug_size: int = 10_000
    probe_size: int = 100
    spurious_fraction: float = 0.1
    gamma: float = 0.1


@dataclass
class Scenario:
    gold: Corpus
    augmented: Corpus
    probes: list[Sentence]
    gold_annotations: list[GoldAnnotation]


def _fillers(rng: random.Random, count: int) -> list[str]:
    return [rng.choice(_FILLERS) for _ in range(count)]


def build_scenario(config: ScenarioConfig) -> Scenario:
    rng = random.Random(config.seed)
    a_src, a_tgt = EDIT_A
    b_src, b_tgt = EDIT_B

    gold_pairs: list[ParallelPair] = []
    for _ in range(config.gold_size):
        # Keep the A-token and B-token separated by "the" so their edits
        # never merge into one phrase op.
        head = _fillers(rng, rng.randint(1, 2))
        tail = _fillers(rng, rng.randint(1, 3))
        src = head + [a_src, "the", b_src] + tail
        tgt = head + [a_tgt, "the", b_src] + tail
        gold_pairs.append(
            ParallelPair(Sentence.from_tokens(src), Sentence.from_tokens(tgt), Origin.gold())
        )

    n_spurious = round(config.aug_size * config.spurious_fraction)
    aug_pairs: list[ParallelPair] = []
    for i in range(config.aug_size):
        head = _fillers(rng, rng.randint(1, 2))
        tail = _fillers(rng, rng.randint(1, 3))
        if i < n_spurious:
            src = head + [a_src, "the", b_src] + tail
            tgt = head + [a_tgt, "the", b_tgt] + tail
        else:
            src = head + [a_src] + tail
            tgt = head + [a_tgt] + tail
        aug_pairs.append(
            ParallelPair(
                Sentence.from_tokens(src), Sentence.from_tokens(tgt), Origin.augmented("bt")
            )
        )

    probes: list[Sentence] = []
    annotations: list[GoldAnnotation] = []
    for _ in range(config.probe_size):
        head = _fillers(rng, rng.randint(1, 2))
        tail = _fillers(rng, rng.randint(1, 3))
        probe = Sentence.from_tokens(head + [a_src, "the", b_src] + tail)
        corrected = Sentence.from_tokens(head + [a_tgt, "the", b_src] + tail)
        probes.append(probe)
        annotations.append(annotation_from_correction(probe, [corrected]))

    return Scenario(
        Corpus(gold_pairs, id="gold"),
        Corpus(aug_pairs, id="augmented"),
        probes,
        annotations,
    )


@dataclass
class ModeResult:
    mode: str
    applied_a_rate: float
    applied_b_rate: float
    precision: float
    recall: float
    f05: float

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "applied_a_rate": self.applied_a_rate,
            "applied_b_rate": self.applied_b_rate,
            "precision": self.precision,
            "recall": self.recall,
            "f05": self.f05,
        }


@dataclass
class ExperimentReport:
    config: ScenarioConfig
    results: dict[str, ModeResult] = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "config": vars(self.config),
            "results": {mode: self.results[mode].to_dict() for mode in sorted(self.results)},
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def table(self) -> str:
        header = f"{'mode':<9} {'A-rate':>7} {'B-rate':>7} {'P':>7} {'R':>7} {'F0.5':>7}"
        lines = [header, "-" * len(header)]
        for mode in MODES:
            if mode not in self.results:
                continue
            r = self.results[mode]
            lines.append(
                f"{mode:<9} {r.applied_a_rate:>7.2f} {r.applied_b_rate:>7.2f} "
                f"{r.precision:>7.4f} {r.recall:>7.4f} {r.f05:>7.4f}"
            )
        return "\n".join(lines)


def _train_mode(mode: str, scenario: Scenario, config: ScenarioConfig) -> tuple[RuleTable, float]:
    table = RuleTable()
    if mode == PTFT:
        learn_rules(scenario.augmented, PRETRAIN, table)
        learn_rules(scenario.gold, FINETUNE, table)
        return table, config.gamma
    augmented = scenario.augmented
    gold = scenario.gold
    if mode == ST_DOWN:
        augmented = down_sample(augmented, gold, config.seed)
    elif mode == ST_UP:
        gold = up_sample(gold, augmented)
    pooled = Corpus(list(gold) + list(augmented), id="pooled")
    learn_rules(pooled, FINETUNE, table)
    return table, 1.0


def _evaluate_mode(
    mode: str, scenario: Scenario, config: ScenarioConfig
) -> ModeResult:
    table, gamma = _train_mode(mode, scenario, config)
    decode_config = DecodeConfig(nbest=1, lm_weight=0.0, gamma=gamma)
    outputs: list[Sentence] = []
    applied_a = applied_b = 0
    a_tgt, b_tgt = EDIT_A[1], EDIT_B[1]
    for probe in scenario.probes:
        best = decode(table, None, probe, decode_config)[0]
        outputs.append(best.sentence)
        targets = [op.target for op in best.edits]
        if (a_tgt,) in targets:
            applied_a += 1
        if (b_tgt,) in targets:
            applied_b += 1
    report = m2_score(outputs, scenario.gold_annotations)
    n = len(scenario.probes)
    return ModeResult(
        mode,
        applied_a / n,
        applied_b / n,
        report.counts["precision"],
        report.counts["recall"],
        report.value,
    )


def run_experiment(
    config: ScenarioConfig = ScenarioConfig(), modes: tuple[str, ...] = MODES
) -> ExperimentReport:
    scenario = build_scenario(config)
    report = ExperimentReport(config)
    for mode in modes:
        report.results[mode] = _evaluate_mode(mode, scenario, config)
    return report
