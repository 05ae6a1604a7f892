"""Training recipes over the phrase-edit model, plus the LR schedule math.

Four modes are supported:

- ``ST``: simultaneous training on gold and augmented data pooled into one
  register (equivalent to two-phase counts blended with gamma=1);
- ``ST_up``: pooled, with the gold slice up-sampled to the augmented size;
- ``ST_down``: pooled, with the augmented slice down-sampled to gold size;
- ``PTFT``: augmented data counted into the pretrain register, then gold
  data into the finetune register, blended at decode time with the recipe's
  gamma.

The learning-rate schedule (linear warmup, then inverse-square-root decay)
has no effect on the count model; it is exposed for pluggable gradient
trainers and unit-tested directly. The named presets record the published
phase configurations this toolkit mirrors.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .augmentor import DataManifest, down_sample, load_slice, read_manifest, up_sample
from .corpus import Corpus
from .rewriter import FINETUNE, PRETRAIN, RuleTable, learn_rules

ST = "ST"
ST_UP = "ST-up"
ST_DOWN = "ST-down"
PTFT = "PT&FT"
MODES = (ST, ST_UP, ST_DOWN, PTFT)


@dataclass(frozen=True)
class PhaseConfig:
    lr_base: float
    warmup_steps: int
    total_steps: int
    dropout: float = 0.0

    def __post_init__(self) -> None:
        if self.lr_base <= 0:
            raise ValueError(f"lr_base must be > 0, got {self.lr_base}")
        if not 0 < self.warmup_steps <= self.total_steps:
            raise ValueError(
                f"need 0 < warmup_steps <= total_steps, got {self.warmup_steps}/{self.total_steps}"
            )
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0,1), got {self.dropout}")


# Published phase settings mirrored by this toolkit. The fst-finetune warmup
# was never stated alongside the rest; 4000 is our documented default.
PRESETS: dict[str, PhaseConfig] = {
    "gec-pretrain": PhaseConfig(0.0005, 8000, 200_000, 0.3),
    "gec-finetune": PhaseConfig(0.0001, 4000, 50_000, 0.2),
    "fst-pretrain": PhaseConfig(0.0005, 8000, 80_000, 0.1),
    "fst-finetune": PhaseConfig(0.00025, 4000, 15_000, 0.1),
}


def lr_at(cfg: PhaseConfig, step: int) -> float:
    """Learning rate at ``step`` (1-based): linear warmup to lr_base, then
    decay proportional to the inverse square root of the step count.

    Continuous at the warmup boundary; lr_at(4 * warmup) == lr_base / 2.
    """
    if step < 1:
        raise ValueError(f"step must be >= 1, got {step}")
    return cfg.lr_base * min(step / cfg.warmup_steps, math.sqrt(cfg.warmup_steps / step))


@dataclass(frozen=True)
class TrainingRecipe:
    mode: str
    manifest: DataManifest
    pretrain: Optional[PhaseConfig] = None
    finetune: Optional[PhaseConfig] = None
    gamma: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}, expected one of {MODES}")
        if self.mode == PTFT and (self.pretrain is None or self.finetune is None):
            raise ValueError("PT&FT recipes need both phase configurations")

    def fingerprint(self) -> str:
        payload = {
            "mode": self.mode,
            "gamma": self.gamma,
            "seed": self.seed,
            "slices": [s.to_dict() for s in self.manifest.slices],
            "pretrain": None if self.pretrain is None else vars(self.pretrain),
            "finetune": None if self.finetune is None else vars(self.finetune),
        }
        blob = json.dumps(payload, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


def _phase_from_json(obj) -> Optional[PhaseConfig]:
    if obj is None:
        return None
    if isinstance(obj, str):
        if obj not in PRESETS:
            raise ValueError(f"unknown phase preset {obj!r}, expected one of {sorted(PRESETS)}")
        return PRESETS[obj]
    return PhaseConfig(
        float(obj["lr_base"]),
        int(obj["warmup_steps"]),
        int(obj["total_steps"]),
        float(obj.get("dropout", 0.0)),
    )


def read_recipe(path: str | Path) -> TrainingRecipe:
    """Recipe JSON: {mode, manifest, phases: {pretrain, finetune}, gamma, seed}.

    Phase entries are either preset names or explicit objects; the manifest
    entry is a path resolved relative to the recipe file.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    manifest_path = Path(payload["manifest"])
    if not manifest_path.is_absolute():
        manifest_path = path.parent / manifest_path
    phases = payload.get("phases", {})
    return TrainingRecipe(
        mode=payload["mode"],
        manifest=read_manifest(manifest_path),
        pretrain=_phase_from_json(phases.get("pretrain")),
        finetune=_phase_from_json(phases.get("finetune")),
        gamma=float(payload.get("gamma", 0.1)),
        seed=int(payload.get("seed", 0)),
    )


@dataclass
class ModelCheckpoint:
    table: RuleTable
    fingerprint: str
    gamma: float
    metrics: dict = field(default_factory=dict)


EvalHook = Callable[[str, RuleTable], Optional[dict]]


def run_recipe(recipe: TrainingRecipe, eval_hook: EvalHook | None = None) -> ModelCheckpoint:
    """Execute a recipe end to end and return a reloadable checkpoint."""
    recipe.manifest.validate()
    gold = load_slice(recipe.manifest.gold())
    augmented = Corpus([], id="augmented")
    for slice_ in recipe.manifest.augmented():
        augmented.extend(load_slice(slice_))

    table = RuleTable()
    metrics: dict = {}

    def fire(phase: str) -> None:
        if eval_hook is not None:
            out = eval_hook(phase, table)
            if out:
                metrics[phase] = out

    gamma = recipe.gamma
    if recipe.mode == PTFT:
        learn_rules(augmented, PRETRAIN, table)
        fire(PRETRAIN)
        learn_rules(gold, FINETUNE, table)
        fire(FINETUNE)
    else:
        if recipe.mode == ST_DOWN and len(augmented) >= len(gold):
            augmented = down_sample(augmented, gold, recipe.seed)
        elif recipe.mode == ST_UP and len(gold) > 0:
            gold = up_sample(gold, augmented)
        pooled = Corpus(list(gold) + list(augmented), id="pooled")
        learn_rules(pooled, FINETUNE, table)
        gamma = 1.0
        fire("pooled")

    return ModelCheckpoint(table, recipe.fingerprint(), gamma, metrics)


_CKPT_VERSION = 1


def save_checkpoint(ckpt: ModelCheckpoint, path: str | Path) -> None:
    payload = {
        "version": _CKPT_VERSION,
        "fingerprint": ckpt.fingerprint,
        "gamma": ckpt.gamma,
        "metrics": ckpt.metrics,
        "table": ckpt.table.snapshot(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path: str | Path) -> ModelCheckpoint:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("version") != _CKPT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {payload.get('version')!r}")
    return ModelCheckpoint(
        RuleTable.from_snapshot(payload["table"]),
        payload["fingerprint"],
        float(payload["gamma"]),
        payload.get("metrics", {}),
    )


def lr_curve(cfg: PhaseConfig, steps: int) -> list[tuple[int, float]]:
    """(step, lr) samples for plotting; step 1 through ``steps``."""
    return [(step, lr_at(cfg, step)) for step in range(1, steps + 1)]
