"""Augmented-corpus production: back translation, round-trip paraphrasing,
synthetic error generation, multi-task ingestion, and size-balancing samplers.

Every emitted pair carries a method-specific origin tag so the gold/augmented
partition stays recoverable; the DataManifest records it explicitly when
slices are written to disk.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Protocol, Sequence

from .corpus import Corpus, Origin, ParallelPair, Sentence, read_corpus, tokenize
from .discriminator import FilterDecision, formality_filter, select_from_nbest

log = logging.getLogger(__name__)


class GeneratorInterface(Protocol):
    """Behavioral contract for reverse-direction candidate generators."""

    def generate(self, sentence: Sentence, n: int) -> list[Sentence]:
        """Up to n candidate rewrites, best-first by the generator's own score."""
        ...


class RoundTripClient(Protocol):
    pivot: str

    def translate(self, sentence: Sentence, from_lang: str, to_lang: str) -> Sentence:
        ...


def back_translate(
    generator: GeneratorInterface,
    targets: Iterable[Sentence],
    n: int,
    lm,
    threads: int = 1,
) -> Corpus:
    """Generate n-best candidates per clean target and keep one qualifying pair.

    For each target the generator proposes up to ``n`` source-side
    candidates; the highest-ranked one that is strictly less fluent than the
    target is paired with it. Targets where the generator fails are skipped
    with a logged reason; at most one pair is emitted per target.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    target_list = list(targets)

    def build(item: tuple[int, Sentence]) -> Optional[ParallelPair]:
        idx, target = item
        try:
            candidates = generator.generate(target, n)
        except Exception as exc:  # noqa: BLE001 - generator is third-party code
            log.warning("back_translate: generator failed on sentence %d: %s", idx, exc)
            return None
        return select_from_nbest(target, candidates, lm, Origin.augmented("bt"))

    results = _map_in_order(build, list(enumerate(target_list)), threads)
    return Corpus([p for p in results if p is not None], id="augmented-bt")


def _map_in_order(fn, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


@dataclass
class TransportFailure:
    index: int
    sentence: Sentence
    error: str

    def to_dict(self) -> dict:
        return {"index": self.index, "sentence": self.sentence.text, "error": self.error}


@dataclass
class RoundTripReport:
    corpus: Corpus
    decisions: list[FilterDecision]
    failures: list[TransportFailure]


def round_trip_augment(
    client: RoundTripClient,
    informal: Iterable[Sentence],
    clf,
    sigma: float,
    max_inflight: int = 1,
) -> RoundTripReport:
    """Round-trip each sentence through the pivot language and filter by formality gain.

    Transport errors are collected per sentence and reported; the batch never
    drops a sentence silently.
    """
    sentences = list(informal)

    def trip(item: tuple[int, Sentence]):
        idx, s = item
        try:
            pivoted = client.translate(s, "en", client.pivot)
            back = client.translate(pivoted, client.pivot, "en")
            return ParallelPair(s, back, Origin.augmented("f-dis"))
        except Exception as exc:  # noqa: BLE001 - transport boundary
            return TransportFailure(idx, s, str(exc))

    results = _map_in_order(trip, list(enumerate(sentences)), max_inflight)
    failures = [r for r in results if isinstance(r, TransportFailure)]
    pairs = [r for r in results if isinstance(r, ParallelPair)]
    for failure in failures:
        log.warning("round_trip_augment: sentence %d failed: %s", failure.index, failure.error)
    kept, decisions = formality_filter(pairs, clf, sigma)
    kept.id = "augmented-f-dis"
    return RoundTripReport(kept, decisions, failures)


class MockRoundTripClient:
    """Deterministic stand-in for an external MT service.

    The forward leg tags tokens with a pivot marker; the return leg strips
    the marker and applies a fixed word substitution map. An empty map makes
    the round trip the identity.
    """

    def __init__(self, mapping: dict[str, str] | None = None, pivot: str = "zh"):
        self.mapping = dict(mapping or {})
        self.pivot = pivot

    def translate(self, sentence: Sentence, from_lang: str, to_lang: str) -> Sentence:
        if to_lang == self.pivot:
            return Sentence.from_tokens(f"{self.pivot}|{t}" for t in sentence.tokens)
        prefix = f"{self.pivot}|"
        tokens = [t[len(prefix) :] if t.startswith(prefix) else t for t in sentence.tokens]
        return Sentence.from_tokens(self.mapping.get(t, t) for t in tokens)


class HttpRoundTripClient:
    """Minimal JSON-over-HTTP client with retry and timeout.

    POSTs {"text", "from", "to"} and expects {"text": ...}. Endpoint and
    token default to the REWRITEKIT_MT_ENDPOINT / REWRITEKIT_MT_TOKEN
    environment variables (resolved by the CLI). Failures raise; callers
    decide whether to collect or abort.
    """

    def __init__(
        self,
        endpoint: str,
        token: str = "",
        pivot: str = "zh",
        timeout: float = 10.0,
        retries: int = 3,
        backoff: float = 0.5,
        transport=None,
    ):
        self.endpoint = endpoint
        self.token = token
        self.pivot = pivot
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self._transport = transport or self._http_post

    def _http_post(self, payload: dict) -> dict:
        data = json.dumps(payload).encode("utf-8")
        req = urllib.request.Request(
            self.endpoint, data=data, headers={"Content-Type": "application/json"}
        )
        if self.token:
            req.add_header("Authorization", f"Bearer {self.token}")
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            return json.loads(resp.read().decode("utf-8"))

    def translate(self, sentence: Sentence, from_lang: str, to_lang: str) -> Sentence:
        payload = {"text": sentence.text, "from": from_lang, "to": to_lang}
        delay = self.backoff
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                reply = self._transport(payload)
                return tokenize(str(reply["text"]))
            except (urllib.error.URLError, OSError, KeyError, ValueError) as exc:
                last_error = exc
                if attempt < self.retries:
                    import time

                    time.sleep(delay)
                    delay *= 2
        raise RuntimeError(f"round-trip endpoint failed after {self.retries + 1} attempts: {last_error}")


ARTICLES = ("a", "an", "the")
PREPOSITIONS = ("in", "on", "at", "to", "for", "with", "from", "by", "of")


@dataclass(frozen=True)
class NoiserConfig:
    """Per-rule corruption rates; same seed reproduces output bitwise."""

    article_drop: float = 0.0
    preposition_sub: float = 0.0
    noun_number: float = 0.0
    verb_form: float = 0.0
    swap_adjacent: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("article_drop", "preposition_sub", "noun_number", "verb_form", "swap_adjacent"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"{name} rate must be in [0,1], got {rate}")


def _toggle_number(token: str) -> str:
    if len(token) > 3 and token.endswith("s"):
        return token[:-1]
    if len(token) > 2 and token.isalpha():
        return token + "s"
    return token


def _toggle_verb_form(token: str) -> str:
    if token.endswith("ing") and len(token) > 4:
        return token[:-3]
    if token.endswith("ed") and len(token) > 3:
        return token[:-2]
    if len(token) > 2 and token.isalpha():
        return token + "ed"
    return token


def _noise_tokens(tokens: Sequence[str], cfg: NoiserConfig, rng: random.Random) -> list[str]:
    out: list[str] = []
    for tok in tokens:
        if tok in ARTICLES and rng.random() < cfg.article_drop:
            continue
        if tok in PREPOSITIONS and rng.random() < cfg.preposition_sub:
            others = [p for p in PREPOSITIONS if p != tok]
            tok = rng.choice(others)
        elif rng.random() < cfg.noun_number:
            tok = _toggle_number(tok)
        elif rng.random() < cfg.verb_form:
            tok = _toggle_verb_form(tok)
        out.append(tok)
    i = 0
    while i + 1 < len(out):
        if rng.random() < cfg.swap_adjacent:
            out[i], out[i + 1] = out[i + 1], out[i]
            i += 2
        else:
            i += 1
    return out


def synthesize_errors(noiser: NoiserConfig, correct: Iterable[Sentence]) -> Corpus:
    """Derive (noised, correct) pairs with rule-based corruption."""
    pairs: list[ParallelPair] = []
    for idx, sentence in enumerate(correct):
        # Independent per-sentence stream keeps output stable under slicing.
        rng = random.Random(f"{noiser.seed}:{idx}")
        noised = _noise_tokens(sentence.tokens, noiser, rng)
        pairs.append(
            ParallelPair(Sentence.from_tokens(noised), sentence, Origin.augmented("synth"))
        )
    return Corpus(pairs, id="augmented-synth")


def ingest_multitask(other_task_corpus: Corpus, task_name: str) -> Corpus:
    """Re-tag annotated pairs from another rewriting task for pre-training."""
    if not task_name:
        raise ValueError("task name must be nonempty")
    origin = Origin.task(task_name)
    pairs: list[ParallelPair] = []
    for idx, pair in enumerate(other_task_corpus):
        if not pair.source or not pair.target:
            raise ValueError(f"pair {idx}: multitask pairs need nonempty source and target")
        pairs.append(pair.with_origin(origin))
    return Corpus(pairs, id=f"task-{task_name}")


def down_sample(aug: Corpus, orig: Corpus, seed: int) -> Corpus:
    """Uniform sample (without replacement) of aug down to |orig| pairs."""
    if len(aug) < len(orig):
        raise ValueError(f"cannot down-sample {len(aug)} pairs to {len(orig)}")
    rng = random.Random(seed)
    indices = sorted(rng.sample(range(len(aug)), len(orig)))
    return Corpus([aug[i] for i in indices], id=f"{aug.id}-down")


def up_sample(orig: Corpus, aug: Corpus) -> Corpus:
    """Replicate orig to match |aug| exactly (ceil-replicate then truncate)."""
    if len(orig) == 0:
        if len(aug) == 0:
            return Corpus([], id=f"{orig.id}-up")
        raise ValueError("cannot up-sample an empty corpus")
    reps = -(-len(aug) // len(orig))
    replicated = (orig.pairs * reps)[: len(aug)]
    return Corpus(list(replicated), id=f"{orig.id}-up")


GOLD_ROLE = "gold"
AUGMENTED_ROLE = "augmented"


@dataclass(frozen=True)
class ManifestSlice:
    name: str
    path: str
    role: str
    weight: float
    size: int
    checksum: str

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "path": self.path,
            "role": self.role,
            "weight": self.weight,
            "size": self.size,
            "checksum": self.checksum,
        }


@dataclass
class DataManifest:
    slices: list[ManifestSlice] = field(default_factory=list)

    def validate(self) -> None:
        golds = [s for s in self.slices if s.role == GOLD_ROLE]
        if len(golds) != 1:
            raise ValueError(f"manifest must have exactly one gold slice, found {len(golds)}")
        for s in self.slices:
            if s.role not in (GOLD_ROLE, AUGMENTED_ROLE):
                raise ValueError(f"slice {s.name!r}: unknown role {s.role!r}")
            if s.weight <= 0:
                raise ValueError(f"slice {s.name!r}: weight must be > 0")

    def gold(self) -> ManifestSlice:
        self.validate()
        return next(s for s in self.slices if s.role == GOLD_ROLE)

    def augmented(self) -> list[ManifestSlice]:
        self.validate()
        return [s for s in self.slices if s.role == AUGMENTED_ROLE]


def _checksum(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def build_manifest(entries: Sequence[tuple[str, str | Path, str, float]]) -> DataManifest:
    """Describe written corpus slices as (name, path, role, weight) entries."""
    slices = [
        ManifestSlice(name, str(path), role, weight, len(read_corpus(path)), _checksum(path))
        for name, path, role, weight in entries
    ]
    manifest = DataManifest(slices)
    manifest.validate()
    return manifest


def write_manifest(manifest: DataManifest, path: str | Path) -> None:
    payload = {"slices": [s.to_dict() for s in manifest.slices]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path: str | Path) -> DataManifest:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    slices = [
        ManifestSlice(
            s["name"], s["path"], s["role"], float(s["weight"]), int(s["size"]), s["checksum"]
        )
        for s in payload["slices"]
    ]
    manifest = DataManifest(slices)
    manifest.validate()
    return manifest


def load_slice(slice_: ManifestSlice) -> Corpus:
    """Read a slice and fold its manifest weight into pair weights."""
    corpus = read_corpus(slice_.path)
    if slice_.weight != 1.0:
        corpus = Corpus(
            [p.with_weight(p.weight * slice_.weight) for p in corpus], id=corpus.id
        )
    return corpus
