"""Command-line interface: one executable exposing the whole pipeline.

Exit codes: 0 success, 1 usage error, 2 data error. Every run logs a
fingerprint (config hash plus input checksums) at INFO level so results can
be tied back to exact inputs. All randomness flows from ``--seed``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .augmentor import (
    HttpRoundTripClient,
    MockRoundTripClient,
    NoiserConfig,
    back_translate,
    build_manifest,
    down_sample,
    ingest_multitask,
    round_trip_augment,
    synthesize_errors,
    up_sample,
    write_manifest,
)
from .corpus import CorpusFormatError, read_corpus, read_sentences, write_corpus, write_sentences
from .discriminator import (
    fluency_filter,
    formality_filter,
    load_classifier,
    save_classifier,
    train_formality_classifier,
    write_decisions,
)
from .experiment import ScenarioConfig, run_experiment
from .metrics import (
    RerankWeights,
    bleu,
    gleu,
    m2_score,
    read_gold_annotations,
    rerank,
)
from .ngram_lm import entropy, load_lm, save_lm, train_lm
from .rewriter import DecodeConfig, RewriterGenerator, ScoredCandidate, decode
from .trainer import PRESETS, load_checkpoint, lr_curve, read_recipe, run_recipe, save_checkpoint

log = logging.getLogger("rewritekit")

ENV_ENDPOINT = "REWRITEKIT_MT_ENDPOINT"
ENV_TOKEN = "REWRITEKIT_MT_TOKEN"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: D102 - argparse hook
        raise UsageError(message)


def _fingerprint(args: argparse.Namespace, inputs: list[str | Path]) -> str:
    config = {k: str(v) for k, v in sorted(vars(args).items()) if k != "func"}
    digest = hashlib.sha256(json.dumps(config, sort_keys=True).encode("utf-8"))
    for path in inputs:
        try:
            digest.update(Path(path).read_bytes())
        except OSError:
            digest.update(str(path).encode("utf-8"))
    return digest.hexdigest()[:16]


def build_parser() -> _Parser:
    parser = _Parser(prog="rewritekit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"rewritekit {__version__}")
    parser.add_argument("--seed", type=int, default=0, help="global random seed")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for batch scoring")
    parser.add_argument("--json", action="store_true", help="machine-readable report output")
    parser.add_argument("-v", "--verbose", action="store_true", help="log at DEBUG level")
    sub = parser.add_subparsers(dest="command", required=True)

    # lm train|score
    lm = sub.add_parser("lm", help="language model training and scoring").add_subparsers(
        dest="action", required=True
    )
    lm_train = lm.add_parser("train", help="train a Kneser-Ney n-gram model")
    lm_train.add_argument("--corpus", required=True, help="text file, one sentence per line")
    lm_train.add_argument("--out", required=True)
    lm_train.add_argument("--order", type=int, default=5)
    lm_train.add_argument("--discount", type=float, default=0.75)
    lm_train.add_argument("--format", choices=["arpa", "binary"], default="arpa")
    lm_train.set_defaults(func=_cmd_lm_train)
    lm_score = lm.add_parser("score", help="entropy and fluency per input line")
    lm_score.add_argument("--lm", required=True)
    lm_score.add_argument("--input", required=True)
    lm_score.set_defaults(func=_cmd_lm_score)

    # clf train|score (formality discriminator)
    clf = sub.add_parser("clf", help="formality classifier").add_subparsers(
        dest="action", required=True
    )
    clf_train = clf.add_parser("train")
    clf_train.add_argument("--formal", required=True, help="text file of formal sentences")
    clf_train.add_argument("--informal", required=True, help="text file of informal sentences")
    clf_train.add_argument("--out", required=True)
    clf_train.set_defaults(func=_cmd_clf_train)
    clf_score = clf.add_parser("score")
    clf_score.add_argument("--clf", required=True)
    clf_score.add_argument("--input", required=True)
    clf_score.set_defaults(func=_cmd_clf_score)

    # augment bt|roundtrip|noise|multitask
    aug = sub.add_parser("augment", help="produce augmented corpora").add_subparsers(
        dest="action", required=True
    )
    bt = aug.add_parser("bt", help="back translation via a reverse-trained checkpoint")
    bt.add_argument("--targets", required=True, help="clean target sentences, one per line")
    bt.add_argument("--generator", required=True, help="reverse-direction model checkpoint")
    bt.add_argument("--lm", required=True, help="fluency discriminator LM")
    bt.add_argument("--n", type=int, default=10, help="candidates per target")
    bt.add_argument("--out", required=True)
    bt.add_argument("--lm-weight", type=float, default=0.0)
    bt.add_argument("--threshold", type=float, default=0.5)
    bt.set_defaults(func=_cmd_augment_bt)
    rt = aug.add_parser("roundtrip", help="pivot round-trip with formality filtering")
    rt.add_argument("--input", required=True, help="informal sentences, one per line")
    rt.add_argument("--clf", required=True)
    rt.add_argument("--sigma", type=float, default=0.5)
    rt.add_argument("--pivot", default="zh")
    rt.add_argument("--out", required=True)
    rt.add_argument("--report", help="JSONL decision report path")
    rt.add_argument("--max-inflight", type=int, default=1)
    rt.add_argument(
        "--mock-map",
        help="JSON file of word substitutions; uses the deterministic mock client",
    )
    rt.set_defaults(func=_cmd_augment_roundtrip)
    noise = aug.add_parser("noise", help="rule-based synthetic error generation")
    noise.add_argument("--input", required=True, help="correct sentences, one per line")
    noise.add_argument("--out", required=True)
    noise.add_argument("--rate-article", type=float, default=0.0)
    noise.add_argument("--rate-prep", type=float, default=0.0)
    noise.add_argument("--rate-noun", type=float, default=0.0)
    noise.add_argument("--rate-verb", type=float, default=0.0)
    noise.add_argument("--rate-swap", type=float, default=0.0)
    noise.set_defaults(func=_cmd_augment_noise)
    multi = aug.add_parser("multitask", help="ingest another task's parallel data")
    multi.add_argument("--corpus", required=True)
    multi.add_argument("--task", required=True)
    multi.add_argument("--out", required=True)
    multi.set_defaults(func=_cmd_augment_multitask)

    # filter fluency|formality
    filt = sub.add_parser("filter", help="discriminator filters").add_subparsers(
        dest="action", required=True
    )
    ff = filt.add_parser("fluency")
    ff.add_argument("--pairs", required=True)
    ff.add_argument("--lm", required=True)
    ff.add_argument("--out", required=True)
    ff.add_argument("--report", help="JSONL decision report path")
    ff.set_defaults(func=_cmd_filter_fluency)
    fm = filt.add_parser("formality")
    fm.add_argument("--pairs", required=True)
    fm.add_argument("--clf", required=True)
    fm.add_argument("--sigma", type=float, default=0.5)
    fm.add_argument("--out", required=True)
    fm.add_argument("--report", help="JSONL decision report path")
    fm.set_defaults(func=_cmd_filter_formality)

    # sample up|down
    samp = sub.add_parser("sample", help="size-balancing samplers").add_subparsers(
        dest="action", required=True
    )
    down = samp.add_parser("down")
    down.add_argument("--aug", required=True)
    down.add_argument("--orig", required=True)
    down.add_argument("--out", required=True)
    down.set_defaults(func=_cmd_sample_down)
    up = samp.add_parser("up")
    up.add_argument("--orig", required=True)
    up.add_argument("--aug", required=True)
    up.add_argument("--out", required=True)
    up.set_defaults(func=_cmd_sample_up)

    # manifest
    mani = sub.add_parser("manifest", help="describe corpus slices for training")
    mani.add_argument(
        "--slice",
        action="append",
        required=True,
        metavar="NAME:PATH:ROLE[:WEIGHT]",
        help="repeatable slice spec; role is gold or augmented",
    )
    mani.add_argument("--out", required=True)
    mani.set_defaults(func=_cmd_manifest)

    # train / decode / rerank
    train = sub.add_parser("train", help="run a training recipe")
    train.add_argument("--recipe", required=True)
    train.add_argument("--out", required=True)
    train.set_defaults(func=_cmd_train)

    dec = sub.add_parser("decode", help="n-best rewriting with a checkpoint")
    dec.add_argument("--ckpt", required=True)
    dec.add_argument("--input", required=True)
    dec.add_argument("--out", required=True, help="1-best output text file")
    dec.add_argument("--nbest", type=int, default=12)
    dec.add_argument("--nbest-out", help="JSONL with full n-best lists")
    dec.add_argument("--lm")
    dec.add_argument("--lm-weight", type=float, default=0.0)
    dec.add_argument("--gamma", type=float, help="override checkpoint gamma")
    dec.add_argument("--threshold", type=float, default=0.5)
    dec.set_defaults(func=_cmd_decode)

    rr = sub.add_parser("rerank", help="pick 1-best from decoded n-best lists")
    rr.add_argument("--nbest", required=True, help="JSONL produced by decode --nbest-out")
    rr.add_argument("--source", required=True, help="source sentences, one per line")
    rr.add_argument("--lm")
    rr.add_argument("--out", required=True)
    rr.add_argument("--w-model", type=float, default=1.0)
    rr.add_argument("--w-lm", type=float, default=0.0)
    rr.add_argument("--w-ins", type=float, default=0.0)
    rr.add_argument("--w-del", type=float, default=0.0)
    rr.add_argument("--w-sub", type=float, default=0.0)
    rr.set_defaults(func=_cmd_rerank)

    # evaluate m2|gleu|bleu
    ev = sub.add_parser("evaluate", help="score system output").add_subparsers(
        dest="action", required=True
    )
    em = ev.add_parser("m2")
    em.add_argument("--sys", required=True)
    em.add_argument("--gold", required=True, help="S/A formatted gold edits")
    em.add_argument("--report", help="JSON report path")
    em.set_defaults(func=_cmd_eval_m2)
    eg = ev.add_parser("gleu")
    eg.add_argument("--sys", required=True)
    eg.add_argument("--src", required=True)
    eg.add_argument("--ref", required=True, action="append")
    eg.add_argument("--report")
    eg.set_defaults(func=_cmd_eval_gleu)
    eb = ev.add_parser("bleu")
    eb.add_argument("--sys", required=True)
    eb.add_argument("--ref", required=True, action="append")
    eb.add_argument("--report")
    eb.set_defaults(func=_cmd_eval_bleu)

    # lr-curve
    lr = sub.add_parser("lr-curve", help="emit a step,lr CSV for a phase config")
    lr.add_argument("--config", required=True, help=f"preset ({', '.join(sorted(PRESETS))}) or JSON path")
    lr.add_argument("--steps", type=int, required=True)
    lr.add_argument("--out", help="CSV path (default stdout)")
    lr.set_defaults(func=_cmd_lr_curve)

    # experiment stvsptft
    ex = sub.add_parser("experiment", help="packaged experiments").add_subparsers(
        dest="action", required=True
    )
    sv = ex.add_parser("stvsptft", help="simultaneous vs. two-phase training comparison")
    sv.add_argument("--gold-size", type=int, default=200)
    sv.add_argument("--aug-size", type=int, default=10000)
    sv.add_argument("--probes", type=int, default=100)
    sv.add_argument("--spurious-fraction", type=float, default=0.1)
    sv.add_argument("--gamma", type=float, default=0.1)
    sv.add_argument("--out", help="write the JSON report here as well")
    sv.set_defaults(func=_cmd_experiment)

    return parser


# --- command implementations -------------------------------------------------


def _cmd_lm_train(args) -> int:
    sentences = [s for s in read_sentences(args.corpus) if s]
    model = train_lm(sentences, order=args.order, discount=args.discount)
    save_lm(model, args.out, fmt=args.format)
    log.info("trained order-%d model on %d sentences -> %s", args.order, len(sentences), args.out)
    return 0


def _cmd_lm_score(args) -> int:
    model = load_lm(args.lm)
    rows = []
    for s in read_sentences(args.input):
        if not s:
            rows.append({"sentence": "", "entropy": None, "fluency": None})
            continue
        h = entropy(model, s)
        rows.append({"sentence": s.text, "entropy": h, "fluency": 1.0 / (1.0 + h)})
    if args.json:
        print(json.dumps(rows, indent=2, sort_keys=True))
    else:
        for row in rows:
            if row["entropy"] is None:
                print("<empty>")
            else:
                print(f"H={row['entropy']:.6f}\tf={row['fluency']:.6f}\t{row['sentence']}")
    return 0


def _cmd_clf_train(args) -> int:
    formal = [s for s in read_sentences(args.formal) if s]
    informal = [s for s in read_sentences(args.informal) if s]
    clf = train_formality_classifier(formal, informal)
    save_classifier(clf, args.out)
    log.info("trained classifier on %d formal / %d informal", len(formal), len(informal))
    return 0


def _cmd_clf_score(args) -> int:
    clf = load_classifier(args.clf)
    rows = [
        {"sentence": s.text, "formality": clf.prob(s)} for s in read_sentences(args.input) if s
    ]
    if args.json:
        print(json.dumps(rows, indent=2, sort_keys=True))
    else:
        for row in rows:
            print(f"P+={row['formality']:.6f}\t{row['sentence']}")
    return 0


def _cmd_augment_bt(args) -> int:
    ckpt = load_checkpoint(args.generator)
    lm = load_lm(args.lm)
    config = DecodeConfig(
        nbest=args.n,
        lm_weight=args.lm_weight,
        edit_threshold=args.threshold,
        gamma=ckpt.gamma,
    )
    generator = RewriterGenerator(ckpt.table, lm, config)
    targets = [s for s in read_sentences(args.targets) if s]
    corpus = back_translate(generator, targets, args.n, lm, threads=args.threads)
    write_corpus(corpus, args.out)
    log.info("back translation kept %d/%d pairs", len(corpus), len(targets))
    return 0


def _cmd_augment_roundtrip(args) -> int:
    clf = load_classifier(args.clf)
    if args.mock_map:
        with open(args.mock_map, "r", encoding="utf-8") as fh:
            client = MockRoundTripClient(json.load(fh), pivot=args.pivot)
    else:
        endpoint = os.environ.get(ENV_ENDPOINT, "")
        if not endpoint:
            raise UsageError(
                f"no round-trip endpoint: set {ENV_ENDPOINT} (and {ENV_TOKEN}) or use --mock-map"
            )
        client = HttpRoundTripClient(
            endpoint, os.environ.get(ENV_TOKEN, ""), pivot=args.pivot
        )
    sentences = [s for s in read_sentences(args.input) if s]
    result = round_trip_augment(client, sentences, clf, args.sigma, args.max_inflight)
    write_corpus(result.corpus, args.out)
    if args.report:
        write_decisions(result.decisions, args.report)
    if result.failures:
        for failure in result.failures:
            log.error("sentence %d failed: %s", failure.index, failure.error)
        print(
            json.dumps({"failed": [f.to_dict() for f in result.failures]}, sort_keys=True),
            file=sys.stderr,
        )
        return 2
    log.info("round trip kept %d/%d pairs", len(result.corpus), len(sentences))
    return 0


def _cmd_augment_noise(args) -> int:
    cfg = NoiserConfig(
        article_drop=args.rate_article,
        preposition_sub=args.rate_prep,
        noun_number=args.rate_noun,
        verb_form=args.rate_verb,
        swap_adjacent=args.rate_swap,
        seed=args.seed,
    )
    corpus = synthesize_errors(cfg, [s for s in read_sentences(args.input) if s])
    write_corpus(corpus, args.out)
    return 0


def _cmd_augment_multitask(args) -> int:
    corpus = ingest_multitask(read_corpus(args.corpus), args.task)
    write_corpus(corpus, args.out)
    return 0


def _cmd_filter_fluency(args) -> int:
    lm = load_lm(args.lm)
    pairs = read_corpus(args.pairs)
    kept, decisions = fluency_filter(pairs, lm, threads=args.threads)
    write_corpus(kept, args.out)
    if args.report:
        write_decisions(decisions, args.report)
    print(f"retained {len(kept)}/{len(pairs)}")
    return 0


def _cmd_filter_formality(args) -> int:
    clf = load_classifier(args.clf)
    pairs = read_corpus(args.pairs)
    kept, decisions = formality_filter(pairs, clf, args.sigma, threads=args.threads)
    write_corpus(kept, args.out)
    if args.report:
        write_decisions(decisions, args.report)
    print(f"retained {len(kept)}/{len(pairs)}")
    return 0


def _cmd_sample_down(args) -> int:
    aug = read_corpus(args.aug)
    orig = read_corpus(args.orig)
    write_corpus(down_sample(aug, orig, args.seed), args.out)
    return 0


def _cmd_sample_up(args) -> int:
    orig = read_corpus(args.orig)
    aug = read_corpus(args.aug)
    write_corpus(up_sample(orig, aug), args.out)
    return 0


def _cmd_manifest(args) -> int:
    entries = []
    for spec in args.slice:
        parts = spec.split(":")
        if len(parts) not in (3, 4):
            raise UsageError(f"bad slice spec {spec!r}, expected NAME:PATH:ROLE[:WEIGHT]")
        weight = float(parts[3]) if len(parts) == 4 else 1.0
        entries.append((parts[0], parts[1], parts[2], weight))
    manifest = build_manifest(entries)
    write_manifest(manifest, args.out)
    return 0


def _cmd_train(args) -> int:
    recipe = read_recipe(args.recipe)
    ckpt = run_recipe(recipe)
    save_checkpoint(ckpt, args.out)
    log.info("trained %s -> %s (fingerprint %s)", recipe.mode, args.out, ckpt.fingerprint[:12])
    return 0


def _cmd_decode(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    lm = load_lm(args.lm) if args.lm else None
    gamma = args.gamma if args.gamma is not None else ckpt.gamma
    config = DecodeConfig(
        nbest=args.nbest,
        lm_weight=args.lm_weight,
        edit_threshold=args.threshold,
        gamma=gamma,
    )
    best_lines = []
    nbest_rows = []
    for s in read_sentences(args.input):
        if not s:
            best_lines.append(s)
            nbest_rows.append([])
            continue
        candidates = decode(ckpt.table, lm, s, config)
        best_lines.append(candidates[0].sentence)
        nbest_rows.append([c.to_dict() for c in candidates])
    write_sentences(best_lines, args.out)
    if args.nbest_out:
        with open(args.nbest_out, "w", encoding="utf-8") as fh:
            for row in nbest_rows:
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    return 0


def _cmd_rerank(args) -> int:
    sources = read_sentences(args.source)
    lm = load_lm(args.lm) if args.lm else None
    weights = RerankWeights(args.w_model, args.w_lm, args.w_ins, args.w_del, args.w_sub)
    outputs = []
    with open(args.nbest, "r", encoding="utf-8") as fh:
        rows = [json.loads(line) for line in fh if line.strip()]
    if len(rows) != len(sources):
        raise ValueError(f"nbest/source length mismatch: {len(rows)} vs {len(sources)}")
    for source, row in zip(sources, rows):
        if not row:
            outputs.append(source)
            continue
        candidates = [ScoredCandidate.from_dict(c) for c in row]
        outputs.append(rerank(candidates, source, lm, weights).sentence)
    write_sentences(outputs, args.out)
    return 0


def _print_report(report, args) -> None:
    if args.json:
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        print(f"{report.name} = {report.value:.4f}")
    if getattr(args, "report", None):
        from .metrics import write_report

        write_report(report, args.report)


def _cmd_eval_m2(args) -> int:
    system = [s for s in read_sentences(args.sys)]
    gold = read_gold_annotations(args.gold)
    report = m2_score(system, gold)
    _print_report(report, args)
    return 0


def _cmd_eval_gleu(args) -> int:
    system = read_sentences(args.sys)
    sources = read_sentences(args.src)
    ref_files = [read_sentences(p) for p in args.ref]
    for refs in ref_files:
        if len(refs) != len(system):
            raise ValueError(
                f"reference/system length mismatch: {len(refs)} vs {len(system)}"
            )
    references = [[refs[i] for refs in ref_files] for i in range(len(system))]
    report = gleu(system, sources, references)
    _print_report(report, args)
    return 0


def _cmd_eval_bleu(args) -> int:
    system = read_sentences(args.sys)
    ref_files = [read_sentences(p) for p in args.ref]
    for refs in ref_files:
        if len(refs) != len(system):
            raise ValueError(
                f"reference/system length mismatch: {len(refs)} vs {len(system)}"
            )
    references = [[refs[i] for refs in ref_files] for i in range(len(system))]
    report = bleu(system, references)
    _print_report(report, args)
    return 0


def _cmd_lr_curve(args) -> int:
    if args.config in PRESETS:
        cfg = PRESETS[args.config]
    else:
        from .trainer import PhaseConfig

        with open(args.config, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        cfg = PhaseConfig(
            float(payload["lr_base"]),
            int(payload["warmup_steps"]),
            int(payload["total_steps"]),
            float(payload.get("dropout", 0.0)),
        )
    lines = ["step,lr"] + [f"{step},{lr!r}" for step, lr in lr_curve(cfg, args.steps)]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        print(text, end="")
    return 0


def _cmd_experiment(args) -> int:
    config = ScenarioConfig(
        seed=args.seed,
        gold_size=args.gold_size,
        aug_size=args.aug_size,
        probe_size=args.probes,
        spurious_fraction=args.spurious_fraction,
        gamma=args.gamma,
    )
    report = run_experiment(config)
    if args.json:
        print(report.to_json())
    else:
        print(report.table())
    if args.out:
        Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    inputs = [
        v
        for k, v in vars(args).items()
        if isinstance(v, str) and k not in ("command", "action") and Path(v).is_file()
    ]
    log.info("run fingerprint %s", _fingerprint(args, inputs))
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (CorpusFormatError, FileNotFoundError, ValueError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
