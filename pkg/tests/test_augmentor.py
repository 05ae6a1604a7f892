import pytest

from rewritekit.augmentor import (
    HttpRoundTripClient,
    MockRoundTripClient,
    NoiserConfig,
    back_translate,
    build_manifest,
    down_sample,
    ingest_multitask,
    load_slice,
    read_manifest,
    round_trip_augment,
    synthesize_errors,
    up_sample,
    write_manifest,
)
from rewritekit.corpus import Corpus, Origin, ParallelPair, Sentence, tokenize, write_corpus
from rewritekit.discriminator import train_formality_classifier
from rewritekit.ngram_lm import train_lm


class EchoGenerator:
    def generate(self, sentence, n):
        return [sentence] * n


class ListGenerator:
    """Fixed ranked candidate lists keyed by the target text."""

    def __init__(self, table, fail_on=()):
        self.table = table
        self.fail_on = set(fail_on)

    def generate(self, sentence, n):
        if sentence.text in self.fail_on:
            raise RuntimeError("generator exploded")
        return [tokenize(t) for t in self.table.get(sentence.text, [])][:n]


TRAIN_SENTENCES = [
    tokenize("the cat sat on the mat"),
    tokenize("the dog sat on a log"),
    tokenize("a cat saw the dog"),
    tokenize("the cat saw a mat"),
]
LM = train_lm(TRAIN_SENTENCES, order=2)


def test_back_translate_echo_generator_yields_nothing():
    out = back_translate(EchoGenerator(), [tokenize("the cat sat")], n=3, lm=LM)
    assert len(out) == 0


def test_back_translate_picks_first_qualifying_candidate():
    target = tokenize("the cat sat on the mat")
    # Candidate 1 echoes the target (tie, skipped); candidate 2 is degraded.
    gen = ListGenerator({target.text: [target.text, "cat zz the mat qq"]})
    out = back_translate(gen, [target], n=5, lm=LM)
    assert len(out) == 1
    pair = out[0]
    assert pair.target == target
    assert pair.source == tokenize("cat zz the mat qq")
    assert pair.origin == Origin.augmented("bt")


def test_back_translate_emits_at_most_one_pair_per_target():
    targets = [tokenize("the cat sat on the mat"), tokenize("a cat saw the dog")]
    gen = ListGenerator(
        {
            targets[0].text: ["zz qq ww", "yy xx vv"],
            targets[1].text: ["uu tt ss"],
        }
    )
    out = back_translate(gen, targets, n=4, lm=LM)
    assert len(out) <= len(targets)
    from rewritekit.ngram_lm import fluency

    for pair in out:
        assert fluency(LM, pair.source) < fluency(LM, pair.target)


def test_back_translate_generator_failure_skips_sentence(caplog):
    targets = [tokenize("the cat sat on the mat"), tokenize("a cat saw the dog")]
    gen = ListGenerator({targets[1].text: ["zz qq ww"]}, fail_on={targets[0].text})
    with caplog.at_level("WARNING"):
        out = back_translate(gen, targets, n=3, lm=LM)
    assert len(out) == 1
    assert out[0].target == targets[1]
    assert any("generator failed" in r.message for r in caplog.records)


def test_back_translate_validates_n():
    with pytest.raises(ValueError, match="n must be"):
        back_translate(EchoGenerator(), [], n=0, lm=LM)


def test_back_translate_with_reverse_trained_rewriter():
    # Default generator: the phrase-edit model trained target -> source,
    # i.e. on (clean, errorful) pairs, so decoding corrupts clean text.
    from rewritekit.rewriter import FINETUNE, DecodeConfig, RewriterGenerator, learn_rules

    reverse_pairs = Corpus(
        [
            ParallelPair(tokenize("they receive mail"), tokenize("they recieve mail")),
            ParallelPair(tokenize("we receive letters"), tokenize("we recieve letters")),
        ]
    )
    table = learn_rules(reverse_pairs, FINETUNE)
    generator = RewriterGenerator(table, config=DecodeConfig(gamma=1.0))
    clean_lm = train_lm(
        [tokenize("they receive mail"), tokenize("we receive letters")], order=2
    )
    targets = [tokenize("they receive mail")]
    out = back_translate(generator, targets, n=3, lm=clean_lm)
    assert len(out) == 1
    assert out[0].source == tokenize("they recieve mail")
    assert out[0].target == targets[0]


FORMAL = [tokenize(t) for t in ["you are welcome sir", "thank you kindly sir"]]
INFORMAL = [tokenize(t) for t in ["u r welcome lol", "thx lol"]]
CLF = train_formality_classifier(FORMAL, INFORMAL)


def test_round_trip_identity_mock_rejected_for_positive_sigma():
    client = MockRoundTripClient({})
    result = round_trip_augment(client, [tokenize("u r welcome lol")], CLF, sigma=0.25)
    assert len(result.corpus) == 0
    assert result.failures == []
    assert len(result.decisions) == 1


def test_round_trip_mock_mapping_retained_when_gain_clears_sigma():
    client = MockRoundTripClient({"u": "you", "r": "are", "lol": "sir", "thx": "thank"})
    informal = [tokenize("u r welcome lol")]
    result = round_trip_augment(client, informal, CLF, sigma=0.2)
    assert len(result.corpus) == 1
    pair = result.corpus[0]
    assert pair.source == informal[0]
    assert pair.target == tokenize("you are welcome sir")
    assert pair.origin == Origin.augmented("f-dis")
    gain = CLF.prob(pair.target) - CLF.prob(pair.source)
    assert gain >= 0.2


class FlakyClient:
    pivot = "zh"

    def __init__(self, fail_texts):
        self.fail_texts = set(fail_texts)

    def translate(self, sentence, from_lang, to_lang):
        if sentence.text in self.fail_texts:
            raise ConnectionError("unreachable endpoint")
        return sentence


def test_round_trip_transport_failures_reported_not_dropped():
    sentences = [tokenize("u r welcome lol"), tokenize("thx lol")]
    client = FlakyClient({sentences[0].text})
    result = round_trip_augment(client, sentences, CLF, sigma=0.0)
    assert len(result.failures) == 1
    assert result.failures[0].index == 0
    assert "unreachable" in result.failures[0].error
    # The surviving sentence still went through the filter.
    assert len(result.decisions) == 1
    assert len(result.decisions) + len(result.failures) == len(sentences)


def test_http_client_retries_then_succeeds():
    calls = []

    def transport(payload):
        calls.append(payload)
        if len(calls) < 3:
            raise OSError("boom")
        return {"text": payload["text"]}

    client = HttpRoundTripClient(
        "http://example.invalid", retries=3, backoff=0.0, transport=transport
    )
    out = client.translate(tokenize("hi there"), "en", "zh")
    assert out == tokenize("hi there")
    assert len(calls) == 3


def test_http_client_exhausts_retries():
    def transport(payload):
        raise OSError("nope")

    client = HttpRoundTripClient(
        "http://example.invalid", retries=1, backoff=0.0, transport=transport
    )
    with pytest.raises(RuntimeError, match="after 2 attempts"):
        client.translate(tokenize("hi"), "en", "zh")


def test_noiser_all_rates_zero_is_identity():
    cfg = NoiserConfig(seed=3)
    sentences = [tokenize("the cat sat on the mat"), tokenize("we went to the store")]
    out = synthesize_errors(cfg, sentences)
    for pair, original in zip(out, sentences):
        assert pair.source == original
        assert pair.target == original
        assert pair.origin == Origin.augmented("synth")


def test_noiser_article_drop_rate_one():
    cfg = NoiserConfig(article_drop=1.0, seed=0)
    out = synthesize_errors(cfg, [tokenize("the cat sat")])
    assert out[0].source == tokenize("cat sat")
    assert out[0].target == tokenize("the cat sat")


def test_noiser_same_seed_reproduces_bitwise(tmp_path):
    cfg = NoiserConfig(article_drop=0.3, preposition_sub=0.4, noun_number=0.2, seed=11)
    sentences = [tokenize(f"the cat sat on mat {i}") for i in range(20)]
    a = synthesize_errors(cfg, sentences)
    b = synthesize_errors(cfg, sentences)
    pa, pb = tmp_path / "a.tsv", tmp_path / "b.tsv"
    write_corpus(a, pa)
    write_corpus(b, pb)
    assert pa.read_bytes() == pb.read_bytes()


def test_noiser_different_seed_differs():
    cfg_a = NoiserConfig(preposition_sub=1.0, seed=1)
    cfg_b = NoiserConfig(preposition_sub=1.0, seed=2)
    sentences = [tokenize("we sat on the mat in the sun by a tree")] * 5
    out_a = [p.source for p in synthesize_errors(cfg_a, sentences)]
    out_b = [p.source for p in synthesize_errors(cfg_b, sentences)]
    assert out_a != out_b


def test_noiser_rejects_bad_rate():
    with pytest.raises(ValueError, match="rate"):
        NoiserConfig(article_drop=1.5)


def test_ingest_multitask_retags_pairs():
    corpus = Corpus(
        [
            ParallelPair(tokenize("he go"), tokenize("he goes"), Origin.gold()),
            ParallelPair(tokenize("she say"), tokenize("she says"), Origin.augmented("bt")),
        ]
    )
    out = ingest_multitask(corpus, "gec")
    assert all(p.origin == Origin.task("gec") for p in out)
    assert [p.source for p in out] == [p.source for p in corpus]


def test_ingest_multitask_empty_corpus():
    assert len(ingest_multitask(Corpus([]), "gec")) == 0


def test_ingest_multitask_rejects_empty_sides():
    corpus = Corpus([ParallelPair(Sentence.from_tokens([]), tokenize("x"))])
    with pytest.raises(ValueError, match="pair 0"):
        ingest_multitask(corpus, "gec")


def test_multitask_tags_survive_roundtrip(tmp_path):
    corpus = ingest_multitask(
        Corpus([ParallelPair(tokenize("he go"), tokenize("he goes"))]), "gec"
    )
    path = tmp_path / "c.tsv"
    write_corpus(corpus, path)
    from rewritekit.corpus import read_corpus

    assert read_corpus(path)[0].origin == Origin.task("gec")


def _corpus(n, prefix="p"):
    return Corpus(
        [ParallelPair(tokenize(f"{prefix}{i} src"), tokenize(f"{prefix}{i} tgt")) for i in range(n)]
    )


def test_down_sample_size_and_membership():
    aug, orig = _corpus(1000, "a"), _corpus(100, "o")
    out = down_sample(aug, orig, seed=5)
    assert len(out) == 100
    aug_set = set((p.source.text, p.target.text) for p in aug)
    assert all((p.source.text, p.target.text) in aug_set for p in out)


def test_down_sample_deterministic_per_seed():
    aug, orig = _corpus(50, "a"), _corpus(10, "o")
    assert down_sample(aug, orig, 7).pairs == down_sample(aug, orig, 7).pairs
    assert down_sample(aug, orig, 7).pairs != down_sample(aug, orig, 8).pairs


def test_down_sample_rejects_smaller_augmented():
    with pytest.raises(ValueError, match="down-sample"):
        down_sample(_corpus(5), _corpus(10), 0)


def test_up_sample_exact_replication():
    orig, aug = _corpus(100, "o"), _corpus(1000, "a")
    out = up_sample(orig, aug)
    assert len(out) == 1000
    from collections import Counter

    freq = Counter((p.source.text, p.target.text) for p in out)
    assert set(freq.values()) == {10}


def test_up_sample_equal_sizes_is_identity():
    orig, aug = _corpus(7, "o"), _corpus(7, "a")
    assert up_sample(orig, aug).pairs == orig.pairs


def test_up_sample_truncates_to_exact_size():
    orig, aug = _corpus(3, "o"), _corpus(7, "a")
    out = up_sample(orig, aug)
    assert len(out) == 7
    assert out.pairs == (orig.pairs * 3)[:7]


def test_manifest_build_and_roundtrip(tmp_path):
    gold_path, aug_path = tmp_path / "gold.tsv", tmp_path / "aug.tsv"
    write_corpus(_corpus(4, "g"), gold_path)
    write_corpus(_corpus(6, "a"), aug_path)
    manifest = build_manifest(
        [("gold", gold_path, "gold", 1.0), ("bt", aug_path, "augmented", 0.5)]
    )
    assert manifest.gold().size == 4
    assert manifest.augmented()[0].size == 6
    path = tmp_path / "manifest.json"
    write_manifest(manifest, path)
    loaded = read_manifest(path)
    assert loaded == manifest
    # Checksums change when the file changes.
    write_corpus(_corpus(5, "g"), gold_path)
    rebuilt = build_manifest(
        [("gold", gold_path, "gold", 1.0), ("bt", aug_path, "augmented", 0.5)]
    )
    assert rebuilt.gold().checksum != manifest.gold().checksum


def test_manifest_requires_single_gold(tmp_path):
    p = tmp_path / "c.tsv"
    write_corpus(_corpus(2), p)
    with pytest.raises(ValueError, match="exactly one gold"):
        build_manifest([("a", p, "augmented", 1.0)])
    with pytest.raises(ValueError, match="exactly one gold"):
        build_manifest([("g1", p, "gold", 1.0), ("g2", p, "gold", 1.0)])


def test_manifest_rejects_nonpositive_weight(tmp_path):
    p = tmp_path / "c.tsv"
    write_corpus(_corpus(2), p)
    with pytest.raises(ValueError, match="weight"):
        build_manifest([("g", p, "gold", 0.0)])


def test_load_slice_applies_weight(tmp_path):
    p = tmp_path / "c.tsv"
    write_corpus(_corpus(3), p)
    manifest = build_manifest([("g", p, "gold", 2.0)])
    corpus = load_slice(manifest.gold())
    assert all(pair.weight == 2.0 for pair in corpus)
