import pytest
from hypothesis import given, strategies as st

from rewritekit.corpus import (
    Corpus,
    CorpusFormatError,
    Origin,
    ParallelPair,
    Sentence,
    read_corpus,
    read_sentences,
    tokenize,
    write_corpus,
    write_sentences,
)


def test_tokenize_empty():
    assert tokenize("").tokens == ()


def test_tokenize_detaches_punctuation():
    assert tokenize("He said hi.").tokens == ("He", "said", "hi", ".")


def test_tokenize_collapses_whitespace():
    assert tokenize("a  b").tokens == ("a", "b")


def test_tokenize_leading_and_wrapping_punctuation():
    assert tokenize('"(hi!)" there').tokens == ('"', "(", "hi", "!", ")", '"', "there")


def test_tokenize_keeps_internal_punctuation():
    assert tokenize("don't stop a,b").tokens == ("don't", "stop", "a,b")


@given(st.text(max_size=80))
def test_tokenize_idempotent(raw):
    once = tokenize(raw)
    again = tokenize(" ".join(once.tokens))
    assert again.tokens == once.tokens


def test_sentence_length_and_text():
    s = tokenize("He said hi.")
    assert len(s) == 4
    assert s.text == "He said hi ."
    assert s == Sentence.from_tokens(["He", "said", "hi", "."])


def test_origin_variants():
    assert str(Origin.gold()) == "gold"
    assert str(Origin.augmented("bt")) == "augmented:bt"
    assert str(Origin.task("gec")) == "task:gec"
    assert Origin.parse("augmented:f-dis") == Origin.augmented("f-dis")
    with pytest.raises(ValueError):
        Origin.parse("nonsense")
    with pytest.raises(ValueError):
        Origin("augmented")


def test_pair_weight_validation():
    s = tokenize("a")
    with pytest.raises(ValueError):
        ParallelPair(s, s, weight=-0.5)


def _random_corpus_strategy():
    raw_text = st.text(
        alphabet=st.characters(whitelist_categories=("Lu", "Ll", "Nd", "Po")),
        min_size=0,
        max_size=30,
    )
    origin = st.sampled_from(
        [Origin.gold(), Origin.augmented("bt"), Origin.augmented("f-dis"), Origin.task("gec")]
    )
    weight = st.floats(min_value=0.0, max_value=10.0, allow_nan=False)
    pair = st.builds(
        lambda a, b, o, w: ParallelPair(tokenize(a), tokenize(b), o, w),
        raw_text,
        raw_text,
        origin,
        weight,
    )
    return st.lists(pair, max_size=12).map(Corpus)


@pytest.mark.parametrize("fmt", ["tsv", "jsonl"])
@given(corpus=_random_corpus_strategy())
def test_corpus_roundtrip(fmt, corpus, tmp_path_factory):
    path = tmp_path_factory.mktemp("corpus") / f"c.{fmt}"
    write_corpus(corpus, path, fmt)
    back = read_corpus(path, fmt)
    assert back.pairs == corpus.pairs


def test_tsv_field_defaults(tmp_path):
    path = tmp_path / "c.tsv"
    path.write_text("he go home\the goes home\n", encoding="utf-8")
    corpus = read_corpus(path)
    assert corpus[0].origin == Origin.gold()
    assert corpus[0].weight == 1.0


def test_tsv_malformed_line_names_lineno(tmp_path):
    path = tmp_path / "c.tsv"
    path.write_text("only-one-field\n", encoding="utf-8")
    with pytest.raises(CorpusFormatError, match=r":1:"):
        read_corpus(path)


def test_tsv_bad_weight_names_lineno(tmp_path):
    path = tmp_path / "c.tsv"
    path.write_text("a\tb\tgold\tnot-a-number\n", encoding="utf-8")
    with pytest.raises(CorpusFormatError, match=r":1:.*weight"):
        read_corpus(path)


def test_jsonl_missing_field_named(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text('{"source": "a"}\n', encoding="utf-8")
    with pytest.raises(CorpusFormatError, match=r"missing field 'target'"):
        read_corpus(path)


def test_jsonl_malformed_json_named(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text("{broken\n", encoding="utf-8")
    with pytest.raises(CorpusFormatError, match=r":1:"):
        read_corpus(path)


def test_sentence_file_roundtrip(tmp_path):
    path = tmp_path / "sents.txt"
    sents = [tokenize("He said hi."), tokenize("ok")]
    write_sentences(sents, path)
    assert read_sentences(path) == sents
