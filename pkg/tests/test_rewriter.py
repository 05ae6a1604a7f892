import itertools
import math

import pytest
from hypothesis import given, settings, strategies as st

from rewritekit.corpus import Corpus, ParallelPair, Sentence, tokenize
from rewritekit.rewriter import (
    FINETUNE,
    PRETRAIN,
    DecodeConfig,
    EditRule,
    RuleTable,
    decode,
    learn_rules,
    load_rules,
    rule_prob,
    save_rules,
)


def pair(src, tgt, weight=1.0):
    return ParallelPair(tokenize(src), tokenize(tgt), weight=weight)


def test_identical_pairs_produce_only_keep_evidence():
    table = learn_rules(Corpus([pair("a b c", "a b c")] * 3), FINETUNE)
    assert table.rules() == []
    assert table.keep_count(("a",), FINETUNE) == 3.0
    assert table.keep_count(("a", "b"), FINETUNE) == 3.0
    assert table.keep_count(("a", "b", "c"), FINETUNE) == 3.0


def test_single_substitution_rule_learned():
    table = learn_rules(Corpus([pair("companies", "company")]), FINETUNE)
    rule = EditRule(("companies",), ("company",))
    assert table.edit_count(rule, FINETUNE) == 1.0
    assert table.edit_count(rule, PRETRAIN) == 0.0


def test_counts_additive_across_calls():
    corpus = Corpus([pair("a b", "a x")])
    table = learn_rules(corpus, FINETUNE)
    learn_rules(corpus, FINETUNE, table)
    rule = EditRule(("b",), ("x",))
    assert table.edit_count(rule, FINETUNE) == 2.0
    # Merging two single-pass tables gives the same counts.
    merged = learn_rules(corpus, FINETUNE).merge(learn_rules(corpus, FINETUNE))
    assert merged.edit_count(rule, FINETUNE) == 2.0
    assert merged.keep_count(("a",), FINETUNE) == table.keep_count(("a",), FINETUNE)


def test_pair_weight_scales_counts():
    table = learn_rules(Corpus([pair("a b", "a x", weight=2.5)]), PRETRAIN)
    assert table.edit_count(EditRule(("b",), ("x",)), PRETRAIN) == 2.5
    assert table.keep_count(("a",), PRETRAIN) == 2.5


def test_phase_registers_are_isolated():
    corpus = Corpus([pair("a b", "a x")])
    table = learn_rules(corpus, PRETRAIN)
    before_ft = dict(table._edit[FINETUNE])
    learn_rules(corpus, PRETRAIN, table)
    assert table._edit[FINETUNE] == before_ft
    before_pre = dict(table._edit[PRETRAIN])
    learn_rules(corpus, FINETUNE, table)
    assert table._edit[PRETRAIN] == before_pre


def test_insert_rules_anchor_on_left_neighbor():
    table = learn_rules(Corpus([pair("a c", "a b c")]), FINETUNE)
    rule = EditRule(("a",), ("a", "b"))
    assert table.edit_count(rule, FINETUNE) == 1.0
    # The anchor token is covered by the rule: no keep evidence for ("a",).
    assert table.keep_count(("a",), FINETUNE) == 0.0
    assert table.keep_count(("c",), FINETUNE) == 1.0


def test_insert_at_sentence_start_anchors_right():
    table = learn_rules(Corpus([pair("b", "a b")]), FINETUNE)
    rule = EditRule(("b",), ("a", "b"))
    assert table.edit_count(rule, FINETUNE) == 1.0


def test_rule_prob_blending_arithmetic():
    table = RuleTable()
    rule = EditRule(("x",), ("y",))
    table.add_edit(rule, PRETRAIN, 10.0)
    table.add_keep(("x",), FINETUNE, 5.0)
    p = rule_prob(table, rule, gamma=0.1, alpha=0.1)
    assert p == pytest.approx((1.0 + 0.1) / (1.0 + 5.0 + 0.2), abs=1e-12)
    assert p == pytest.approx(0.17742, abs=1e-5)


def test_rule_prob_gamma_extremes():
    table = RuleTable()
    rule = EditRule(("x",), ("y",))
    table.add_edit(rule, PRETRAIN, 4.0)
    table.add_edit(rule, FINETUNE, 1.0)
    table.add_keep(("x",), PRETRAIN, 2.0)
    table.add_keep(("x",), FINETUNE, 3.0)
    alpha = 0.1
    # gamma=1 pools the registers; gamma=0 sees only fine-tuning counts.
    assert rule_prob(table, rule, 1.0, alpha) == pytest.approx(
        (5.0 + alpha) / (5.0 + 5.0 + 2 * alpha)
    )
    assert rule_prob(table, rule, 0.0, alpha) == pytest.approx(
        (1.0 + alpha) / (1.0 + 3.0 + 2 * alpha)
    )


def test_decode_empty_table_identity_only():
    table = RuleTable()
    out = decode(table, None, tokenize("a b c"), DecodeConfig(nbest=5))
    assert len(out) == 1
    assert out[0].sentence == tokenize("a b c")
    assert out[0].edits == ()
    assert out[0].model_score == 0.0


def _one_rule_table(edit_ft=9.0, keep_ft=1.0):
    table = RuleTable()
    table.add_edit(EditRule(("b",), ("x",)), FINETUNE, edit_ft)
    table.add_keep(("b",), FINETUNE, keep_ft)
    return table


def test_decode_two_candidate_hand_scores():
    # p = (9 + 0.1) / (9 + 1 + 0.2) = 0.890625 -> apply beats skip.
    table = _one_rule_table()
    out = decode(table, None, tokenize("a b"), DecodeConfig(nbest=4, gamma=0.1))
    assert [c.sentence.text for c in out] == ["a x", "a b"]
    p = (9 + 0.1) / (9 + 1 + 0.2)
    assert out[0].model_score == pytest.approx(math.log(p), abs=1e-12)
    assert out[1].model_score == pytest.approx(math.log(1 - p), abs=1e-12)


def test_decode_threshold_excludes_weak_rules():
    table = _one_rule_table(edit_ft=1.0, keep_ft=9.0)  # p ~= 0.108
    out = decode(table, None, tokenize("a b"), DecodeConfig(nbest=4, edit_threshold=0.5))
    assert [c.sentence.text for c in out] == ["a b"]


def test_decode_candidates_reconstruct_from_edits():
    from rewritekit.edits import apply_edits

    table = RuleTable()
    table.add_edit(EditRule(("b",), ("x",)), FINETUNE, 5.0)
    table.add_edit(EditRule(("d",), ("y", "z")), FINETUNE, 5.0)
    source = tokenize("a b c d")
    for cand in decode(table, None, source, DecodeConfig(nbest=10)):
        assert apply_edits(list(cand.edits), source) == cand.sentence


def test_decode_identity_top1_when_rules_below_half():
    # All rule probabilities < 0.5 and no LM: no-edit wins every time.
    table = RuleTable()
    table.add_edit(EditRule(("b",), ("x",)), FINETUNE, 2.0)
    table.add_keep(("b",), FINETUNE, 3.0)
    table.add_edit(EditRule(("c",), ("y",)), FINETUNE, 1.0)
    table.add_keep(("c",), FINETUNE, 2.0)
    out = decode(table, None, tokenize("a b c"), DecodeConfig(nbest=8, edit_threshold=0.0))
    assert out[0].sentence == tokenize("a b c")


def brute_force_decode(table, source, config):
    """Independent enumeration of every valid application subset."""
    from rewritekit.rewriter import _matched_rules

    matches = _matched_rules(table, source, config)
    results = []
    for mask in itertools.product([False, True], repeat=len(matches)):
        chosen = [m for m, used in zip(matches, mask) if used]
        spans = [(m.start, m.end) for m in chosen]
        ok = all(
            a_end <= b_start or b_end <= a_start
            for (a_start, a_end), (b_start, b_end) in itertools.combinations(spans, 2)
        )
        if not ok:
            continue
        score = sum(m.log_p for m in chosen) + sum(
            m.log_not for m, used in zip(matches, mask) if not used
        )
        tokens = []
        idx = 0
        for m in sorted(chosen, key=lambda m: m.start):
            tokens.extend(source.tokens[idx : m.start])
            tokens.extend(m.rule.target)
            idx = m.end
        tokens.extend(source.tokens[idx:])
        results.append((Sentence.from_tokens(tokens), score, len(chosen)))
    results.sort(key=lambda r: (-r[1], r[2], r[0].text))
    return results


def test_decode_equals_bruteforce_enumeration():
    table = RuleTable()
    table.add_edit(EditRule(("b",), ("x",)), FINETUNE, 3.0)
    table.add_keep(("b",), FINETUNE, 1.0)
    table.add_edit(EditRule(("d",), ("w",)), FINETUNE, 2.0)
    table.add_keep(("d",), FINETUNE, 1.0)
    table.add_edit(EditRule(("f",), ("v", "u")), FINETUNE, 4.0)
    source = tokenize("a b c d e f")
    config = DecodeConfig(nbest=64, beam=4096, edit_threshold=0.0)
    got = decode(table, None, source, config)
    expected = brute_force_decode(table, source, config)
    assert len(got) == len(expected) == 8  # 2^3 subsets, all compatible
    for cand, (sentence, score, n_edits) in zip(got, expected):
        assert cand.sentence == sentence
        assert cand.model_score == pytest.approx(score, abs=1e-12)
        assert len(cand.edits) == n_edits


def test_decode_bruteforce_with_overlapping_spans():
    # Two rules over overlapping spans: subsets applying both are invalid.
    table = RuleTable()
    table.add_edit(EditRule(("a", "b"), ("x",)), FINETUNE, 3.0)
    table.add_edit(EditRule(("b", "c"), ("y",)), FINETUNE, 3.0)
    source = tokenize("a b c")
    config = DecodeConfig(nbest=16, beam=1024, edit_threshold=0.0)
    got = decode(table, None, source, config)
    expected = brute_force_decode(table, source, config)
    assert len(got) == len(expected) == 3
    for cand, (sentence, score, _) in zip(got, expected):
        assert cand.sentence == sentence
        assert cand.model_score == pytest.approx(score, abs=1e-12)


def test_decode_context_rule_requires_left_token():
    table = RuleTable()
    table.add_edit(EditRule(("b",), ("x",), context="a"), FINETUNE, 9.0)
    out_match = decode(table, None, tokenize("a b"), DecodeConfig(nbest=4))
    assert out_match[0].sentence.text == "a x"
    out_nomatch = decode(table, None, tokenize("c b"), DecodeConfig(nbest=4))
    assert [c.sentence.text for c in out_nomatch] == ["c b"]


def test_decode_nbest_truncation_and_order():
    table = RuleTable()
    for i, (src, tgt) in enumerate([("b", "x"), ("c", "y"), ("d", "z")]):
        table.add_edit(EditRule((src,), (tgt,)), FINETUNE, 2.0 + i)
        table.add_keep((src,), FINETUNE, 1.0)
    out = decode(table, None, tokenize("b c d"), DecodeConfig(nbest=3, edit_threshold=0.0))
    assert len(out) == 3
    scores = [c.score for c in out]
    assert scores == sorted(scores, reverse=True)


def test_decode_lm_term_changes_ranking():
    class PreferX:
        def log_prob(self, token, context=()):
            return math.log(0.9) if token == "x" else math.log(0.1)

    table = RuleTable()
    table.add_edit(EditRule(("b",), ("x",)), FINETUNE, 1.0)
    table.add_keep(("b",), FINETUNE, 1.0)  # p = 0.5: model indifferent
    no_lm = decode(table, None, tokenize("b"), DecodeConfig(nbest=2, edit_threshold=0.4))
    with_lm = decode(
        table, PreferX(), tokenize("b"),
        DecodeConfig(nbest=2, edit_threshold=0.4, lm_weight=1.0),
    )
    assert with_lm[0].sentence.text == "x"
    assert {c.sentence.text for c in no_lm} == {"b", "x"}


def test_decode_beam_pruning_keeps_identity():
    # Six confident rules explode to 2^6 states; a beam of 4 must still
    # carry the no-edit path through.
    table = RuleTable()
    tokens = ["t0", "t1", "t2", "t3", "t4", "t5"]
    for t in tokens:
        table.add_edit(EditRule((t,), (t + "x",)), FINETUNE, 9.0)
        table.add_keep((t,), FINETUNE, 1.0)
    source = Sentence.from_tokens(tokens)
    out = decode(table, None, source, DecodeConfig(nbest=64, beam=4))
    assert any(c.edits == () for c in out)


def test_long_span_edits_produce_no_rules_but_cover_keeps():
    # A 4-token rewrite exceeds the rule n-gram cap: nothing is learned for
    # it, and the covered span contributes no keep evidence either.
    table = learn_rules(Corpus([pair("a b c d e", "w x y z e")]), FINETUNE)
    assert table.rules() == []
    assert table.keep_count(("a",), FINETUNE) == 0.0
    assert table.keep_count(("e",), FINETUNE) == 1.0


def test_rule_table_file_roundtrip(tmp_path):
    corpus = Corpus(
        [pair("a b c", "a x c"), pair("d e", "d e f"), pair("g h", "g h")]
    )
    table = learn_rules(corpus, PRETRAIN)
    learn_rules(Corpus([pair("a b", "a x", weight=0.5)]), FINETUNE, table)
    path = tmp_path / "rules.tsv"
    save_rules(table, path)
    loaded = load_rules(path)
    assert loaded.rules() == table.rules()
    for rule in table.rules():
        for phase in (PRETRAIN, FINETUNE):
            assert loaded.edit_count(rule, phase) == table.edit_count(rule, phase)
        assert rule_prob(loaded, rule) == rule_prob(table, rule)
    for phase in (PRETRAIN, FINETUNE):
        assert loaded._keep[phase] == table._keep[phase]


@settings(max_examples=30)
@given(
    st.lists(
        st.tuples(
            st.sampled_from(["a b c", "a b", "b c d", "c"]),
            st.sampled_from(["a x c", "a b", "b y d", "z"]),
        ),
        min_size=1,
        max_size=6,
    )
)
def test_learn_rules_deterministic(pairs_spec):
    corpus = Corpus([pair(s, t) for s, t in pairs_spec])
    t1 = learn_rules(corpus, FINETUNE)
    t2 = learn_rules(corpus, FINETUNE)
    assert t1.rules() == t2.rules()
    assert t1._edit == t2._edit
    assert t1._keep == t2._keep
