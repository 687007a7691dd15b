import math
import random

import pytest

from conftest import make_discussion
from deltanet.errors import IneligibleUserError
from deltanet.textfeat import (
    LANGUAGE_FEATURES,
    coarse_pos_tags,
    count_syllables,
    extract_language_features,
    flesch_kincaid,
    interplay_features,
    shannon_entropy,
    tokenize,
)


class TestTokenize:
    def test_punctuation_classes(self):
        ts = tokenize('Why? "Yes."')
        assert ts.tokens == ("why", "yes")
        assert ts.punctuation_counts["question_mark"] == 1
        assert ts.punctuation_counts["quotation_mark"] == 2
        assert ts.sentence_count == 2

    def test_urls_become_single_tokens(self):
        ts = tokenize("see https://x.y/z now")
        assert ts.tokens == ("see", "URL", "now")
        assert ts.n_urls == 1

    def test_empty_text(self):
        ts = tokenize("")
        assert ts.tokens == ()
        assert ts.sentence_count == 0

    def test_url_punctuation_not_counted(self):
        ts = tokenize("go to https://a.b/c?q=1 ok")
        assert ts.punctuation_counts["question_mark"] == 0
        assert ts.sentence_count == 1

    def test_sentence_floor_for_nonempty_token_stream(self):
        assert tokenize("hello").sentence_count == 1
        assert tokenize("https://x.y").sentence_count == 1


class TestEntropy:
    def test_single_type_zero(self):
        assert shannon_entropy(["a", "a", "a", "a"]) == 0.0

    def test_uniform_four_types(self):
        assert shannon_entropy(["a", "b", "c", "d"]) == pytest.approx(2.0)

    def test_two_to_one_split(self):
        expected = -(2 / 3) * math.log2(2 / 3) - (1 / 3) * math.log2(1 / 3)
        assert shannon_entropy(["a", "a", "b"]) == pytest.approx(expected, abs=1e-12)
        assert shannon_entropy(["a", "a", "b"]) == pytest.approx(0.9183, abs=1e-4)

    def test_empty_zero(self):
        assert shannon_entropy([]) == 0.0

    def test_bounds_on_random_token_streams(self):
        rng = random.Random(4)
        alphabet = ["w%d" % i for i in range(12)]
        for _ in range(200):
            tokens = [rng.choice(alphabet) for _ in range(rng.randint(1, 40))]
            h = shannon_entropy(tokens)
            assert 0.0 <= h <= math.log2(len(tokens)) + 1e-12


class TestPosTags:
    def test_rule_table_fixture(self):
        ts = tokenize("the cat ran quickly")
        assert coarse_pos_tags(ts) == ["DET", "NOUN", "VERB", "ADV"]

    def test_empty(self):
        assert coarse_pos_tags(tokenize("")) == []

    def test_closed_class_and_suffix_rules(self):
        ts = tokenize("i argued with 4 people about https://x.y because walking helped")
        tags = coarse_pos_tags(ts)
        assert tags == [
            "PRON", "VERB", "PREP", "NUM", "NOUN", "PREP", "URL", "CONJ", "VERB", "VERB",
        ]

    def test_identical_tags_give_zero_entropy(self):
        tags = coarse_pos_tags(tokenize("cat dog tree"))
        assert set(tags) == {"NOUN"}
        assert shannon_entropy(tags) == 0.0


class TestFleschKincaid:
    def test_six_word_sentence_grade(self):
        grade, ease = flesch_kincaid("The cat sat on the mat.")
        assert grade == pytest.approx(-1.45, abs=1e-9)
        assert ease == pytest.approx(116.145, abs=1e-9)

    def test_repetition_invariance(self):
        text = "The cat sat on the mat."
        g1, e1 = flesch_kincaid(text)
        for k in (2, 3, 5):
            gk, ek = flesch_kincaid(" ".join([text] * k))
            assert gk == pytest.approx(g1, abs=1e-12)
            assert ek == pytest.approx(e1, abs=1e-12)

    def test_zero_words_returns_nan(self):
        grade, ease = flesch_kincaid("?!")
        assert math.isnan(grade) and math.isnan(ease)

    def test_syllable_counter(self):
        assert count_syllables("the") == 1
        assert count_syllables("cat") == 1
        assert count_syllables("make") == 1
        assert count_syllables("example") == 3
        assert count_syllables("apple") == 2
        assert count_syllables("see") == 1
        assert count_syllables("xyz") == 1  # minimum-1 rule


class TestInterplay:
    def test_identical_sets(self):
        a = {"the", "cat", "sat"}
        assert interplay_features(a, set(a)) == (3, 1.0, 1.0, 1.0)

    def test_partial_overlap(self):
        a = {"the", "cat", "sat"}
        o = {"the", "dog"}
        common, rf, of, j = interplay_features(a, o)
        assert (common, rf, of, j) == (1, pytest.approx(1 / 3), 0.5, 0.25)

    def test_disjoint_sets(self):
        assert interplay_features({"a"}, {"b"}) == (0, 0.0, 0.0, 0.0)

    def test_empty_sets(self):
        assert interplay_features(set(), set()) == (0, 0.0, 0.0, 0.0)

    def test_symmetry_properties(self):
        rng = random.Random(9)
        universe = ["w%d" % i for i in range(20)]
        for _ in range(100):
            a = set(rng.sample(universe, rng.randint(0, 12)))
            o = set(rng.sample(universe, rng.randint(0, 12)))
            ca, rfa, ofa, ja = interplay_features(a, o)
            cb, rfb, ofb, jb = interplay_features(o, a)
            assert ja == jb and ca == cb
            assert rfa == ofb and ofa == rfb
            assert (ja == 0) == (ca == 0)


class TestExtract:
    def _single_comment_discussion(self, body, op_body="the topic of debate"):
        return make_discussion([("c1", "u1", "p1", 1, body)], body=op_body, title="")

    def test_lexicon_fixture(self, lexicons):
        d = self._single_comment_discussion("I think that, for example, we should.")
        vec = extract_language_features("u1", d, cutoff=10_000, lexicons=lexicons)
        assert vec.n_examples == 1
        assert vec.n_first_person == 1
        assert vec.n_first_person_plural == 1
        assert vec.n_hedges >= 1
        assert vec.n_words == 7
        assert vec.n_sentences == 1

    def test_missing_user_raises(self, lexicons):
        d = self._single_comment_discussion("hello")
        with pytest.raises(IneligibleUserError):
            extract_language_features("ghost", d, cutoff=10_000, lexicons=lexicons)
        with pytest.raises(IneligibleUserError):
            extract_language_features("u1", d, cutoff=d.comments[0].created_at, lexicons=lexicons)

    def test_counts_additive_and_order_invariant(self, lexicons):
        comments = [
            ("c1", "u1", "p1", 1, "I think the cat is great?"),
            ("c2", "u1", "p1", 2, 'for example "this" https://x.y'),
            ("c3", "u1", "p1", 3, "we agree on the premise."),
        ]
        d_fwd = make_discussion(comments)
        reordered = [
            (cid, author, parent, {1: 3, 2: 1, 3: 2}[dt], body)
            for cid, author, parent, dt, body in comments
        ]
        d_rev = make_discussion(reordered)
        v1 = extract_language_features("u1", d_fwd, 10_000, lexicons)
        v2 = extract_language_features("u1", d_rev, 10_000, lexicons)
        assert v1 == v2

    def test_appending_never_decreases_counts(self, lexicons):
        base = [("c1", "u1", "p1", 1, "I think the answer is maybe this?")]
        extended = base + [("c2", "u1", "p1", 2, 'we found "evidence" at https://x.y for example.')]
        v_base = extract_language_features("u1", make_discussion(base), 10_000, lexicons)
        v_ext = extract_language_features("u1", make_discussion(extended), 10_000, lexicons)
        count_fields = [f for f in LANGUAGE_FEATURES if f.startswith("n_")]
        for name in count_fields:
            assert getattr(v_ext, name) >= getattr(v_base, name)

    def test_word_entropy_bounded(self, lexicons):
        d = self._single_comment_discussion("one two three one two one")
        vec = extract_language_features("u1", d, 10_000, lexicons)
        assert 0.0 <= vec.word_entropy <= math.log2(vec.n_words)

    def test_overlap_against_op_text(self, lexicons):
        d = make_discussion(
            [("c1", "u1", "p1", 1, "the cat sat")],
            body="the dog", title="",
        )
        vec = extract_language_features("u1", d, 10_000, lexicons)
        assert vec.n_common_words == 1
        assert vec.reply_fraction == pytest.approx(1 / 3)
        assert vec.op_fraction == pytest.approx(1 / 2)
        assert vec.jaccard == pytest.approx(1 / 4)

    def test_cutoff_excludes_later_comments(self, lexicons):
        d = make_discussion([
            ("c1", "u1", "p1", 1, "早い words"),
            ("c2", "u1", "p1", 50, "later words much longer text here"),
        ])
        early = extract_language_features("u1", d, d.comments[1].created_at, lexicons)
        assert early.n_words == 2
