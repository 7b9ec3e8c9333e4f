import random
import string
from collections import Counter

import pytest
from hypothesis import given, strategies as st

from reviewfuse import textproc as tp
from reviewfuse.errors import ParameterError
from reviewfuse.textproc import (
    CLS_ID,
    PAD_ID,
    SEP_ID,
    UNK_ID,
    Vocabulary,
    build_vocab,
    normalize_text,
    tokenize,
)


class TestNormalize:
    def test_stated_rules(self):
        assert normalize_text("Great Service!!") == "great service"

    def test_whitespace_collapse(self):
        assert normalize_text("  A  B ") == "a b"

    def test_unicode_punctuation(self):
        assert normalize_text("so—called “fresh”") == "socalled fresh"

    @given(st.text(max_size=50))
    def test_idempotent(self, s):
        once = normalize_text(s)
        assert normalize_text(once) == once


class TestBuildVocab:
    def test_frequency_order(self):
        v = build_vocab(["a a b"], max_size=6)
        assert len(v) == 6
        assert v.lookup("a") == 4
        assert v.lookup("b") == 5

    def test_reserved_only(self):
        v = build_vocab(["x y z"], max_size=4)
        assert len(v) == 4
        assert v.lookup("x") == UNK_ID

    def test_max_size_too_small(self):
        with pytest.raises(ParameterError):
            build_vocab([], max_size=3)

    def test_matches_independent_counting(self):
        rng = random.Random(7)
        words = ["w%d" % rng.randrange(30) for _ in range(800)]
        docs = [" ".join(words[i:i + 16]) for i in range(0, 800, 16)]
        v = build_vocab(docs, max_size=200)
        # independent counting pass
        counts = Counter(w for d in docs for w in d.split())
        expected = sorted(counts, key=lambda w: (-counts[w], w))
        assert v.id_to_token[4:] == expected

    def test_min_count_filters(self):
        v = build_vocab(["rare common common"], max_size=10, min_count=2)
        assert v.lookup("common") != UNK_ID
        assert v.lookup("rare") == UNK_ID

    def test_save_load_roundtrip(self, tmp_path):
        v = build_vocab(["alpha beta beta gamma"], max_size=10)
        p = tmp_path / "vocab.txt"
        v.save(p)
        v2 = Vocabulary.load(p)
        assert v2.id_to_token == v.id_to_token


class TestTokenize:
    @pytest.fixture
    def vocab(self):
        return build_vocab(["great service food was cold"], max_size=20)

    def test_direct_assembly(self, vocab):
        r = tokenize(vocab, "great service", max_len=6)
        g, s = vocab.lookup("great"), vocab.lookup("service")
        assert r.ids == [CLS_ID, g, s, SEP_ID, PAD_ID, PAD_ID]
        assert r.mask == [1, 1, 1, 1, 0, 0]
        assert r.true_length == 4

    def test_empty_text(self, vocab):
        r = tokenize(vocab, "", max_len=5)
        assert r.ids[:2] == [CLS_ID, SEP_ID]
        assert r.true_length == 2
        assert all(i == PAD_ID for i in r.ids[2:])

    def test_long_review_truncated(self, vocab):
        text = " ".join("word%d" % i for i in range(300))
        r = tokenize(vocab, text, max_len=128)
        assert r.true_length == 128
        assert r.ids[0] == CLS_ID
        assert r.ids[127] == SEP_ID
        assert sum(r.mask) == 128

    def test_min_len(self, vocab):
        with pytest.raises(ParameterError):
            tokenize(vocab, "x", max_len=2)

    def test_unknown_words_map_to_unk(self, vocab):
        r = tokenize(vocab, "zzz great", max_len=8)
        assert r.ids[1] == UNK_ID

    @given(st.text(max_size=80), st.integers(min_value=3, max_value=20))
    def test_mask_sums_to_true_length(self, text, max_len):
        v = build_vocab(["some words here"], max_size=10)
        r = tokenize(v, text, max_len=max_len)
        assert sum(r.mask) == r.true_length
        assert len(r.ids) == len(r.mask) == max_len
        assert all(0 <= i < len(v) for i in r.ids)
        # mask is a prefix of ones
        assert r.mask == sorted(r.mask, reverse=True)

    def test_truncation_preserves_prefix(self, vocab):
        text = " ".join("great service food was cold".split() * 10)
        full = [vocab.lookup(w) for w in text.split()]
        r = tokenize(vocab, text, max_len=12)
        assert r.ids[1:11] == full[:10]
