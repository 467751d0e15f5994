"""Tokenizer, vocabulary and encoding tests."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from newsvane.text import (
    STOP_WORDS,
    Vocabulary,
    build_vocabulary,
    decode,
    encode_and_pad,
    load_vocabulary,
    save_vocabulary,
    tokenize,
    vocabulary_hash,
)


class TestTokenize:
    def test_punctuation_and_case(self):
        assert tokenize("Apple shares fall sharply: report") == [
            "apple", "shares", "fall", "sharply", "report",
        ]

    def test_stop_words_removed(self):
        assert tokenize("Stocks and bonds or gold") == ["stocks", "bonds", "gold"]

    def test_all_stop_words_gives_empty(self):
        assert tokenize("And the of") == []

    def test_symbols_stripped(self):
        assert tokenize("profit $5% gains >10 q2") == ["profit", "5", "gains", "10", "q2"]

    def test_punctuation_deleted_not_spaced(self):
        assert tokenize("don't panic-sell") == ["dont", "panicsell"]

    @given(st.text(max_size=80))
    @settings(max_examples=200, deadline=None)
    def test_token_properties(self, text):
        for tok in tokenize(text):
            assert tok
            assert tok == tok.lower()
            assert tok not in STOP_WORDS
            assert not any(ch.isspace() for ch in tok)


class TestVocabulary:
    def test_first_occurrence_order(self):
        vocab = build_vocabulary([["a", "b"], ["b", "c"]])
        assert vocab.word_to_index == {"a": 1, "b": 2, "c": 3}
        assert vocab.max_len == 2

    def test_single_token(self):
        vocab = build_vocabulary([["x"]])
        assert vocab.word_to_index == {"x": 1}
        assert vocab.max_len == 1

    def test_all_empty_errors(self):
        with pytest.raises(ValueError):
            build_vocabulary([[], []])

    def test_serialization_roundtrip(self, tmp_path):
        vocab = build_vocabulary([["alpha", "beta"], ["beta", "gamma", "alpha"]])
        path = tmp_path / "vocab.tsv"
        save_vocabulary(vocab, path)
        content = path.read_text()
        assert content.startswith("max_len=3\n")
        assert "alpha\t1" in content
        loaded = load_vocabulary(path)
        assert loaded == vocab
        assert vocabulary_hash(loaded) == vocabulary_hash(vocab)


class TestEncodeAndPad:
    VOCAB = Vocabulary(word_to_index={"a": 1, "b": 2, "c": 3}, max_len=4)

    def test_padding(self):
        enc = encode_and_pad(["a", "c"], self.VOCAB)
        assert enc.indices.tolist() == [1, 3, 0, 0]
        assert enc.true_len == 2

    def test_unknown_tokens_dropped(self):
        vocab = self.VOCAB.with_max_len(3)
        enc = encode_and_pad(["z"], vocab)
        assert enc.indices.tolist() == [0, 0, 0]
        assert enc.true_len == 0

    def test_truncation(self):
        vocab = self.VOCAB.with_max_len(3)
        enc = encode_and_pad(["a", "b", "c", "a", "b"], vocab)
        assert enc.indices.tolist() == [1, 2, 3]
        assert enc.true_len == 3

    def test_roundtrip_decode(self):
        enc = encode_and_pad(["b", "z", "a"], self.VOCAB)
        assert decode(enc, self.VOCAB) == ["b", "a"]

    @given(
        st.lists(st.sampled_from(["a", "b", "c", "zz", "qq"]), max_size=12),
        st.integers(min_value=1, max_value=6),
    )
    @settings(max_examples=200, deadline=None)
    def test_shape_and_order_properties(self, tokens, max_len):
        vocab = self.VOCAB.with_max_len(max_len)
        enc = encode_and_pad(tokens, vocab)
        assert enc.indices.shape == (max_len,)
        kept = [vocab.word_to_index[t] for t in tokens if t in vocab.word_to_index][:max_len]
        # word order of kept tokens preserved, zeros after true_len
        assert enc.indices[: enc.true_len].tolist() == kept
        assert not enc.indices[enc.true_len :].any()
        again = encode_and_pad(tokens, vocab)
        assert np.array_equal(enc.indices, again.indices)
