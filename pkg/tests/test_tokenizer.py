import pytest

from preprocess.ngrams import extract_ngrams, ngram_set
from preprocess.tokenizer import Tokenizer, normalize_text


class TestNormalizeText:

    def test_lowercase_and_punctuation(self):
        assert normalize_text("A Man, riding a WAVE!") == ("a", "man", "riding", "a", "wave")

    def test_punctuation_splits_words(self):
        assert normalize_text("surf-board's edge") == ("surf", "board", "s", "edge")

    def test_empty(self):
        assert normalize_text("") == ()
        assert normalize_text("  ...  ") == ()

    def test_non_ascii_kept(self):
        assert normalize_text("Naïve café") == ("naïve", "café")


class TestTokenizer:

    def test_cached_result_is_reused(self):
        tokenizer = Tokenizer()
        first = tokenizer.tokenize("A dog on a couch")
        assert tokenizer.tokenize("A dog on a couch") is first

    def test_cache_limit(self):
        tokenizer = Tokenizer(cache_size=0)
        assert tokenizer.tokenize("a b") == ("a", "b")
        assert tokenizer._cache == {}

    def test_tokenize_all_keeps_order(self):
        assert Tokenizer().tokenize_all(["B a", "c"]) == [("b", "a"), ("c",)]


class TestNgrams:

    def test_counts_every_order(self):
        counts = extract_ngrams(("a", "b", "a", "b"), 2)
        assert counts[1][("a",)] == 2
        assert counts[2][("a", "b")] == 2
        assert counts[2][("b", "a")] == 1
        assert set(counts) == {1, 2}

    def test_short_sequence_has_empty_high_orders(self):
        counts = extract_ngrams(("a", "b"), 4)
        assert sum(counts[3].values()) == 0
        assert sum(counts[4].values()) == 0

    def test_invalid_order(self):
        with pytest.raises(ValueError):
            extract_ngrams(("a",), 0)

    def test_ngram_set_matches_counts(self):
        seq = ("a", "man", "riding", "a", "man")
        counts = extract_ngrams(seq, 4)
        expected = set()
        for order in counts.values():
            expected.update(order)
        assert ngram_set(seq, 4) == expected
