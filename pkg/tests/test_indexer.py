import math

import pytest

import config
from index.indexer import DfIndexer, build_df
from index.storage import DfTable
from preprocess.tokenizer import normalize_text
from search.scorer import CiderParams
from utils.errors import EmptyCaptions, EmptyCorpus
from utils.file_loader import ImageRecord, Split

from oracle import make_records, oracle_df


class TestDocumentFrequency:

    def test_counts_images_not_captions(self):
        records = make_records({"1": ["a dog", "a dog running"], "2": ["a cat"]})
        table = build_df(records, threads=1)
        assert table.num_images == 2
        assert table.df(("dog",)) == 1
        assert table.df(("a",)) == 2
        assert table.df(("a", "dog")) == 1

    def test_idf(self):
        records = make_records({"1": ["a dog"], "2": ["a cat"], "3": ["a bird"], "4": ["a dog"]})
        table = build_df(records, threads=1)
        assert table.idf(("dog",)) == pytest.approx(math.log(2.0))
        assert table.idf(("a",)) == 0.0
        # 未出现的n-gram按df=1
        assert table.idf(("zebra",)) == pytest.approx(math.log(4.0))

    def test_matches_oracle(self, fixture_corpus):
        records, _ = fixture_corpus
        table = build_df(records, threads=1)
        expected = oracle_df([[normalize_text(c) for c in r.captions] for r in records])
        for gram, count in expected.items():
            assert table.df(gram) == count
        assert table.vocabulary_size() == len(expected)

    def test_max_order(self):
        records = make_records({"1": ["a b c d e"]})
        table = build_df(records, CiderParams(max_order=2), threads=1)
        assert table.max_order == 2
        assert table.df(("a", "b", "c")) == 0

    def test_independent_of_threads_and_batches(self, fixture_corpus, monkeypatch):
        records, _ = fixture_corpus
        single = build_df(records, threads=1)
        monkeypatch.setattr(config, "BATCH_SIZE", 7)
        assert build_df(records, threads=4) == single

    def test_empty_corpus(self):
        with pytest.raises(EmptyCorpus):
            build_df([])

    def test_image_without_captions(self):
        with pytest.raises(EmptyCaptions):
            DfIndexer().image_ngrams(ImageRecord("1", Split.TRAIN, ()))


class TestDfTableStorage:

    def test_save_and_load(self, tmp_path, fixture_corpus):
        records, _ = fixture_corpus
        table = build_df(records, split_tag="train", threads=1)
        path = str(tmp_path / "cache" / "df.pkl")
        table.save(path)
        loaded = DfTable.load(path)
        assert loaded == table
        assert loaded.split_tag == "train"

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            DfTable({}, 0)
