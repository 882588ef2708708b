import os
import sys

import pytest

# 添加项目根目录到系统路径
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import config
from index.indexer import build_df
from utils.fixtures import make_fixture_corpus, write_fixture


@pytest.fixture(autouse=True)
def quiet(monkeypatch):
    monkeypatch.setattr(config, "VERBOSE", False)


@pytest.fixture(scope="session")
def fixture_corpus():
    return make_fixture_corpus()


@pytest.fixture(scope="session")
def fixture_df(fixture_corpus):
    records, _ = fixture_corpus
    return build_df(records, split_tag="all", threads=1)


@pytest.fixture
def fixture_dir(tmp_path):
    paths = write_fixture(str(tmp_path / "fixture"))
    paths["root"] = str(tmp_path)
    return paths
