
import re
import string
from typing import Iterable, List, Tuple

# 描述文本的词序列，全部为小写且不含空白
TokenSeq = Tuple[str, ...]

# 编译标点符号移除正则表达式（仅ASCII标点）
_PUNCTUATION_PATTERN = re.compile(f'[{re.escape(string.punctuation)}]')


def normalize_text(raw: str) -> TokenSeq:
    """唯一的分词入口：小写、去标点、按空白切分"""
    if not raw:
        return ()
    text = raw.lower()
    text = _PUNCTUATION_PATTERN.sub(' ', text)
    return tuple(text.split())


class Tokenizer:
    """描述文本分词器，带缓存；同一语料中的描述会被反复打分"""

    def __init__(self, cache_size: int = 100000):

        self.cache_size = cache_size
        self._cache = {}

    def tokenize(self, text: str) -> TokenSeq:

        tokens = self._cache.get(text)
        if tokens is None:
            tokens = normalize_text(text)
            if len(self._cache) < self.cache_size:
                self._cache[text] = tokens
        return tokens

    def tokenize_all(self, texts: Iterable[str]) -> List[TokenSeq]:

        return [self.tokenize(text) for text in texts]
