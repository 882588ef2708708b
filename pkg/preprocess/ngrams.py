
from collections import Counter
from typing import Dict, Tuple

from .tokenizer import TokenSeq

NGram = Tuple[str, ...]
# 阶数 -> {n-gram: 出现次数}
NGramCounts = Dict[int, Counter]


def extract_ngrams(seq: TokenSeq, max_order: int) -> NGramCounts:
    """统计1..max_order阶的所有连续n-gram，键统一为元组"""
    if max_order < 1:
        raise ValueError(f"max_order必须不小于1: {max_order}")

    tokens = tuple(seq)
    counts = {}
    for n in range(1, max_order + 1):
        order_counts = Counter()
        for i in range(len(tokens) - n + 1):
            order_counts[tokens[i:i + n]] += 1
        counts[n] = order_counts
    return counts


def ngram_set(seq: TokenSeq, max_order: int) -> set:

    grams = set()
    tokens = tuple(seq)
    for n in range(1, max_order + 1):
        for i in range(len(tokens) - n + 1):
            grams.add(tokens[i:i + n])
    return grams
