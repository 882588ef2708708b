
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Sequence

import config
from index.storage import DfTable
from preprocess.ngrams import NGram, extract_ngrams
from preprocess.tokenizer import TokenSeq
from utils.errors import NoReferences, OutOfRange


class CiderVariant(Enum):
    CIDER_D = "cider-d"
    CIDER_PLAIN = "cider"

    @classmethod
    def parse(cls, value: str) -> "CiderVariant":

        for variant in cls:
            if variant.value == value.lower() or variant.name == value.upper():
                return variant
        raise OutOfRange(f"未知的CIDEr变体: {value}")


@dataclass(frozen=True)
class CiderParams:
    max_order: int = config.MAX_ORDER
    sigma: float = config.SIGMA
    scale: float = config.CIDER_SCALE
    variant: CiderVariant = CiderVariant.parse(config.CIDER_VARIANT)

    def __post_init__(self):
        if self.max_order < 1:
            raise OutOfRange(f"max_order必须不小于1: {self.max_order}")
        if self.sigma <= 0:
            raise OutOfRange(f"sigma必须为正数: {self.sigma}")
        if self.scale <= 0:
            raise OutOfRange(f"scale必须为正数: {self.scale}")


@dataclass(frozen=True)
class TfIdfVector:
    """一条描述在各阶上的TF-IDF向量、范数平方和词数"""
    weights: List[Dict[NGram, float]]
    squared_norms: List[float]
    length: int


class CiderScorer:
    """CIDEr评分器，计算候选描述与参考描述之间的g_c"""

    def __init__(self, df_table: DfTable, params: CiderParams = CiderParams()):

        self.df_table = df_table
        self.params = params
        self._penalty_denominator = 2.0 * params.sigma ** 2
        self._clipped = params.variant is CiderVariant.CIDER_D

    def vectorize(self, seq: TokenSeq) -> TfIdfVector:

        counts = extract_ngrams(seq, self.params.max_order)
        weights = []
        squared_norms = []
        for n in range(1, self.params.max_order + 1):
            order_weights = {}
            squared = 0.0
            for gram, term_freq in counts[n].items():
                value = term_freq * self.df_table.idf(gram)
                order_weights[gram] = value
                squared += value * value
            weights.append(order_weights)
            squared_norms.append(squared)
        return TfIdfVector(weights, squared_norms, len(seq))

    def similarity(self, hyp: TfIdfVector, ref: TfIdfVector) -> float:
        """单条参考的g_c，取值[0, scale]"""
        total = 0.0
        for i in range(self.params.max_order):
            norm_product = math.sqrt(hyp.squared_norms[i] * ref.squared_norms[i])
            # 零向量的这一阶记为0
            if norm_product == 0.0:
                continue
            ref_weights = ref.weights[i]
            dot = 0.0
            if self._clipped:
                # CIDEr-D: 候选的权重按参考截断
                for gram, value in hyp.weights[i].items():
                    ref_value = ref_weights.get(gram)
                    if ref_value is not None:
                        dot += min(value, ref_value) * ref_value
            else:
                for gram, value in hyp.weights[i].items():
                    ref_value = ref_weights.get(gram)
                    if ref_value is not None:
                        dot += value * ref_value
            total += min(1.0, dot / norm_product)

        score = total / self.params.max_order
        if self._clipped:
            delta = float(hyp.length - ref.length)
            score *= math.exp(-(delta * delta) / self._penalty_denominator)
        return score * self.params.scale

    def score_vectors(self, hyp: TfIdfVector, refs: Sequence[TfIdfVector]) -> float:

        if not refs:
            raise NoReferences("参考描述列表为空")
        return sum(self.similarity(hyp, ref) for ref in refs) / len(refs)

    def score(self, candidate: TokenSeq, references: Sequence[TokenSeq]) -> float:

        if not references:
            raise NoReferences("参考描述列表为空")
        hyp = self.vectorize(candidate)
        return self.score_vectors(hyp, [self.vectorize(ref) for ref in references])


def cider_score(candidate: TokenSeq, references: Sequence[TokenSeq], df: DfTable,
                params: CiderParams = CiderParams()) -> float:

    return CiderScorer(df, params).score(candidate, references)
