"""
区分度相关的公式：组间CIDEr（CIDErBtw）、真值权重、加权XE损失、加权奖励与损失混合
"""
from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence, Tuple

import config
from index.storage import DfTable
from preprocess.tokenizer import TokenSeq
from utils.errors import EmptySimilarSet, LengthMismatch, NoReferences, OutOfRange
from .scorer import CiderParams, CiderScorer, TfIdfVector

# 按相似图像分组的参考描述：K组，每组N条
SimilarRefs = Sequence[Sequence[TokenSeq]]


@dataclass(frozen=True)
class WeightParams:
    lambda_w: float = config.LAMBDA_W
    alpha_w: float = config.ALPHA_W

    def __post_init__(self):
        if self.lambda_w <= 0:
            raise OutOfRange(f"lambda_w必须为正数: {self.lambda_w}")
        if not 0 <= self.alpha_w <= self.lambda_w:
            raise OutOfRange(f"alpha_w必须在[0, lambda_w]之间: {self.alpha_w}")


@dataclass(frozen=True)
class RewardParams:
    alpha_r: float = config.ALPHA_R
    alpha_l: float = config.ALPHA_L

    def __post_init__(self):
        if self.alpha_r < 0:
            raise OutOfRange(f"alpha_r不能为负数: {self.alpha_r}")
        if not 0 <= self.alpha_l <= 1:
            raise OutOfRange(f"alpha_l必须在[0, 1]之间: {self.alpha_l}")


@dataclass(frozen=True)
class WeightEntry:
    caption_index: int
    v: float
    w: float


# 图像id -> 该图像N条真值的(编号, CIDErBtw, 权重)
WeightTable = Dict[str, List[WeightEntry]]


def weights_from_scores(scores: Sequence[float], wparams: WeightParams = WeightParams()) -> List[float]:
    """w_i = lambda_w - alpha_w * v_i / max(v)，max按同一图像的N条真值取"""
    if not scores:
        return []
    top = max(scores)
    if top <= 0.0:
        # 与所有相似图像都没有重叠时惩罚项消失
        return [wparams.lambda_w for _ in scores]
    return [wparams.lambda_w - wparams.alpha_w * (v / top) for v in scores]


def weighted_xe(per_caption_nll: Sequence[float], weights: Sequence[float]) -> float:

    if len(per_caption_nll) != len(weights):
        raise LengthMismatch(f"损失数量{len(per_caption_nll)}与权重数量{len(weights)}不一致")
    return sum(w * nll for w, nll in zip(weights, per_caption_nll))


def combine_losses(l_xe: float, l_rl: float, alpha_l: float) -> float:

    if not 0 <= alpha_l <= 1:
        raise OutOfRange(f"alpha_l必须在[0, 1]之间: {alpha_l}")
    return alpha_l * l_xe + (1 - alpha_l) * l_rl


class DistinctivenessScorer:
    """在CiderScorer之上计算组间CIDEr、权重和奖励，可复用已向量化的参考描述"""

    def __init__(self, df_table: DfTable, params: CiderParams = CiderParams()):

        self.cider = CiderScorer(df_table, params)

    def vectorize_all(self, seqs: Sequence[TokenSeq]) -> List[TfIdfVector]:

        return [self.cider.vectorize(seq) for seq in seqs]

    def ciderbtw_vectors(self, hyp: TfIdfVector, similar_refs: Sequence[Sequence[TfIdfVector]]) -> float:
        """K*N个单参考CIDEr的算术平均"""
        pair_scores = [self.cider.similarity(hyp, ref) for group in similar_refs for ref in group]
        if not pair_scores:
            raise EmptySimilarSet("相似图像集为空或没有参考描述")
        return sum(pair_scores) / len(pair_scores)

    def ciderbtw(self, c: TokenSeq, similar_refs: SimilarRefs) -> float:

        return self.ciderbtw_vectors(self.cider.vectorize(c),
                                     [self.vectorize_all(group) for group in similar_refs])

    def ground_truth_scores(self, gt_captions: Sequence[TokenSeq], similar_refs: SimilarRefs) -> List[float]:

        similar_vectors = [self.vectorize_all(group) for group in similar_refs]
        return [self.ciderbtw_vectors(self.cider.vectorize(gt), similar_vectors) for gt in gt_captions]

    def compute_weights(self, gt_captions: Sequence[TokenSeq], similar_refs: SimilarRefs,
                        wparams: WeightParams = WeightParams()) -> List[Tuple[float, float]]:

        scores = self.ground_truth_scores(gt_captions, similar_refs)
        return list(zip(scores, weights_from_scores(scores, wparams)))

    def weighted_reward_vectors(self, hyp: TfIdfVector, gt_vectors: Sequence[TfIdfVector],
                                weights: Sequence[float]) -> float:
        """除以N而不是权重之和"""
        if not gt_vectors:
            raise NoReferences("真值描述列表为空")
        if len(weights) != len(gt_vectors):
            raise LengthMismatch(f"权重数量{len(weights)}与真值数量{len(gt_vectors)}不一致")
        total = sum(w * self.cider.similarity(hyp, ref) for w, ref in zip(weights, gt_vectors))
        return total / len(gt_vectors)

    def weighted_reward(self, candidate: TokenSeq, gt_captions: Sequence[TokenSeq],
                        weights: Sequence[float]) -> float:

        return self.weighted_reward_vectors(self.cider.vectorize(candidate),
                                            self.vectorize_all(gt_captions), weights)

    def combined_reward_vectors(self, hyp: TfIdfVector, gt_vectors: Sequence[TfIdfVector],
                                weights: Sequence[float], similar_vectors: Sequence[Sequence[TfIdfVector]],
                                rparams: RewardParams = RewardParams()) -> Tuple[float, Dict[str, float]]:

        r_tilde = self.weighted_reward_vectors(hyp, gt_vectors, weights)
        btw = self.ciderbtw_vectors(hyp, similar_vectors)
        reward = r_tilde - rparams.alpha_r * btw
        return reward, {"r_tilde": r_tilde, "ciderbtw": btw}

    def combined_reward(self, candidate: TokenSeq, gt_captions: Sequence[TokenSeq],
                        weights: Sequence[float], similar_refs: SimilarRefs,
                        rparams: RewardParams = RewardParams()) -> Tuple[float, Dict[str, float]]:

        return self.combined_reward_vectors(self.cider.vectorize(candidate),
                                            self.vectorize_all(gt_captions), weights,
                                            [self.vectorize_all(group) for group in similar_refs],
                                            rparams)


def ciderbtw(c: TokenSeq, similar_refs: SimilarRefs, df: DfTable,
             params: CiderParams = CiderParams()) -> float:

    return DistinctivenessScorer(df, params).ciderbtw(c, similar_refs)


def compute_weights(gt_captions: Sequence[TokenSeq], similar_refs: SimilarRefs, df: DfTable,
                    wparams: WeightParams = WeightParams(),
                    cparams: CiderParams = CiderParams()) -> List[Tuple[float, float]]:

    return DistinctivenessScorer(df, cparams).compute_weights(gt_captions, similar_refs, wparams)


def weighted_reward(candidate: TokenSeq, gt_captions: Sequence[TokenSeq], weights: Sequence[float],
                    df: DfTable, cparams: CiderParams = CiderParams()) -> float:

    return DistinctivenessScorer(df, cparams).weighted_reward(candidate, gt_captions, weights)


def combined_reward(candidate: TokenSeq, gt_captions: Sequence[TokenSeq], weights: Sequence[float],
                    similar_refs: SimilarRefs, df: DfTable, cparams: CiderParams = CiderParams(),
                    rparams: RewardParams = RewardParams()) -> Tuple[float, Dict[str, float]]:

    return DistinctivenessScorer(df, cparams).combined_reward(candidate, gt_captions, weights,
                                                              similar_refs, rparams)


def build_weight_table(image_entries: Mapping[str, Sequence[Tuple[float, float]]]) -> WeightTable:

    return {
        image_id: [WeightEntry(index, v, w) for index, (v, w) in enumerate(entries)]
        for image_id, entries in image_entries.items()
    }
