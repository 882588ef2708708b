import time
import concurrent.futures
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from index.embeddings import Embedding, EmbeddingStore, normalize_vector
from utils.parallel import resolve_workers
from utils.errors import DimensionMismatch, PoolTooSmall, UnknownId
from utils.progress import report


@dataclass(frozen=True)
class SimilarSet:
    """目标图像的K张相似图像，按相似度降序"""
    target_id: str
    neighbor_ids: Tuple[str, ...]
    scores: Tuple[float, ...]

    def __post_init__(self):
        if self.target_id in self.neighbor_ids:
            raise ValueError(f"相似图像集包含目标图像本身: {self.target_id}")
        if len(set(self.neighbor_ids)) != len(self.neighbor_ids):
            raise ValueError(f"相似图像集存在重复图像: {self.target_id}")
        if len(self.scores) != len(self.neighbor_ids):
            raise ValueError(f"相似图像集的分数数量与图像数量不一致: {self.target_id}")
        if any(a < b for a, b in zip(self.scores, self.scores[1:])):
            raise ValueError(f"相似图像集的分数必须非增: {self.target_id}")

    @property
    def k(self) -> int:
        return len(self.neighbor_ids)


def cosine(a: Embedding, b: Embedding) -> float:

    if a.dimension != b.dimension:
        raise DimensionMismatch(f"向量维度不一致: {a.dimension} != {b.dimension}")
    u = np.asarray(a.vector, dtype=np.float64)
    v = np.asarray(b.vector, dtype=np.float64)
    denominator = np.linalg.norm(u) * np.linalg.norm(v)
    if denominator == 0.0:
        return 0.0
    return float(np.clip(np.dot(u, v) / denominator, -1.0, 1.0))


def image_similarity(store: EmbeddingStore, i: str, j: str) -> float:
    """S(I_i, I_j): 图像i与图像j所有描述向量的最大余弦相似度"""
    image_vector = store.image_vector(i)
    return float(np.max(store.caption_block(j) @ image_vector))


def ranked_indices(scores: np.ndarray, depth: int) -> np.ndarray:
    """取前depth个下标：分数降序，同分按下标升序（下标顺序即id升序）"""
    total = scores.shape[0]
    depth = min(depth, total)
    if depth <= 0:
        return np.zeros(0, dtype=np.int64)
    if depth < total:
        # 部分排序后，边界上的同分项全部保留，保证并列时的顺序确定
        threshold = np.partition(scores, total - depth)[total - depth]
        candidates = np.nonzero(scores >= threshold)[0]
    else:
        candidates = np.arange(total)
    order = np.lexsort((candidates, -scores[candidates]))
    return candidates[order][:depth]


class SimilarSetRetriever:
    """基于图像到描述检索构建相似图像集"""

    def __init__(self, store: EmbeddingStore, pool_ids: Sequence[str], threads: int = 0):

        self.store = store
        self.pool_ids = sorted(set(pool_ids))
        for image_id in self.pool_ids:
            # 检查id存在且有描述向量
            store.caption_rows(image_id)
        rows = [row for image_id in self.pool_ids for row in store.caption_rows(image_id)]
        rows.sort()
        self._pool_rows = np.asarray(rows, dtype=np.int64)
        self._pool_matrix = store.caption_matrix[self._pool_rows]
        self._pool_owner = [store.caption_keys[row][0] for row in rows]
        self.max_threads = resolve_workers(threads)

    def retrieve(self, target_id: str, k: int, n: int) -> SimilarSet:

        if k < 1:
            raise ValueError(f"K必须不小于1: {k}")
        available = len(self.pool_ids) - (1 if target_id in self.pool_ids else 0)
        if available < k:
            raise PoolTooSmall(f"检索池只有{available}张其他图像，不足K={k}")

        target_vector = self.store.image_vector(target_id)
        scores = self._pool_matrix @ target_vector
        total = scores.shape[0]

        # N' = N(K+1)，去掉自身和重复图像后不足K张则加倍检索深度
        depth = max(1, n) * (k + 1)
        while True:
            neighbors: List[str] = []
            neighbor_scores: List[float] = []
            seen = {target_id}
            for index in ranked_indices(scores, depth):
                owner = self._pool_owner[index]
                if owner in seen:
                    continue
                seen.add(owner)
                neighbors.append(owner)
                # 图像首次出现时的描述分数就是它所有描述中的最大值，即S(I_0, I_j)
                neighbor_scores.append(float(scores[index]))
                if len(neighbors) == k:
                    break
            if len(neighbors) == k or depth >= total:
                break
            depth *= 2

        if len(neighbors) < k:
            raise PoolTooSmall(f"图像 {target_id} 只检索到{len(neighbors)}张相似图像，不足K={k}")

        return SimilarSet(target_id, tuple(neighbors), tuple(neighbor_scores))

    def build(self, target_ids: Sequence[str], k: int, n: int) -> List[SimilarSet]:

        start_time = time.time()
        for target_id in target_ids:
            self.store.image(target_id)
        workers = max(1, min(self.max_threads, len(target_ids)))
        report(f"开始为{len(target_ids)}张图像构建相似图像集（K={k}, N'={n * (k + 1)}），"
               f"使用{workers}个线程")

        # map按输入顺序返回，每个目标的结果与线程数无关
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(lambda target: self.retrieve(target, k, n), target_ids))

        report(f"相似图像集构建完成，用时{time.time() - start_time:.2f}秒")
        return results


def build_similar_sets(store: EmbeddingStore, target_ids: Sequence[str], pool_ids: Sequence[str],
                       k: int, n: int, threads: int = 0) -> List[SimilarSet]:

    if k < 1:
        raise ValueError(f"K必须不小于1: {k}")
    if len(set(pool_ids)) < k + 1:
        raise PoolTooSmall(f"检索池只有{len(set(pool_ids))}张图像，至少需要K+1={k + 1}张")
    return SimilarSetRetriever(store, pool_ids, threads=threads).build(target_ids, k, n)


# (查询id, 查询向量, 真实图像id)
RetrievalQuery = Tuple[str, Sequence[float], str]


def rank_queries(store: EmbeddingStore, queries: Sequence[RetrievalQuery]) -> List[int]:
    """每个查询的真实图像在全部图像中的名次（从0开始），同分时id小的靠前"""
    gallery = store.image_matrix
    row_of = {image_id: row for row, image_id in enumerate(store.image_ids)}
    ranks = []
    for query_id, vector, true_id in queries:
        if true_id not in row_of:
            raise UnknownId(f"查询 {query_id} 的真实图像 {true_id} 不在图像库中")
        if len(vector) != store.dimension:
            raise DimensionMismatch(
                f"查询 {query_id} 的向量维度{len(vector)}与库维度{store.dimension}不一致")
        scores = gallery @ normalize_vector(vector, f"{query_id}: ")
        true_row = row_of[true_id]
        true_score = scores[true_row]
        better = int(np.count_nonzero(scores > true_score))
        tied_before = int(np.count_nonzero(scores[:true_row] == true_score))
        ranks.append(better + tied_before)
    return ranks


def recall_from_ranks(ranks: Sequence[int], ks: Sequence[int]) -> Dict[int, float]:

    if not ks:
        raise ValueError("ks不能为空")
    if not ranks:
        return {k: 0.0 for k in ks}
    ranks_array = np.asarray(ranks)
    return {k: 100.0 * float(np.count_nonzero(ranks_array < k)) / len(ranks) for k in ks}


def median_rank(ranks: Sequence[int]) -> Optional[float]:
    """中位名次（从1开始）"""
    if not ranks:
        return None
    return float(np.floor(np.median(np.asarray(ranks))) + 1)


def recall_at_k(store: EmbeddingStore, queries: Sequence[RetrievalQuery],
                ks: Sequence[int]) -> Dict[int, float]:

    return recall_from_ranks(rank_queries(store, queries), ks)
