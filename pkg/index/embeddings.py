from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

import config
from utils.errors import (DimensionMismatch, DuplicateId, NoCaptionEmbeddings, OrphanCaption,
                          UnknownId, ZeroVector)

class EmbeddingKind(Enum):
    IMAGE = "image"
    CAPTION = "caption"


@dataclass(frozen=True, eq=False)
class Embedding:
    """联合语义空间中的一个向量（图像或描述）"""
    id: str
    kind: EmbeddingKind
    vector: Sequence[float]
    caption_index: Optional[int] = None

    def __post_init__(self):
        if (self.kind is EmbeddingKind.CAPTION) != (self.caption_index is not None):
            raise ValueError(f"{self.id}: 只有描述向量才有caption_index")

    @property
    def dimension(self) -> int:
        return len(self.vector)


def normalize_vector(raw: Sequence[float], context: str = "") -> np.ndarray:
    """按32位精度读入后做L2归一化"""
    vector = np.asarray(raw, dtype=np.float32).astype(np.float64)
    if vector.ndim != 1:
        raise DimensionMismatch(f"{context}向量必须是一维的")
    norm = np.linalg.norm(vector)
    if not np.isfinite(norm) or norm == 0.0:
        raise ZeroVector(f"{context}向量范数为0或非有限值，无法归一化")
    return vector / norm


class EmbeddingStore:
    """图像与描述向量库，入库后只读"""

    def __init__(self, dimension: int, embeddings: Iterable[Embedding]):

        self.dimension = dimension
        images: Dict[str, Embedding] = {}
        captions: Dict[Tuple[str, int], Embedding] = {}
        queries: Dict[str, Embedding] = {}

        for embedding in embeddings:
            if embedding.dimension != dimension:
                raise DimensionMismatch(
                    f"{embedding.id}: 向量维度{embedding.dimension}与库维度{dimension}不一致")
            stored = Embedding(embedding.id, embedding.kind,
                               normalize_vector(embedding.vector, f"{embedding.id}: "),
                               embedding.caption_index)
            if embedding.kind is EmbeddingKind.IMAGE:
                if embedding.id in images:
                    raise DuplicateId(f"重复的图像向量: {embedding.id}")
                images[embedding.id] = stored
            elif embedding.caption_index == config.QUERY_CAPTION_INDEX:
                # 保留编号-1：生成描述的查询向量，不参与相似图像检索
                if embedding.id in queries:
                    raise DuplicateId(f"重复的查询向量: {embedding.id}")
                queries[embedding.id] = stored
            else:
                key = (embedding.id, embedding.caption_index)
                if key in captions:
                    raise DuplicateId(f"重复的描述向量: {embedding.id}#{embedding.caption_index}")
                captions[key] = stored

        for image_id, _ in list(captions) + [(q, None) for q in queries]:
            if image_id not in images:
                raise OrphanCaption(f"描述向量 {image_id} 没有对应的图像向量")

        self.images = images
        self.captions = captions
        self.queries = queries

        # 按id升序排列的矩阵，用于批量检索
        self.image_ids: List[str] = sorted(images)
        self.image_matrix = self._stack([images[i].vector for i in self.image_ids])

        self.caption_keys: List[Tuple[str, int]] = sorted(captions)
        self.caption_matrix = self._stack([captions[k].vector for k in self.caption_keys])
        self._caption_rows: Dict[str, List[int]] = {}
        for row, (image_id, _) in enumerate(self.caption_keys):
            self._caption_rows.setdefault(image_id, []).append(row)

    def _stack(self, vectors: List[np.ndarray]) -> np.ndarray:

        if not vectors:
            return np.zeros((0, self.dimension), dtype=np.float64)
        return np.vstack(vectors)

    def image(self, image_id: str) -> Embedding:

        try:
            return self.images[image_id]
        except KeyError:
            raise UnknownId(f"未知的图像id: {image_id}") from None

    def image_vector(self, image_id: str) -> np.ndarray:

        return self.image(image_id).vector

    def caption_rows(self, image_id: str) -> List[int]:
        """某张图像的描述向量在caption_matrix中的行号"""
        if image_id not in self.images:
            raise UnknownId(f"未知的图像id: {image_id}")
        rows = self._caption_rows.get(image_id)
        if not rows:
            raise NoCaptionEmbeddings(f"图像 {image_id} 没有描述向量")
        return rows

    def caption_block(self, image_id: str) -> np.ndarray:

        return self.caption_matrix[self.caption_rows(image_id)]

    def has_captions(self, image_id: str) -> bool:

        return bool(self._caption_rows.get(image_id))

    def query_vector(self, image_id: str) -> Optional[np.ndarray]:

        query = self.queries.get(image_id)
        return None if query is None else query.vector

    def __len__(self) -> int:
        return len(self.images)
