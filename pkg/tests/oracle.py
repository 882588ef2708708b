"""
暴力计算的参考实现，只依赖numpy和标准库，用来核对库中的优化实现
"""
import math
from collections import Counter

import numpy as np

from utils.file_loader import ImageRecord, Split


def make_records(captions_by_image, split=Split.TRAIN):
    """用{id: [描述]}快速构造数据集"""
    return [ImageRecord(image_id, split, tuple(captions)) for image_id, captions in captions_by_image.items()]


def grams(tokens, n):
    return [tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


def oracle_df(images, max_order=4):
    """images: 每张图像的参考描述词序列列表"""
    df = Counter()
    for refs in images:
        seen = set()
        for tokens in refs:
            for n in range(1, max_order + 1):
                seen.update(grams(tokens, n))
        df.update(seen)
    return df


def oracle_cider(candidate, references, df, num_images, max_order=4, sigma=6.0, scale=10.0, clipped=True):

    def vector(tokens, n):
        counts = Counter(grams(tokens, n))
        return {g: c * math.log(num_images / max(1, df.get(g, 0))) for g, c in counts.items()}

    total = 0.0
    for ref in references:
        per_order = []
        for n in range(1, max_order + 1):
            h = vector(candidate, n)
            r = vector(ref, n)
            norm_h = math.sqrt(sum(v * v for v in h.values()))
            norm_r = math.sqrt(sum(v * v for v in r.values()))
            if norm_h * norm_r == 0.0:
                per_order.append(0.0)
                continue
            if clipped:
                dot = sum(min(h[g], r[g]) * r[g] for g in h if g in r)
            else:
                dot = sum(h[g] * r[g] for g in h if g in r)
            per_order.append(min(1.0, dot / (norm_h * norm_r)))
        g_c = sum(per_order) / max_order
        if clipped:
            g_c *= math.exp(-((len(candidate) - len(ref)) ** 2) / (2 * sigma ** 2))
        total += g_c * scale
    return total / len(references)


def _unit(vector):
    v = np.asarray(vector, dtype=np.float32).astype(np.float64)
    return v / np.linalg.norm(v)


def oracle_similar_set(images, captions, target, pool, k):
    """images: {id: 向量}，captions: {id: [向量]}；逐张计算最大余弦后全排序"""
    t = _unit(images[target])
    scored = []
    for image_id in pool:
        if image_id == target:
            continue
        best = max(float(np.dot(t, _unit(c))) for c in captions[image_id])
        scored.append((-best, image_id))
    scored.sort()
    return [image_id for _, image_id in scored[:k]], [-s for s, _ in scored[:k]]


def oracle_rank(images, query, true_id):
    """名次从0开始，同分时id小的靠前"""
    q = _unit(query)
    scores = {image_id: float(np.dot(_unit(v), q)) for image_id, v in images.items()}
    order = sorted(scores, key=lambda image_id: (-scores[image_id], image_id))
    return order.index(true_id)
