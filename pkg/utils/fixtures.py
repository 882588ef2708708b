"""
生成确定性的合成测试语料：图像按主题聚类，描述和向量都带主题信息，便于相似图像集有意义
"""
import os
from typing import Dict, List, Tuple

import numpy as np

import config
from index.embeddings import Embedding, EmbeddingKind
from .file_loader import Candidate, ImageRecord, Split, dumps_line, save_dataset, save_embeddings
from .progress import report

TOPICS = [
    {"subjects": ["man", "woman", "boy", "girl"], "objects": ["surfboard", "wave", "board"],
     "places": ["ocean", "beach", "sea"], "verbs": ["riding", "carrying", "holding"]},
    {"subjects": ["cat", "kitten", "dog", "puppy"], "objects": ["couch", "blanket", "pillow"],
     "places": ["living room", "bedroom", "house"], "verbs": ["sleeping on", "lying on", "sitting on"]},
    {"subjects": ["bus", "truck", "car", "train"], "objects": ["street", "road", "track"],
     "places": ["city", "town", "station"], "verbs": ["driving down", "parked on", "moving along"]},
    {"subjects": ["pizza", "sandwich", "cake", "salad"], "objects": ["plate", "table", "tray"],
     "places": ["kitchen", "restaurant", "cafe"], "verbs": ["served on", "sitting on", "placed on"]},
    {"subjects": ["player", "batter", "pitcher", "catcher"], "objects": ["bat", "ball", "glove"],
     "places": ["field", "stadium", "park"], "verbs": ["swinging", "throwing", "catching"]},
]
COLORS = ["red", "blue", "white", "black", "green", "yellow", "small", "large"]
SPLIT_CYCLE = [Split.TRAIN, Split.TRAIN, Split.TRAIN, Split.VAL, Split.TEST]


def _caption(rng: np.random.Generator, topic: Dict[str, List[str]]) -> str:

    def pick(options):
        return options[int(rng.integers(len(options)))]

    subject, verb, obj, place = (pick(topic["subjects"]), pick(topic["verbs"]),
                                 pick(topic["objects"]), pick(topic["places"]))
    color = pick(COLORS)
    templates = [
        f"A {color} {subject} {verb} a {obj} in the {place}.",
        f"The {subject} is {verb} the {color} {obj}.",
        f"a {subject} {verb} a {obj} near the {place}",
        f"{color.capitalize()} {subject} {verb} {obj}, {place} in background.",
    ]
    return pick(templates)


def make_fixture_corpus(num_images: int = 60, captions_per_image: int = 5, dim: int = 16,
                        seed: int = 0) -> Tuple[List[ImageRecord], List[Embedding]]:

    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(len(TOPICS), dim))
    records = []
    embeddings = []
    for i in range(num_images):
        image_id = f"img{i:04d}"
        topic_index = i % len(TOPICS)
        topic = TOPICS[topic_index]
        captions = tuple(_caption(rng, topic) for _ in range(captions_per_image))
        split = SPLIT_CYCLE[(i // len(TOPICS)) % len(SPLIT_CYCLE)]
        records.append(ImageRecord(image_id, split, captions))

        image_vector = centers[topic_index] + 0.5 * rng.normal(size=dim)
        embeddings.append(Embedding(image_id, EmbeddingKind.IMAGE, image_vector.astype(np.float32)))
        for index in range(captions_per_image):
            caption_vector = image_vector + 0.3 * rng.normal(size=dim)
            embeddings.append(Embedding(image_id, EmbeddingKind.CAPTION,
                                        caption_vector.astype(np.float32), index))
    return records, embeddings


def fixture_candidates(records: List[ImageRecord], embeddings: List[Embedding]) -> List[Candidate]:
    """每张图像以第一条真值作为候选描述，第一条描述向量作为查询向量"""
    first_vectors = {e.id: e.vector for e in embeddings
                     if e.kind is EmbeddingKind.CAPTION and e.caption_index == 0}
    return [Candidate(r.id, r.captions[0], tuple(float(x) for x in first_vectors[r.id]))
            for r in records]


def write_fixture(output_dir: str, num_images: int = 60, captions_per_image: int = 5,
                  dim: int = 16, seed: int = 0) -> Dict[str, str]:

    records, embeddings = make_fixture_corpus(num_images, captions_per_image, dim, seed)
    candidates = fixture_candidates(records, embeddings)

    # 查询向量也以保留编号写入向量文件
    queries = [Embedding(c.image_id, EmbeddingKind.CAPTION, c.vector, config.QUERY_CAPTION_INDEX)
               for c in candidates]

    paths = {
        "dataset": os.path.join(output_dir, "dataset.json"),
        "embeddings": os.path.join(output_dir, "embeddings.jsonl"),
        "candidates": os.path.join(output_dir, "candidates.jsonl"),
    }
    save_dataset(records, paths["dataset"])
    save_embeddings(dim, embeddings + queries, paths["embeddings"])
    with open(paths["candidates"], 'w', encoding='utf-8') as f:
        for candidate in candidates:
            f.write(dumps_line({"image_id": candidate.image_id, "caption": candidate.caption}) + "\n")

    report(f"测试语料已写出到 {output_dir}：{len(records)}张图像，每张{captions_per_image}条描述")
    return paths
