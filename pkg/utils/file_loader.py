import io
import json
import os
import time
from collections import Counter, OrderedDict
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import config
from index.embeddings import Embedding, EmbeddingKind, EmbeddingStore
from search.distinctiveness import WeightEntry, WeightTable
from search.retriever import SimilarSet
from .errors import DimensionMismatch, DuplicateId, EmptyCaptions, MissingHeader, ParseError
from .progress import report


class Split(Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"

    @classmethod
    def parse(cls, value: str) -> "Split":

        text = str(value).strip().lower()
        # Karpathy划分中的restval并入训练集
        if text == "restval":
            return cls.TRAIN
        for split in cls:
            if split.value == text:
                return split
        raise ValueError(f"未知的数据划分: {value}")


@dataclass(frozen=True)
class ImageRecord:
    """一张图像及其N条人工标注描述"""
    id: str
    split: Split
    captions: Tuple[str, ...]


def _require(record: Dict[str, Any], field: str, kind, position: int) -> Any:

    if field not in record:
        raise ParseError(f"第{position}条记录缺少字段", field=field)
    value = record[field]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise ParseError(f"第{position}条记录的字段类型错误: {type(value).__name__}", field=field)
    return value


def parse_dataset(document: Any) -> List[ImageRecord]:

    if not isinstance(document, dict) or not isinstance(document.get("images"), list):
        raise ParseError("数据集必须是包含images列表的JSON对象", field="images")

    records = []
    seen = set()
    for position, entry in enumerate(document["images"], start=1):
        if not isinstance(entry, dict):
            raise ParseError(f"第{position}条记录不是JSON对象", field="images")
        image_id = _require(entry, "id", (str, int), position)
        image_id = str(image_id)
        try:
            split = Split.parse(_require(entry, "split", str, position))
        except ValueError as e:
            raise ParseError(str(e), field="split") from e
        captions = _require(entry, "captions", list, position)
        if not captions:
            raise EmptyCaptions(f"图像 {image_id} 没有标注描述")
        for caption in captions:
            if not isinstance(caption, str):
                raise ParseError(f"图像 {image_id} 的描述必须是字符串", field="captions")
        if image_id in seen:
            raise DuplicateId(f"重复的图像id: {image_id}")
        seen.add(image_id)
        records.append(ImageRecord(image_id, split, tuple(captions)))
    return records


def split_counts(records: Iterable[ImageRecord]) -> Dict[str, int]:

    counts = Counter(record.split for record in records)
    return OrderedDict((split.value, counts.get(split, 0)) for split in Split)


def load_dataset(path: str) -> List[ImageRecord]:

    start_time = time.time()
    document = _loads_document(_read_text(path))
    records = parse_dataset(document)

    sizes = "，".join(f"{name}: {count}" for name, count in split_counts(records).items())
    report(f"数据集加载完成，共{len(records)}张图像（{sizes}），用时{time.time() - start_time:.2f}秒")
    return records


def dataset_to_json(records: Sequence[ImageRecord]) -> Dict[str, Any]:

    return {"images": [{"id": r.id, "split": r.split.value, "captions": list(r.captions)}
                       for r in records]}


def save_dataset(records: Sequence[ImageRecord], path: str) -> None:

    _ensure_dir(path)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(dataset_to_json(records), f, ensure_ascii=False, indent=1)


def select_split(records: Sequence[ImageRecord], split: str) -> List[ImageRecord]:

    wanted = Split.parse(split)
    return [record for record in records if record.split is wanted]


def _ensure_dir(path: str) -> None:

    directory = os.path.dirname(path)
    if directory and not os.path.exists(directory):
        os.makedirs(directory)


def _read_text(path: str) -> str:
    """按UTF-8读取整个文件，解码失败时报告出错的行号"""
    with open(path, 'rb') as f:
        data = f.read()
    try:
        return data.decode('utf-8')
    except UnicodeDecodeError as e:
        raise ParseError(f"不是合法的UTF-8: 无法解码的字节位于第{e.start}字节",
                         line=data.count(b"\n", 0, e.start) + 1) from None


def _loads_document(text: str) -> Any:

    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, line=e.lineno) from e
    except RecursionError:
        raise ParseError("JSON嵌套过深") from None


def _json_lines(handle) -> Iterable[Tuple[int, Dict[str, Any]]]:
    """逐行解析JSON-lines，跳过空行，返回(行号, 对象)"""
    for line_number, line in enumerate(handle, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(e.msg, line=line_number) from e
        except RecursionError:
            raise ParseError("JSON嵌套过深", line=line_number) from None
        if not isinstance(record, dict):
            raise ParseError("每行必须是JSON对象", line=line_number)
        yield line_number, record


def dumps_line(record: Dict[str, Any], ensure_ascii: bool = False) -> str:

    return json.dumps(record, ensure_ascii=ensure_ascii, separators=(",", ":"))


def parse_embeddings(handle) -> EmbeddingStore:

    records = _json_lines(handle)
    first = next(records, None)
    if first is None or first[1].get("format") != config.EMBEDDING_FORMAT or "dim" not in first[1]:
        raise MissingHeader(f"向量文件第一行必须是头记录 {{\"format\":\"{config.EMBEDDING_FORMAT}\",\"dim\":D}}")
    dimension = first[1]["dim"]
    if not isinstance(dimension, int) or dimension < 1:
        raise ParseError("dim必须为正整数", line=first[0], field="dim")

    embeddings = []
    kinds = Counter()
    for line_number, record in records:
        try:
            kind = EmbeddingKind(record.get("kind"))
        except ValueError:
            raise ParseError(f"未知的向量类型: {record.get('kind')}", line=line_number, field="kind") from None
        image_id = record.get("id")
        if not isinstance(image_id, (str, int)) or isinstance(image_id, bool):
            raise ParseError("缺少id", line=line_number, field="id")
        caption_index = record.get("caption_index")
        if kind is EmbeddingKind.CAPTION:
            if not isinstance(caption_index, int) or isinstance(caption_index, bool):
                raise ParseError("描述向量必须有整数caption_index", line=line_number, field="caption_index")
        else:
            caption_index = None
        vector = record.get("vector")
        if not isinstance(vector, list) or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in vector):
            raise ParseError("vector必须是数值列表", line=line_number, field="vector")
        if len(vector) != dimension:
            raise DimensionMismatch(f"第{line_number}行: 向量维度{len(vector)}与头记录维度{dimension}不一致")
        embeddings.append(Embedding(str(image_id), kind, vector, caption_index))
        kinds[kind] += 1

    store = EmbeddingStore(dimension, embeddings)
    report(f"向量加载完成，维度{dimension}，图像{kinds[EmbeddingKind.IMAGE]}条，"
           f"描述{kinds[EmbeddingKind.CAPTION]}条")
    return store


def load_embeddings(path: str) -> EmbeddingStore:

    return parse_embeddings(io.StringIO(_read_text(path)))


def embedding_lines(dimension: int, embeddings: Iterable[Embedding]) -> Iterable[str]:

    yield dumps_line({"format": config.EMBEDDING_FORMAT, "dim": dimension})
    for embedding in embeddings:
        record: Dict[str, Any] = {"id": embedding.id, "kind": embedding.kind.value}
        if embedding.kind is EmbeddingKind.CAPTION:
            record["caption_index"] = embedding.caption_index
        record["vector"] = [float(x) for x in embedding.vector]
        yield dumps_line(record)


def save_embeddings(dimension: int, embeddings: Iterable[Embedding], path: str) -> None:

    _ensure_dir(path)
    with open(path, 'w', encoding='utf-8') as f:
        for line in embedding_lines(dimension, embeddings):
            f.write(line + "\n")


def similar_sets_to_text(sets: Sequence[SimilarSet]) -> str:

    buffer = io.StringIO()
    for similar_set in sets:
        buffer.write(dumps_line({"target_id": similar_set.target_id,
                             "neighbors": list(similar_set.neighbor_ids),
                             "scores": [float(s) for s in similar_set.scores]}) + "\n")
    return buffer.getvalue()


def write_similar_sets(sets: Sequence[SimilarSet], path: str) -> None:

    _ensure_dir(path)
    with open(path, 'w', encoding='utf-8') as f:
        f.write(similar_sets_to_text(sets))
    report(f"已写出{len(sets)}个相似图像集到 {path}")


def load_similar_sets(path: str) -> Dict[str, SimilarSet]:

    sets: Dict[str, SimilarSet] = {}
    with io.StringIO(_read_text(path)) as f:
        for line_number, record in _json_lines(f):
            try:
                similar_set = SimilarSet(str(record["target_id"]),
                                         tuple(str(n) for n in record["neighbors"]),
                                         tuple(float(s) for s in record["scores"]))
            except KeyError as e:
                raise ParseError("缺少字段", line=line_number, field=str(e.args[0])) from None
            except (TypeError, ValueError) as e:
                raise ParseError(str(e), line=line_number) from None
            if similar_set.target_id in sets:
                raise DuplicateId(f"第{line_number}行: 重复的相似图像集 {similar_set.target_id}")
            sets[similar_set.target_id] = similar_set
    report(f"相似图像集加载完成，共{len(sets)}个")
    return sets


def weight_table_to_text(table: WeightTable, metadata: Dict[str, Any]) -> str:

    buffer = io.StringIO()
    header = {"format": config.WEIGHTS_FORMAT}
    header.update(metadata)
    buffer.write(dumps_line(header) + "\n")
    for image_id, entries in table.items():
        buffer.write(dumps_line({
            "image_id": image_id,
            "entries": [{"caption_index": e.caption_index, "v": e.v, "w": e.w} for e in entries],
        }) + "\n")
    return buffer.getvalue()


def write_weight_table(table: WeightTable, metadata: Dict[str, Any], path: str) -> None:

    _ensure_dir(path)
    with open(path, 'w', encoding='utf-8') as f:
        f.write(weight_table_to_text(table, metadata))
    report(f"已写出{len(table)}张图像的真值权重到 {path}")


def load_weight_table(path: str) -> Tuple[WeightTable, Dict[str, Any]]:
    """返回(权重表, 头记录中的元数据)"""
    table: WeightTable = {}
    metadata: Dict[str, Any] = {}
    with io.StringIO(_read_text(path)) as f:
        for line_number, record in _json_lines(f):
            if record.get("format") == config.WEIGHTS_FORMAT:
                metadata = {k: v for k, v in record.items() if k != "format"}
                continue
            try:
                image_id = str(record["image_id"])
                entries = [WeightEntry(int(e["caption_index"]), float(e["v"]), float(e["w"]))
                           for e in record["entries"]]
            except KeyError as e:
                raise ParseError("缺少字段", line=line_number, field=str(e.args[0])) from None
            except (TypeError, ValueError) as e:
                raise ParseError(str(e), line=line_number) from None
            if image_id in table:
                raise DuplicateId(f"第{line_number}行: 重复的权重记录 {image_id}")
            entries.sort(key=lambda e: e.caption_index)
            if not entries or [e.caption_index for e in entries] != list(range(len(entries))):
                raise ParseError(f"图像 {image_id} 的caption_index必须恰好覆盖0到N-1",
                                 line=line_number, field="caption_index")
            table[image_id] = entries
    report(f"真值权重加载完成，共{len(table)}张图像")
    return table, metadata


@dataclass(frozen=True)
class Candidate:
    """一条待评测的生成描述，可附带检索用的查询向量"""
    image_id: str
    caption: str
    vector: Optional[Tuple[float, ...]] = None


def _candidate_from(record: Dict[str, Any], line: Optional[int]) -> Candidate:

    if "image_id" not in record:
        raise ParseError("缺少字段", line=line, field="image_id")
    caption = record.get("caption")
    if not isinstance(caption, str):
        raise ParseError("caption必须是字符串", line=line, field="caption")
    vector = record.get("vector")
    if vector is not None:
        if not isinstance(vector, list):
            raise ParseError("vector必须是数值列表", line=line, field="vector")
        try:
            vector = tuple(float(x) for x in vector)
        except (TypeError, ValueError):
            raise ParseError("vector必须是数值列表", line=line, field="vector") from None
    return Candidate(str(record["image_id"]), caption, vector)


def load_candidates(path: str) -> Dict[str, Candidate]:
    """支持JSON-lines或COCO结果格式的JSON数组"""
    text = _read_text(path)

    candidates: Dict[str, Candidate] = {}
    if text.lstrip().startswith("["):
        document = _loads_document(text)
        items = [(None, record) for record in document]
    else:
        items = list(_json_lines(io.StringIO(text)))

    for line, record in items:
        if not isinstance(record, dict):
            raise ParseError("候选描述必须是JSON对象", line=line)
        candidate = _candidate_from(record, line)
        if candidate.image_id in candidates:
            raise DuplicateId(f"图像 {candidate.image_id} 有多条候选描述")
        candidates[candidate.image_id] = candidate
    report(f"候选描述加载完成，共{len(candidates)}条（{path}）")
    return candidates
