import json
import queue
import threading
import time
import concurrent.futures
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, TextIO, Tuple, Union

from index.storage import DfTable
from preprocess.tokenizer import Tokenizer
from utils.errors import ValidationError
from utils.file_loader import ImageRecord, dumps_line
from utils.progress import report
from .distinctiveness import DistinctivenessScorer, RewardParams, WeightTable
from .retriever import SimilarSet
from .scorer import CiderParams, TfIdfVector


class _ImageContext:
    """一张训练图像预先向量化的真值、相似图像描述和真值权重"""

    def __init__(self, gt_vectors: List[TfIdfVector], similar_vectors: List[List[TfIdfVector]],
                 weights: List[float]):

        self.gt_vectors = gt_vectors
        self.similar_vectors = similar_vectors
        self.weights = weights


class RewardServer:
    """为外部训练循环计算奖励 R = R~ - alpha_r * CIDErBtw"""

    def __init__(self, records: Sequence[ImageRecord], similar_sets: Mapping[str, SimilarSet],
                 df_table: DfTable, weight_table: Optional[WeightTable] = None,
                 cparams: CiderParams = CiderParams(), rparams: RewardParams = RewardParams()):

        start_time = time.time()
        self.scorer = DistinctivenessScorer(df_table, cparams)
        self.rparams = rparams
        self.tokenizer = Tokenizer()

        by_id = {record.id: record for record in records}
        gt_vectors = {
            record.id: self.scorer.vectorize_all(self.tokenizer.tokenize_all(record.captions))
            for record in records
        }

        self._contexts: Dict[str, _ImageContext] = {}
        for image_id, similar_set in similar_sets.items():
            if image_id not in by_id:
                continue
            missing = [n for n in similar_set.neighbor_ids if n not in gt_vectors]
            if missing:
                raise ValidationError(f"图像 {image_id} 的相似图像 {missing[0]} 不在数据集中")
            gts = gt_vectors[image_id]
            if weight_table is None:
                # 不加权时退化为普通CIDEr奖励
                weights = [1.0] * len(gts)
            elif image_id in weight_table:
                weights = [entry.w for entry in weight_table[image_id]]
                if len(weights) != len(gts):
                    raise ValidationError(
                        f"图像 {image_id} 的权重数量{len(weights)}与真值数量{len(gts)}不一致")
            else:
                continue
            similar = [gt_vectors[n] for n in similar_set.neighbor_ids]
            self._contexts[image_id] = _ImageContext(gts, similar, weights)

        report(f"奖励服务准备完成，共{len(self._contexts)}张图像，用时{time.time() - start_time:.2f}秒")

    def __contains__(self, image_id: str) -> bool:
        return image_id in self._contexts

    def score(self, image_id: str, candidate: str) -> Dict[str, float]:

        context = self._contexts.get(image_id)
        if context is None:
            raise KeyError(image_id)
        hyp = self.scorer.cider.vectorize(self.tokenizer.tokenize(candidate))
        # 每条真值的g_c只算一次，R~和普通CIDEr共用
        sims = [self.scorer.cider.similarity(hyp, ref) for ref in context.gt_vectors]
        r_tilde = sum(w * s for w, s in zip(context.weights, sims)) / len(sims)
        btw = self.scorer.ciderbtw_vectors(hyp, context.similar_vectors)
        return {
            "reward": r_tilde - self.rparams.alpha_r * btw,
            "r_tilde": r_tilde,
            "ciderbtw": btw,
            "cider": sum(sims) / len(sims),
        }

    def handle(self, request: Any, seq: int) -> Dict[str, Any]:
        """处理一个请求，任何错误都返回错误对象而不抛出"""
        if not isinstance(request, dict):
            return {"seq": seq, "error": "请求必须是JSON对象"}
        if isinstance(request.get("seq"), int) and not isinstance(request.get("seq"), bool):
            seq = request["seq"]
        image_id = request.get("image_id")
        candidate = request.get("candidate")
        if image_id is None or not isinstance(candidate, str):
            return {"seq": seq, "error": "请求必须包含image_id和字符串candidate"}
        image_id = str(image_id)
        if image_id not in self._contexts:
            return {"seq": seq, "image_id": image_id, "error": f"未知的图像id: {image_id}"}
        try:
            response: Dict[str, Any] = {"seq": seq, "image_id": image_id}
            response.update(self.score(image_id, candidate))
            return response
        except Exception as e:
            return {"seq": seq, "image_id": image_id, "error": f"评分失败: {type(e).__name__}"}

    def handle_line(self, line: Union[str, bytes], seq: int) -> Dict[str, Any]:
        """字节行按UTF-8解码，解码和解析的任何异常都变成错误对象"""
        try:
            if isinstance(line, bytes):
                line = line.decode("utf-8")
            request = json.loads(line)
        except UnicodeDecodeError as e:
            return {"seq": seq, "error": f"请求不是合法的UTF-8: 第{e.start}字节"}
        except json.JSONDecodeError as e:
            return {"seq": seq, "error": f"无法解析的请求: {e.msg}"}
        except Exception as e:
            # 嵌套过深时json抛出RecursionError
            return {"seq": seq, "error": f"无法处理的请求: {type(e).__name__}"}
        return self.handle(request, seq)


def _error_line(seq: int, e: BaseException) -> str:

    return dumps_line({"seq": seq, "error": f"无法处理的请求: {type(e).__name__}"}, ensure_ascii=True)


def serve(server: RewardServer, in_stream: Iterable[Union[str, bytes]], out_stream: TextIO,
          workers: int = 1) -> int:
    """逐行读取请求并发评分，按请求顺序写出响应，输入结束时返回处理的请求数

    输入行可以是str也可以是bytes，响应一律按ASCII转义输出。
    """
    pending: "queue.Queue[Optional[Tuple[int, concurrent.futures.Future]]]" = queue.Queue()

    def write_loop() -> None:
        while True:
            item = pending.get()
            if item is None:
                break
            seq, future = item
            try:
                text = dumps_line(future.result(), ensure_ascii=True)
            except Exception as e:
                text = _error_line(seq, e)
            try:
                out_stream.write(text + "\n")
                # 没有排队的响应时才刷新，减少系统调用
                if pending.empty():
                    out_stream.flush()
            except (OSError, ValueError) as e:
                report(f"写出第{seq}个响应失败: {e}")
        try:
            out_stream.flush()
        except (OSError, ValueError) as e:
            report(f"刷新输出失败: {e}")

    writer = threading.Thread(target=write_loop, daemon=True)
    writer.start()

    count = 0
    try:
        with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
            for line in in_stream:
                if not line.strip():
                    continue
                count += 1
                pending.put((count, executor.submit(server.handle_line, line, count)))
    finally:
        pending.put(None)
        writer.join()

    report(f"奖励服务结束，共处理{count}个请求")
    return count
