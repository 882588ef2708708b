import time
import concurrent.futures
from collections import Counter
from typing import Dict, Optional, Sequence

import config
from preprocess.ngrams import ngram_set
from preprocess.tokenizer import Tokenizer
from search.scorer import CiderParams
from utils.errors import EmptyCorpus, EmptyCaptions
from utils.file_loader import ImageRecord
from utils.parallel import resolve_workers, split_batches
from utils.progress import report
from .storage import DfTable


class DfIndexer:
    """文档频率索引器，按批次并行统计每张图像的n-gram集合"""

    def __init__(self, params: Optional[CiderParams] = None, tokenizer: Optional[Tokenizer] = None,
                 threads: int = 0):

        self.params = params or CiderParams()
        self.tokenizer = tokenizer or Tokenizer()
        self.max_threads = resolve_workers(threads)

    def image_ngrams(self, record: ImageRecord) -> set:
        """一张图像所有参考描述的n-gram并集，同一n-gram在一张图中只计一次"""
        if not record.captions:
            raise EmptyCaptions(f"图像 {record.id} 没有参考描述")
        grams = set()
        for caption in record.captions:
            grams |= ngram_set(self.tokenizer.tokenize(caption), self.params.max_order)
        return grams

    def _process_batch(self, batch: Sequence[ImageRecord]) -> Counter:

        batch_counts = Counter()
        for record in batch:
            batch_counts.update(self.image_ngrams(record))
        return batch_counts

    def build(self, references: Sequence[ImageRecord], split_tag: str = "") -> DfTable:

        if not references:
            raise EmptyCorpus("参考语料为空，无法统计文档频率")

        start_time = time.time()
        batches = split_batches(list(references), config.BATCH_SIZE)
        workers = min(self.max_threads, len(batches))
        report(f"开始统计{len(references)}张图像的文档频率，"
               f"使用{workers}个线程，共{len(batches)}批")

        # 计数合并满足交换律，结果与分批方式无关；仍按批次顺序归并
        totals = Counter()
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
            for batch_counts in executor.map(self._process_batch, batches):
                totals.update(batch_counts)

        frequencies: Dict[int, Dict] = {n: {} for n in range(1, self.params.max_order + 1)}
        for gram in sorted(totals):
            frequencies[len(gram)][gram] = totals[gram]

        table = DfTable(frequencies, len(references), split_tag=split_tag,
                        max_order=self.params.max_order)
        report(f"文档频率统计完成，共{table.vocabulary_size()}个n-gram，"
               f"用时{time.time() - start_time:.2f}秒")
        return table


def build_df(references: Sequence[ImageRecord], params: Optional[CiderParams] = None,
             split_tag: str = "", threads: int = 0) -> DfTable:

    return DfIndexer(params, threads=threads).build(references, split_tag=split_tag)
