import math
import os
import pickle
import time
from typing import Dict, Mapping, Optional

from preprocess.ngrams import NGram
from utils.progress import report


class DfTable:
    """n-gram文档频率表：df按图像计数，而不是按描述计数"""

    def __init__(self, frequencies: Mapping[int, Mapping[NGram, int]], num_images: int,
                 split_tag: str = "", max_order: Optional[int] = None):

        if num_images < 1:
            raise ValueError(f"num_images必须为正整数: {num_images}")
        self.num_images = num_images
        self.split_tag = split_tag
        self.max_order = max_order if max_order is not None else max(frequencies, default=0)
        # 阶数 -> {n-gram: df}，构建后不再修改
        self._frequencies: Dict[int, Dict[NGram, int]] = {
            n: dict(table) for n, table in frequencies.items()
        }
        self._log_num_images = math.log(float(num_images))

    def df(self, ngram: NGram) -> int:

        table = self._frequencies.get(len(ngram))
        if table is None:
            return 0
        return table.get(ngram, 0)

    def idf(self, ngram: NGram) -> float:
        """log(num_images / df)，未出现的n-gram按df=1处理"""
        return self._log_num_images - math.log(float(max(1, self.df(ngram))))

    def vocabulary_size(self) -> int:

        return sum(len(table) for table in self._frequencies.values())

    def __eq__(self, other) -> bool:
        if not isinstance(other, DfTable):
            return NotImplemented
        return (self.num_images == other.num_images
                and self.split_tag == other.split_tag
                and self.max_order == other.max_order
                and self._frequencies == other._frequencies)

    def save(self, path: str) -> None:
        """将文档频率表保存到文件"""
        df_dir = os.path.dirname(path)
        if df_dir and not os.path.exists(df_dir):
            os.makedirs(df_dir)

        start_time = time.time()
        with open(path, 'wb') as f:
            data = {
                'frequencies': self._frequencies,
                'num_images': self.num_images,
                'split_tag': self.split_tag,
                'max_order': self.max_order,
            }
            pickle.dump(data, f)
        report(f"文档频率表已保存到 {path}，用时 {time.time() - start_time:.2f} 秒")

    @classmethod
    def load(cls, path: str) -> "DfTable":

        start_time = time.time()
        with open(path, 'rb') as f:
            data = pickle.load(f)
        try:
            table = cls(data['frequencies'], data['num_images'],
                        split_tag=data['split_tag'], max_order=data['max_order'])
        except KeyError as e:
            raise ValueError(f"文档频率文件 {path} 缺少字段 {e}") from e
        report(f"文档频率表加载完成，包含 {table.vocabulary_size()} 个n-gram，"
             f"{table.num_images} 张图像，用时 {time.time() - start_time:.2f} 秒")
        return table
