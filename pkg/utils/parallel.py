import os
from typing import List, Sequence

import config


def resolve_workers(threads: int = 0) -> int:
    """确定线程数：参数 > 环境变量 > 配置，0表示自动选择"""
    workers = threads or int(os.environ.get("DCEVAL_THREADS", config.MAX_THREADS))
    if workers <= 0:
        workers = min(os.cpu_count() or 4, config.THREAD_LIMIT)  # 限制最大线程数
    return workers


def split_batches(items: Sequence, batch_size: int) -> List[Sequence]:

    if batch_size <= 0:
        batch_size = max(1, len(items))
    return [items[i:i + batch_size] for i in range(0, len(items), batch_size)]
