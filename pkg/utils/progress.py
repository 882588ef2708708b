"""
进度信息输出，统一写到stderr，stdout只留给结果数据
"""
import sys

import config


def report(message: str) -> None:

    if config.VERBOSE:
        print(message, file=sys.stderr, flush=True)


def warn(message: str) -> None:
    # 警告不受VERBOSE控制
    print(f"警告: {message}", file=sys.stderr, flush=True)
