"""
异常定义，所有输入校验错误都继承自ValidationError（命令行退出码为2）
"""
from typing import Optional


class DcevalError(Exception):
    """本项目所有异常的基类"""


class ValidationError(DcevalError, ValueError):
    """输入不满足约定"""


class EmptyCorpus(ValidationError):
    pass


class NoReferences(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class UnknownId(ValidationError, KeyError):

    def __str__(self) -> str:
        # KeyError会给消息加引号
        return str(self.args[0]) if self.args else ""


class NoCaptionEmbeddings(ValidationError):
    pass


class PoolTooSmall(ValidationError):
    pass


class EmptySimilarSet(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class OutOfRange(ValidationError):
    pass


class ParseError(ValidationError):
    """解析错误，记录出错的行号和字段"""

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        location = []
        if line is not None:
            location.append(f"第{line}行")
        if field is not None:
            location.append(f"字段'{field}'")
        if location:
            message = f"{'，'.join(location)}: {message}"
        super().__init__(message)
        self.line = line
        self.field = field


class DuplicateId(ValidationError):
    pass


class EmptyCaptions(ValidationError):
    pass


class MissingHeader(ValidationError):
    pass


class OrphanCaption(ValidationError):
    pass


class ZeroVector(ValidationError):
    pass


class MissingCandidate(ValidationError):
    pass


class MissingSimilarSet(ValidationError):
    pass
