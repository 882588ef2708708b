"""
评测报告：每个系统的语料均值与逐图结果，支持JSON、CSV和Markdown输出
"""
import csv
import io
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional


class ReportFormat(Enum):
    JSON = "json"
    CSV = "csv"
    MARKDOWN = "markdown"


@dataclass(frozen=True)
class ImageRow:
    image_id: str
    caption: str
    cider: float
    ciderbtw: float


@dataclass
class SystemResult:
    """一个描述生成系统的评测结果"""
    name: str
    rows: List[ImageRow] = field(default_factory=list)
    recall: Dict[int, float] = field(default_factory=dict)
    median_rank: Optional[float] = None

    @property
    def cider_mean(self) -> Optional[float]:
        if not self.rows:
            return None
        return sum(row.cider for row in self.rows) / len(self.rows)

    @property
    def ciderbtw_mean(self) -> Optional[float]:
        if not self.rows:
            return None
        return sum(row.ciderbtw for row in self.rows) / len(self.rows)


@dataclass
class EvalReport:
    systems: List[SystemResult]
    metadata: Dict[str, Any] = field(default_factory=dict)


def _system_summary(system: SystemResult) -> Dict[str, Any]:

    summary: Dict[str, Any] = {"name": system.name}
    # 没有逐图结果时不输出均值
    if system.rows:
        summary["cider_mean"] = system.cider_mean
        summary["ciderbtw_mean"] = system.ciderbtw_mean
    if system.recall:
        summary["recall"] = {f"R@{k}": value for k, value in sorted(system.recall.items())}
    if system.median_rank is not None:
        summary["median_rank"] = system.median_rank
    summary["images"] = [
        {"image_id": row.image_id, "caption": row.caption, "cider": row.cider, "ciderbtw": row.ciderbtw}
        for row in system.rows
    ]
    return summary


def _to_json(report: EvalReport) -> str:

    document = {
        "metadata": report.metadata,
        "systems": [_system_summary(system) for system in report.systems],
    }
    return json.dumps(document, ensure_ascii=False, indent=2, sort_keys=True) + "\n"


def _to_csv(report: EvalReport) -> str:

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["system", "image_id", "caption", "cider", "ciderbtw"])
    for system in report.systems:
        for row in system.rows:
            writer.writerow([system.name, row.image_id, row.caption, repr(row.cider), repr(row.ciderbtw)])
    return buffer.getvalue()


def _cell(value: Optional[float], digits: int = 2) -> str:

    return "-" if value is None else f"{value:.{digits}f}"


def _recall_columns(report: EvalReport) -> List[int]:

    ks = set()
    for system in report.systems:
        ks.update(system.recall)
    return sorted(ks)


def _to_markdown(report: EvalReport) -> str:

    ks = _recall_columns(report)
    header = ["Method", "CIDEr", "CIDErBtw"] + [f"R@{k}" for k in ks]
    lines = ["| " + " | ".join(header) + " |",
             "|" + "|".join(["---"] * len(header)) + "|"]
    for system in report.systems:
        if not system.rows:
            continue
        cells = [system.name, _cell(system.cider_mean, 4), _cell(system.ciderbtw_mean, 4)]
        cells += [_cell(system.recall.get(k)) for k in ks]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def write_report(report: EvalReport, fmt: ReportFormat = ReportFormat.MARKDOWN) -> bytes:

    if fmt is ReportFormat.JSON:
        text = _to_json(report)
    elif fmt is ReportFormat.CSV:
        text = _to_csv(report)
    else:
        text = _to_markdown(report)
    return text.encode("utf-8")
