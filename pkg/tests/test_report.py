import csv
import io
import json

from utils.report import EvalReport, ImageRow, ReportFormat, SystemResult, write_report


def rows(*values):
    return [ImageRow(f"img{i}", f"caption {i}", cider, btw) for i, (cider, btw) in enumerate(values)]


class TestEmptyReport:

    def test_markdown_header_only(self):
        text = write_report(EvalReport([]), ReportFormat.MARKDOWN).decode("utf-8")
        assert text == "| Method | CIDEr | CIDErBtw |\n|---|---|---|\n"

    def test_csv_header_only(self):
        text = write_report(EvalReport([]), ReportFormat.CSV).decode("utf-8")
        assert text == "system,image_id,caption,cider,ciderbtw\n"

    def test_json_omits_means(self):
        document = json.loads(write_report(EvalReport([SystemResult("empty")]), ReportFormat.JSON))
        assert document["systems"] == [{"name": "empty", "images": []}]


class TestSingleSystem:

    def test_markdown(self):
        report = EvalReport([SystemResult("base", rows((7.5, 2.0), (8.5, 3.0)))])
        lines = write_report(report).decode("utf-8").splitlines()
        assert lines[2] == "| base | 8.0000 | 2.5000 |"

    def test_json(self):
        report = EvalReport([SystemResult("base", rows((7.5, 2.0)), {1: 50.0, 5: 100.0}, 2.0)],
                            {"split": "test", "k": 5})
        document = json.loads(write_report(report, ReportFormat.JSON))
        system = document["systems"][0]
        assert system["cider_mean"] == 7.5
        assert system["ciderbtw_mean"] == 2.0
        assert system["recall"] == {"R@1": 50.0, "R@5": 100.0}
        assert system["median_rank"] == 2.0
        assert system["images"][0] == {"image_id": "img0", "caption": "caption 0", "cider": 7.5, "ciderbtw": 2.0}
        assert document["metadata"] == {"split": "test", "k": 5}

    def test_csv_keeps_full_precision(self):
        value = 1.0 / 3.0
        report = EvalReport([SystemResult("base", [ImageRow("img0", "a dog, running", value, 0.0)])])
        parsed = list(csv.reader(io.StringIO(write_report(report, ReportFormat.CSV).decode("utf-8"))))
        assert parsed[1] == ["base", "img0", "a dog, running", repr(value), "0.0"]
        assert float(parsed[1][3]) == value


class TestTwoSystems:

    def test_recall_columns_union(self):
        report = EvalReport([
            SystemResult("base", rows((7.0, 3.0)), {1: 10.0, 5: 40.0}),
            SystemResult("ours", rows((7.2, 2.0)), {1: 20.0, 10: 60.0}),
        ])
        lines = write_report(report).decode("utf-8").splitlines()
        assert lines[0] == "| Method | CIDEr | CIDErBtw | R@1 | R@5 | R@10 |"
        assert lines[2] == "| base | 7.0000 | 3.0000 | 10.00 | 40.00 | - |"
        assert lines[3] == "| ours | 7.2000 | 2.0000 | 20.00 | - | 60.00 |"

    def test_system_without_rows_skipped_in_markdown(self):
        report = EvalReport([SystemResult("base", rows((7.0, 3.0))), SystemResult("empty")])
        lines = write_report(report).decode("utf-8").splitlines()
        assert len(lines) == 3
