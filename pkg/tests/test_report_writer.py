import json
import math
import os

import pytest

from models.experiment import AssertionResult, ExperimentReport
from models.fixed_point import Classification, FixedPointResult
from models.system_config import Frame
from models.tail_field import TailField
from services.field_calculus import FieldCalculator
from services.report_writer import ReportWriter
from utils.errors import ExperimentError


@pytest.fixture
def report():
    return ExperimentReport(
        experiment="load_curve",
        config_hash="0123abcd",
        seed=3,
        cell_keys=["v", "n"],
        cells=[
            {"v": 2.0, "n": 100, "load": 0.5, "busy_fraction": 0.49, "busy_half_width": None},
            {"v": 4.0, "n": 100, "load": 0.25, "busy_fraction": 0.26, "busy_half_width": 0.01},
        ],
        references={"load_curve": [[2.0, 0.5], [4.0, 0.25]]},
        assertions=[AssertionResult("load_strictly_decreasing", True, "loads=[0.5, 0.25]")],
        provenance={"seed": 3},
    )


class TestLongRows:
    def test_one_row_per_metric(self, report):
        rows = ReportWriter.long_rows(report)
        assert len(rows) == 6
        assert [r["metric"] for r in rows[:3]] == ["busy_fraction", "busy_half_width", "load"]
        assert rows[0] == {"v": "2.0", "n": "100", "metric": "busy_fraction", "value": "0.49"}
        assert rows[1]["value"] == ""

    def test_booleans(self):
        report = ExperimentReport(
            experiment="phi1_bound", config_hash="h", seed=0, cell_keys=["n"], cells=[{"n": 5, "flag": True}]
        )
        assert ReportWriter.long_rows(report)[0]["value"] == "true"


class TestEmit:
    def test_file_names_and_contents(self, report, tmp_path):
        out = str(tmp_path / "results")
        paths = ReportWriter.emit(report, out)
        assert os.path.basename(paths["csv"]) == "load_curve_0123abcd_3.csv"
        assert os.path.basename(paths["json"]) == "load_curve_0123abcd_3.json"
        assert "fp" not in paths

        cells = ReportWriter.read_cells_csv(paths["csv"])
        assert list(cells[0].keys()) == ["v", "n", "metric", "value"]
        assert len(cells) == 6

        with open(paths["json"], encoding="utf-8") as fh:
            doc = json.load(fh)
        assert doc["passed"] is True
        assert doc["references"]["load_curve"] == [[2.0, 0.5], [4.0, 0.25]]

    def test_load_report(self, report, tmp_path):
        paths = ReportWriter.emit(report, str(tmp_path))
        loaded = ReportWriter.load_report(paths["json"])
        assert loaded.to_dict() == report.to_dict()

    def test_deterministic_output(self, report, tmp_path):
        first = ReportWriter.emit(report, str(tmp_path / "a"))
        second = ReportWriter.emit(report, str(tmp_path / "b"))
        for kind in ("csv", "json"):
            with open(first[kind], encoding="utf-8") as a, open(second[kind], encoding="utf-8") as b:
                assert a.read() == b.read()

    def test_fixed_point_field(self, report, tmp_path):
        fp = FixedPointResult(
            field=TailField.linear([0.0, 1.0, 2.0], [0.5, 0.2, 0.0]),
            speed=2.0,
            classification=Classification.REGULATED,
            frame=Frame(left=0.0),
            grid_step=1.0,
        )
        paths = ReportWriter.emit(report, str(tmp_path), fixed_point=fp)
        assert paths["fp"].endswith("load_curve_0123abcd_3_fp.csv")
        field = FieldCalculator.from_csv(paths["fp"])
        assert field.at(1.0) == pytest.approx(0.2)

    def test_infinite_half_width_survives_json(self, report, tmp_path):
        report.cells[0]["busy_half_width"] = math.inf
        paths = ReportWriter.emit(report, str(tmp_path))
        assert ReportWriter.load_report(paths["json"]).cells[0]["busy_half_width"] == math.inf

    def test_unwritable_directory(self, report, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x", encoding="utf-8")
        with pytest.raises(ExperimentError) as exc:
            ReportWriter.emit(report, str(blocker / "sub"))
        assert exc.value.error_code == "IO_ERROR"

    def test_missing_report(self, tmp_path):
        with pytest.raises(ExperimentError) as exc:
            ReportWriter.load_report(str(tmp_path / "nope.json"))
        assert exc.value.error_code == "IO_ERROR"
