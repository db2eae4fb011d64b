"""
Report emission: a long-format CSV of the cells, a JSON summary and an
optional fixed-point field, under deterministic `{experiment}_{hash}_{seed}` names.
"""

import csv
import json
import logging
import os
from typing import Dict, List, Optional

from models.experiment import ExperimentReport
from models.fixed_point import FixedPointResult
from services.field_calculus import FieldCalculator
from utils.errors import ExperimentError

logger = logging.getLogger(__name__)


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


class ReportWriter:
    @staticmethod
    def long_rows(report: ExperimentReport) -> List[Dict[str, str]]:
        """One row per (cell, metric); metrics sorted by name."""
        rows = []
        for cell in report.cells:
            keys = {k: _format(cell.get(k)) for k in report.cell_keys}
            for metric in sorted(k for k in cell if k not in report.cell_keys):
                rows.append({**keys, "metric": metric, "value": _format(cell[metric])})
        return rows

    @staticmethod
    def emit(report: ExperimentReport, out_dir: str, fixed_point: Optional[FixedPointResult] = None) -> Dict[str, str]:
        """Write the report files; returns their paths by kind."""
        base = os.path.join(out_dir, report.base_name)
        paths = {"csv": f"{base}.csv", "json": f"{base}.json"}
        try:
            os.makedirs(out_dir, exist_ok=True)
            with open(paths["csv"], "w", encoding="utf-8", newline="") as fh:
                writer = csv.DictWriter(fh, fieldnames=list(report.cell_keys) + ["metric", "value"], lineterminator="\n")
                writer.writeheader()
                writer.writerows(ReportWriter.long_rows(report))
            with open(paths["json"], "w", encoding="utf-8") as fh:
                json.dump(report.to_dict(), fh, sort_keys=True, indent=2)
                fh.write("\n")
            if fixed_point is not None:
                paths["fp"] = f"{base}_fp.csv"
                FieldCalculator.to_csv(fixed_point.field, paths["fp"])
        except OSError as e:
            raise ExperimentError(
                f"cannot write report files: {e}",
                experiment=report.experiment,
                error_code="IO_ERROR",
                details={"out_dir": out_dir},
            ) from e
        logger.info("Wrote %s report to %s", report.experiment, base)
        return paths

    @staticmethod
    def load_report(path: str) -> ExperimentReport:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                return ExperimentReport.from_dict(json.load(fh))
        except OSError as e:
            raise ExperimentError(f"cannot read report {path}: {e}", experiment="", error_code="IO_ERROR") from e

    @staticmethod
    def read_cells_csv(path: str) -> List[Dict[str, str]]:
        try:
            with open(path, "r", encoding="utf-8", newline="") as fh:
                return list(csv.DictReader(fh))
        except OSError as e:
            raise ExperimentError(f"cannot read cells {path}: {e}", experiment="", error_code="IO_ERROR") from e
