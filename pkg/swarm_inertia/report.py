"""
Report Module
Success-rate tables and structured per-trial records written to CSV and JSON
"""
from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Tuple

import pandas as pd

from swarm_inertia.exceptions import InvalidArgumentError, TrialIOError

logger = logging.getLogger(__name__)

RATES_FILE = "report.csv"
CELLS_FILE = "cells.csv"
RECORDS_FILE = "report.json"
CELL_COLUMNS = [
    "dim",
    "method",
    "scheme",
    "n_agents",
    "successes",
    "trials",
    "rate",
    "ci_low",
    "ci_high",
    "mean_iterations",
    "mean_wall_time",
]
REQUIRED_CELL_COLUMNS = ["dim", "method", "n_agents", "successes", "trials", "rate"]


@dataclass
class TrialRecord:
    dim: int
    method: str
    n_agents: int
    trial: int
    seed: int
    final_x: Tuple[float, ...]
    final_f: float
    success: bool
    diverged: bool
    iterations: int
    inner_iterations: int
    final_agents: int
    wall_time: float = field(default=0.0, compare=False)


@dataclass
class CellSummary:
    """Aggregate of all trials sharing one (dim, method, N) cell."""

    dim: int
    method: str
    scheme: str
    n_agents: int
    successes: int
    trials: int
    rate: float
    ci_low: float
    ci_high: float
    mean_iterations: float
    parameters: Dict[str, Any] = field(default_factory=dict)
    mean_wall_time: float = field(default=0.0, compare=False)


@dataclass
class ExperimentReport:
    header: Dict[str, Any] = field(default_factory=dict)
    cells: List[CellSummary] = field(default_factory=list)
    records: List[TrialRecord] = field(default_factory=list)

    def cell(self, dim: int, method: str, n_agents: int) -> CellSummary:
        for cell in self.cells:
            if (cell.dim, cell.method, cell.n_agents) == (dim, method, n_agents):
                return cell
        raise KeyError((dim, method, n_agents))


def cells_frame(report: ExperimentReport) -> pd.DataFrame:
    rows = [{k: getattr(cell, k) for k in CELL_COLUMNS} for cell in report.cells]
    return pd.DataFrame(rows, columns=CELL_COLUMNS)


def validate_cells_frame(df: pd.DataFrame) -> bool:
    """
    Check the cell table before it is written

    Args:
        df: Frame from cells_frame

    Returns:
        True if valid, False otherwise
    """
    missing_columns = [col for col in REQUIRED_CELL_COLUMNS if col not in df.columns]
    if missing_columns:
        logger.error("Missing required columns: %s", missing_columns)
        return False
    if df.empty:
        return True
    if not df["rate"].between(0.0, 1.0).all():
        logger.error("Success rates outside [0, 1]")
        return False
    if not (df["rate"] == df["successes"] / df["trials"]).all():
        logger.error("Success rates disagree with successes / trials")
        return False
    if df.duplicated(subset=["dim", "method", "n_agents"]).any():
        logger.error("Duplicate (dim, method, N) cells")
        return False
    return True


def _format_rate(cell: pd.Series) -> str:
    return f"{100 * cell['rate']:.1f} [{100 * cell['ci_low']:.1f}, {100 * cell['ci_high']:.1f}]"


def rates_table(report: ExperimentReport) -> pd.DataFrame:
    """
    Success-rate table with Wilson intervals

    Rows are (d, method) in first-seen order, columns are N. Each entry reads
    "rate% [Wilson low, Wilson high]".
    """
    frame = cells_frame(report)
    if frame.empty:
        return pd.DataFrame(columns=["d", "method"])
    frame["entry"] = frame.apply(_format_rate, axis=1)
    row_order = list(dict.fromkeys(zip(frame["dim"], frame["method"])))
    table = frame.pivot(index=["dim", "method"], columns="n_agents", values="entry")
    table = table.reindex(pd.MultiIndex.from_tuples(row_order, names=["dim", "method"]))
    table = table.reindex(columns=sorted(table.columns))
    table.columns = [f"N={n}" for n in table.columns]
    table = table.reset_index().rename(columns={"dim": "d"})
    return table.fillna("")


def _preamble(report: ExperimentReport) -> List[str]:
    config = report.header.get("config", {})
    lines = [f"# {key}: {json.dumps(config[key], sort_keys=True)}" for key in sorted(config)]
    success = report.header.get("success")
    if success is not None:
        lines.append(f"# success: {json.dumps(success, sort_keys=True)}")
    return lines


def report_to_dict(report: ExperimentReport) -> Dict[str, Any]:
    """Plain-data form of a report without wall times."""
    cells = []
    for cell in report.cells:
        entry = asdict(cell)
        entry.pop("mean_wall_time")
        cells.append(entry)
    records = []
    for record in report.records:
        entry = asdict(record)
        entry.pop("wall_time")
        entry["final_x"] = list(record.final_x)
        records.append(entry)
    return {"header": report.header, "cells": cells, "records": records}


def report_from_dict(data: Dict[str, Any]) -> ExperimentReport:
    cells = [CellSummary(**entry) for entry in data.get("cells", [])]
    records = []
    for entry in data.get("records", []):
        entry = dict(entry)
        entry["final_x"] = tuple(float(v) for v in entry["final_x"])
        records.append(TrialRecord(**entry))
    return ExperimentReport(header=data.get("header", {}), cells=cells, records=records)


def emit_report(report: ExperimentReport, path: str) -> Dict[str, str]:
    """
    Write the rates table, the cell table and the structured record file

    report.csv holds the rates table under a "#"-commented parameter preamble,
    cells.csv one row per cell (wall times included) and report.json every
    cell and trial record with sorted keys and no timing data, so it is
    byte-identical for identical configs.

    Args:
        report: Report to write
        path: Output directory (created if needed)

    Returns:
        Mapping of file kind to written path
    """
    cells = cells_frame(report)
    if not validate_cells_frame(cells):
        raise InvalidArgumentError("report validation failed")

    paths = {
        "rates": os.path.join(path, RATES_FILE),
        "cells": os.path.join(path, CELLS_FILE),
        "records": os.path.join(path, RECORDS_FILE),
    }
    try:
        os.makedirs(path, exist_ok=True)
        with open(paths["rates"], "w", newline="") as f:
            for line in _preamble(report):
                f.write(line + "\n")
            rates_table(report).to_csv(f, index=False)
        cells.to_csv(paths["cells"], index=False, float_format="%.17g")
        with open(paths["records"], "w") as f:
            json.dump(report_to_dict(report), f, sort_keys=True, indent=1)
            f.write("\n")
    except OSError as e:
        logger.error("Error writing report to %s: %s", path, e)
        raise TrialIOError(path, "could not write report") from e

    logger.info("Successfully wrote %d cell(s) and %d trial record(s) to %s", len(report.cells), len(report.records), path)
    return paths


def load_report(path: str) -> ExperimentReport:
    """
    Parse a structured report back into an ExperimentReport

    Args:
        path: report.json itself or the directory holding it

    Returns:
        ExperimentReport equal to the one emitted (wall times read as 0)
    """
    if os.path.isdir(path):
        path = os.path.join(path, RECORDS_FILE)
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except OSError as e:
        logger.error("Error reading report %s: %s", path, e)
        raise TrialIOError(path, "could not read report") from e
    report = report_from_dict(data)
    logger.info("Loaded report with %d cell(s) from %s", len(report.cells), path)
    return report
