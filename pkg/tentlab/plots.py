"""CSV plot data for experiment reports."""

import logging
import os
import tempfile
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

from tentlab.errors import InputError
from tentlab.models import (
    CalderonReport,
    LevelReport,
    PlotKind,
    PlotSeries,
)

logger = logging.getLogger(__name__)

CSV_FORMAT = "%.17g"

PLOT_COLUMNS: Dict[PlotKind, List[str]] = {
    PlotKind.AREA_PROFILE: ["x", "area"],
    PlotKind.LEVEL_ATOMS: ["k", "atoms", "lambda_p_sum"],
    PlotKind.LAMBDA_SPECTRUM: ["index", "k", "lambda"],
    PlotKind.CALDERON_DEFECTS: ["eigenvalue", "defect"],
    PlotKind.CONSTANT_SWEEP: ["p", "ap_constant"],
}


def area_profile_series(area: np.ndarray) -> PlotSeries:
    return PlotSeries(
        columns=PLOT_COLUMNS[PlotKind.AREA_PROFILE],
        rows=[[float(x), float(v)] for x, v in enumerate(area)],
    )


def level_atoms_series(levels: Iterable[LevelReport]) -> PlotSeries:
    return PlotSeries(
        columns=PLOT_COLUMNS[PlotKind.LEVEL_ATOMS],
        rows=[[float(lv.k), float(lv.atoms), lv.lambda_p_sum] for lv in levels],
    )


def lambda_spectrum_series(entries: Iterable) -> PlotSeries:
    """One row per atom: position, level, coefficient."""
    return PlotSeries(
        columns=PLOT_COLUMNS[PlotKind.LAMBDA_SPECTRUM],
        rows=[[float(i), float(e.level), float(e.coefficient)] for i, e in enumerate(entries)],
    )


def calderon_series(report: CalderonReport) -> PlotSeries:
    return PlotSeries(
        columns=PLOT_COLUMNS[PlotKind.CALDERON_DEFECTS],
        rows=[[e.eigenvalue, e.defect] for e in report.eigen],
    )


def constant_sweep_series(ap_map: Sequence[Tuple[float, float]]) -> PlotSeries:
    return PlotSeries(
        columns=PLOT_COLUMNS[PlotKind.CONSTANT_SWEEP],
        rows=[[float(p), float(c)] for p, c in ap_map],
    )


def write_atomic(path: Union[str, Path], text: str) -> Path:
    """Write a file through a temporary sibling and ``os.replace``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def emit_plot_data(
    series: Dict[PlotKind, PlotSeries], kind: Union[PlotKind, str], path: Union[str, Path]
) -> Path:
    """
    Write one series of a report as CSV with a header row.

    Args:
        series: Series of a report, keyed by kind
        kind: Series to write
        path: Target file

    Returns:
        Path: The written file

    Raises:
        InputError: If the kind is unknown or missing from the report
    """
    try:
        kind = PlotKind(kind)
    except ValueError as e:
        valid = ", ".join(k.value for k in PlotKind)
        raise InputError(f"Unknown plot kind '{kind}'. Valid kinds: {valid}") from e
    if kind not in series:
        raise InputError(f"Report has no '{kind}' series")
    data = series[kind]
    table = np.asarray(data.rows, dtype=float).reshape(-1, len(data.columns))
    lines = [",".join(data.columns)]
    lines.extend(",".join(CSV_FORMAT % value for value in row) for row in table)
    logger.debug("Writing %d rows of %s to %s.", table.shape[0], kind, path)
    return write_atomic(path, "\n".join(lines) + "\n")


def read_plot_data(path: Union[str, Path]) -> Tuple[List[str], np.ndarray]:
    """Read a CSV written by ``emit_plot_data``."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    rows = [[float(v) for v in line.split(",")] for line in lines[1:] if line]
    return header, np.asarray(rows, dtype=float).reshape(-1, len(header))
