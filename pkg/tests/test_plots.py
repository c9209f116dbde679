"""Tests for CSV plot data."""

import numpy as np
import pytest

from tentlab.errors import InputError
from tentlab.models import CalderonEigen, CalderonReport, LevelReport, PlotKind
from tentlab.plots import (
    PLOT_COLUMNS,
    area_profile_series,
    calderon_series,
    constant_sweep_series,
    emit_plot_data,
    level_atoms_series,
    read_plot_data,
    write_atomic,
)


class TestSeries:
    """Tests for the series builders."""

    def test_every_kind_has_columns(self):
        """Each plot kind declares its header."""
        assert set(PLOT_COLUMNS) == set(PlotKind)

    def test_area_profile(self):
        """Area profiles are indexed by point."""
        series = area_profile_series(np.array([0.5, 0.25]))
        assert series.columns == ["x", "area"]
        assert series.rows == [[0.0, 0.5], [1.0, 0.25]]

    def test_level_atoms(self):
        """Level rows carry k, atom count and sum lambda^p."""
        level = LevelReport(
            k=-2, omega_size=3, omega_star_size=4, cubes=2, atoms=2, lambda_p_sum=1.5
        )
        assert level_atoms_series([level]).rows == [[-2.0, 2.0, 1.5]]

    def test_calderon(self):
        """Calderón rows pair eigenvalues with defects."""
        report = CalderonReport(
            residual=0.0,
            worst_defect=1e-6,
            eigen=[CalderonEigen(eigenvalue=0.5, defect=1e-6, covered=True)],
        )
        assert calderon_series(report).rows == [[0.5, 1e-6]]


class TestEmitPlotData:
    """Tests for emit_plot_data."""

    def test_csv(self, tmp_path):
        """Series are written with a header and full precision."""
        series = {PlotKind.CONSTANT_SWEEP: constant_sweep_series([(1.0, 3.0), (2.0, 1.0 / 3.0)])}
        path = emit_plot_data(series, "constant-sweep", tmp_path / "sweep.csv")
        header, table = read_plot_data(path)
        assert header == ["p", "ap_constant"]
        assert table[1, 1] == 1.0 / 3.0
        assert path.read_text().splitlines()[1] == "1,3"

    def test_empty_series(self, tmp_path):
        """An empty series writes only the header."""
        series = {PlotKind.AREA_PROFILE: area_profile_series(np.array([]))}
        path = emit_plot_data(series, PlotKind.AREA_PROFILE, tmp_path / "area.csv")
        assert path.read_text() == "x,area\n"

    def test_unknown_kind(self, tmp_path):
        """Unknown kinds list the valid ones."""
        with pytest.raises(InputError, match="Valid kinds"):
            emit_plot_data({}, "histogram", tmp_path / "h.csv")

    def test_missing_series(self, tmp_path):
        """Kinds absent from the report are input errors."""
        with pytest.raises(InputError, match="no 'level-atoms' series"):
            emit_plot_data({}, PlotKind.LEVEL_ATOMS, tmp_path / "l.csv")


class TestWriteAtomic:
    """Tests for write_atomic."""

    def test_creates_parents(self, tmp_path):
        """Missing directories are created and no temporary files remain."""
        path = write_atomic(tmp_path / "a" / "b" / "out.json", "{}")
        assert path.read_text() == "{}"
        assert [p.name for p in path.parent.iterdir()] == ["out.json"]

    def test_replaces(self, tmp_path):
        """An existing file is replaced."""
        path = tmp_path / "out.txt"
        path.write_text("old")
        write_atomic(path, "new")
        assert path.read_text() == "new"
