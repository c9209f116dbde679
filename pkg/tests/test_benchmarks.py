"""Tests for the benchmark stage results."""

from benchmarks.benchmark_suite import StageResult
from tentlab.decomp import decompose
from tentlab.hardy import hardy_decompose
from tentlab.space import doubling_report
from tentlab.spectral import calderon_grid


class TestStageResult:
    """Tests for StageResult."""

    def test_empty(self):
        """A stage with no runs reports zero times and no atoms."""
        result = StageResult("Empty")
        assert result.median == 0.0
        assert result.worst == 0.0
        assert result.atoms is None
        assert "0 runs" in str(result)

    def test_timings(self):
        """Median and worst come from the recorded runs."""
        result = StageResult("Timed", seconds=[0.3, 0.1, 0.2])
        assert result.median == 0.2
        assert result.worst == 0.3

    def test_decomposition_counts(self, line, grid, random_tent):
        """A decomposition records its atom count and per-level atoms."""
        decomposition = decompose(line, grid, random_tent)
        result = StageResult("Decompose")
        result.record(decomposition)
        assert result.atoms == len(decomposition)
        assert sum(result.level_atoms) == result.atoms
        assert len(result.level_atoms) == len(decomposition.levels)
        assert "per level" in str(result)

    def test_hardy_counts(self, path_operator):
        """A Hardy run records its atom count and the report's pass flag."""
        f = path_operator.eigenvectors[:, 3]
        atoms, report = hardy_decompose(path_operator, calderon_grid(path_operator), f)
        result = StageResult("Hardy")
        result.record((atoms, report))
        assert result.atoms == report.atoms
        assert result.passed is report.passed

    def test_report_without_atoms(self, line):
        """Reports without atoms leave the atom fields empty."""
        result = StageResult("Doubling")
        result.record(doubling_report(line))
        assert result.atoms is None
        assert result.level_atoms == []
