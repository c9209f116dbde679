"""Tests for FilterBuilder and ExperimentBuilder fluent APIs."""

import pytest

from tentlab.builder import ExperimentBuilder, FilterBuilder
from tentlab.errors import InputError
from tentlab.models import (
    FilterOperator,
    PipelineStage,
    PlotKind,
    TentSourceKind,
    WeightKind,
)
from tentlab.presets import CommonGraphs, CommonSpaces


class TestFilterBuilder:
    """Tests for FilterBuilder class."""

    def test_empty_builder(self):
        """Test empty builder returns None."""
        builder = FilterBuilder()
        assert builder.build() is None

    def test_single_eq_filter(self):
        """Test building a single EQ filter."""
        filters = FilterBuilder().where("level").eq(2).build()

        assert len(filters) == 1
        assert filters[0].field == "level"
        assert filters[0].operator == FilterOperator.EQ
        assert filters[0].value == "2"

    def test_comparison_operators(self):
        """Test GT, GTE, LT, LTE operators."""
        filters = (
            FilterBuilder()
            .where("level")
            .gt(0)
            .where("coefficient")
            .gte(0.5)
            .where("radius")
            .lt(10)
            .where("support")
            .lte(50)
            .build()
        )

        assert [f.operator for f in filters] == [
            FilterOperator.GT,
            FilterOperator.GTE,
            FilterOperator.LT,
            FilterOperator.LTE,
        ]
        assert [f.value for f in filters] == ["0", "0.5", "10", "50"]

    def test_bool_and_float_values(self):
        """Booleans serialize lowercase and floats keep full precision."""
        filters = (
            FilterBuilder().where("radius_extended").ne(True).where("radius").eq(0.1).build()
        )
        assert filters[0].value == "true"
        assert filters[1].value == "0.1"

    def test_list_operators(self):
        """IN, NOT IN and BETWEEN join values with commas."""
        filters = (
            FilterBuilder()
            .where("level")
            .in_([-1, 0, 1])
            .where("cube")
            .not_in([3, 4])
            .where("coefficient")
            .between(0.25, 2)
            .build()
        )
        assert [f.value for f in filters] == ["-1,0,1", "3,4", "0.25,2"]

    def test_add_expression(self):
        """Raw tokens become filters."""
        filters = FilterBuilder().add_expression("level", "gte", "2").build()
        assert filters[0].operator == FilterOperator.GTE

    def test_add_expression_unknown(self):
        """Unknown operators list the valid ones."""
        with pytest.raises(InputError, match="Valid operators"):
            FilterBuilder().add_expression("level", "~", "2")


class TestExperimentBuilder:
    """Tests for ExperimentBuilder."""

    def test_minimal(self):
        """A bare builder gives the default stages."""
        config = ExperimentBuilder("space.json").build()
        assert config.space == "space.json"
        assert config.stages == [PipelineStage.SPACE_CHECK, PipelineStage.DECOMPOSE]
        assert config.tent.kind == TentSourceKind.ZERO

    def test_full_chain(self):
        """Every setter lands in the config."""
        config = (
            ExperimentBuilder(CommonSpaces.grid_1d(10))
            .weight_kind("power", a=0.5)
            .tent("random", density=0.4)
            .stages("space-check", "weights", "decompose")
            .params(p=0.25, q=3.0)
            .grid(ratio=2.0)
            .outputs("results", "area-profile", "level-atoms")
            .seed(7)
            .build()
        )
        assert config.weight.kind == WeightKind.POWER
        assert config.weight.params == {"a": 0.5}
        assert config.tent.params == {"density": 0.4}
        assert config.params.p == 0.25
        assert config.params.grid.ratio == 2.0
        assert config.outputs.directory == "results"
        assert config.outputs.plots == [PlotKind.AREA_PROFILE, PlotKind.LEVEL_ATOMS]
        assert config.seed == 7

    def test_weight_sources(self):
        """Weights come from a path or inline values."""
        assert ExperimentBuilder("s.json").weight_path("w.json").build().weight.path == "w.json"
        values = ExperimentBuilder("s.json").weight_values([1.0, 2.0]).build().weight.values
        assert values == [1.0, 2.0]

    def test_random_tent_needs_seed(self):
        """Randomized sources without a seed are rejected."""
        with pytest.raises(InputError, match="seed"):
            ExperimentBuilder("s.json").tent("random").build()

    def test_hardy_needs_graph(self):
        """The hardy stage needs a graph."""
        with pytest.raises(InputError, match="graph"):
            ExperimentBuilder("s.json").stages("hardy").seed(1).build()
        config = (
            ExperimentBuilder("s.json")
            .stages("hardy")
            .graph(CommonGraphs.path())
            .hardy_f("f.json")
            .build()
        )
        assert config.hardy_f == "f.json"

    def test_unknown_stage(self):
        """Unknown stages are input errors."""
        with pytest.raises(InputError, match="Invalid experiment config"):
            ExperimentBuilder("s.json").stages("render").build()
