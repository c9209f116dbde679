"""Fluent builders for entry filters and experiment configs."""

from typing import Any, Dict, List, Optional, Union

from pydantic import ValidationError

from tentlab.errors import InputError
from tentlab.models import (
    EntryFilter,
    ExperimentConfig,
    FilterOperator,
    GraphSpec,
    PipelineStage,
    PlotKind,
    SpaceDocument,
    TentSourceKind,
    WeightKind,
)

FilterValue = Union[str, int, float, bool]


class FieldBuilder:
    """
    Builder for a single field's filter conditions.

    Provides a fluent interface for building filter conditions on an entry field.
    """

    def __init__(self, filter_builder: "FilterBuilder", field: str):
        """
        Initialize FieldBuilder.

        Args:
            filter_builder: Parent FilterBuilder instance
            field: Entry field to build filters for
        """
        self._filter_builder = filter_builder
        self._field = field

    def _add_filter(self, operator: FilterOperator, value: str) -> "FilterBuilder":
        """Add a filter and return the parent builder."""
        self._filter_builder._filters.append(
            EntryFilter(field=self._field, operator=operator, value=value)
        )
        return self._filter_builder

    @staticmethod
    def _to_str(value: FilterValue) -> str:
        """Convert a value to string representation."""
        if isinstance(value, bool):
            return "true" if value else "false"
        if isinstance(value, float):
            return repr(value)
        return str(value)

    def eq(self, value: FilterValue) -> "FilterBuilder":
        """Equal to (=)."""
        return self._add_filter(FilterOperator.EQ, self._to_str(value))

    def ne(self, value: FilterValue) -> "FilterBuilder":
        """Not equal to (!=)."""
        return self._add_filter(FilterOperator.NE, self._to_str(value))

    def gt(self, value: Union[int, float]) -> "FilterBuilder":
        """
        Greater than (>).

        Args:
            value: Value to compare against

        Returns:
            FilterBuilder: Parent builder for chaining
        """
        return self._add_filter(FilterOperator.GT, self._to_str(value))

    def gte(self, value: Union[int, float]) -> "FilterBuilder":
        """Greater than or equal to (>=)."""
        return self._add_filter(FilterOperator.GTE, self._to_str(value))

    def lt(self, value: Union[int, float]) -> "FilterBuilder":
        """Less than (<)."""
        return self._add_filter(FilterOperator.LT, self._to_str(value))

    def lte(self, value: Union[int, float]) -> "FilterBuilder":
        """Less than or equal to (<=)."""
        return self._add_filter(FilterOperator.LTE, self._to_str(value))

    def in_(self, values: List[FilterValue]) -> "FilterBuilder":
        """
        IN list of values.

        Args:
            values: List of values to match against

        Returns:
            FilterBuilder: Parent builder for chaining
        """
        return self._add_filter(FilterOperator.IN, ",".join(self._to_str(v) for v in values))

    def not_in(self, values: List[FilterValue]) -> "FilterBuilder":
        """NOT IN list of values."""
        return self._add_filter(FilterOperator.NOT_IN, ",".join(self._to_str(v) for v in values))

    def between(self, low: Union[int, float], high: Union[int, float]) -> "FilterBuilder":
        """
        Between low and high (inclusive).

        Args:
            low: Lower bound
            high: Upper bound

        Returns:
            FilterBuilder: Parent builder for chaining
        """
        value = f"{self._to_str(low)},{self._to_str(high)}"
        return self._add_filter(FilterOperator.BETWEEN, value)


class FilterBuilder:
    """
    Fluent builder for entry filter lists.

    Example usage:
        filters = (
            FilterBuilder()
            .where("level").gte(2)
            .where("radius_extended").eq(False)
            .build()
        )
    """

    def __init__(self):
        """Initialize an empty FilterBuilder."""
        self._filters: List[EntryFilter] = []

    def where(self, field: str) -> FieldBuilder:
        """
        Start building a filter for a field.

        Args:
            field: Name of the entry field to filter on

        Returns:
            FieldBuilder: Builder for the field's filter condition
        """
        return FieldBuilder(self, field)

    def add_filter(self, field: str, operator: FilterOperator, value: str) -> "FilterBuilder":
        self._filters.append(EntryFilter(field=field, operator=operator, value=value))
        return self

    def add_expression(self, field: str, operator: str, value: str) -> "FilterBuilder":
        """
        Add a filter from raw tokens, e.g. ``("level", "gte", "2")``.

        Raises:
            InputError: If the operator is unknown
        """
        try:
            op = FilterOperator(operator)
        except ValueError as e:
            valid = ", ".join(o.value for o in FilterOperator)
            raise InputError(f"Unknown operator '{operator}'. Valid operators: {valid}") from e
        return self.add_filter(field, op, value)

    def build(self) -> Optional[List[EntryFilter]]:
        """
        Build and return the list of filters (AND logic).

        Returns:
            Optional[List[EntryFilter]]: List of filters, or None if empty
        """
        return self._filters if self._filters else None


class ExperimentBuilder:
    """
    Fluent builder for experiment configs.

    Example usage:
        config = (
            ExperimentBuilder("space.json")
            .weight_kind("power", a=0.5)
            .tent("random", density=0.4)
            .stages("space-check", "decompose")
            .params(p=0.5, q=2.0)
            .seed(7)
            .build()
        )
    """

    def __init__(self, space: Union[str, SpaceDocument]):
        self._data: Dict[str, Any] = {"space": space, "params": {}, "outputs": {}}

    def weight_path(self, path: str) -> "ExperimentBuilder":
        self._data["weight"] = {"path": path}
        return self

    def weight_values(self, values: List[float]) -> "ExperimentBuilder":
        self._data["weight"] = {"values": list(values)}
        return self

    def weight_kind(self, kind: Union[WeightKind, str], **params: Any) -> "ExperimentBuilder":
        """
        Generate the weight from a kind.

        Args:
            kind: Generator kind
            **params: Generator parameters

        Returns:
            ExperimentBuilder: Self for chaining
        """
        self._data["weight"] = {"kind": kind, "params": params}
        return self

    def tent(self, kind: Union[TentSourceKind, str], **params: float) -> "ExperimentBuilder":
        self._data["tent"] = {"kind": kind, "params": params}
        return self

    def tent_path(self, path: str) -> "ExperimentBuilder":
        self._data["tent"] = {"path": path}
        return self

    def graph(self, graph: Union[str, GraphSpec]) -> "ExperimentBuilder":
        self._data["graph"] = graph
        return self

    def hardy_f(self, path: str) -> "ExperimentBuilder":
        self._data["hardy_f"] = path
        return self

    def stages(self, *stages: Union[PipelineStage, str]) -> "ExperimentBuilder":
        self._data["stages"] = list(stages)
        return self

    def params(self, **params: Any) -> "ExperimentBuilder":
        """Merge decomposition and Hardy parameters."""
        self._data["params"].update(params)
        return self

    def grid(self, **grid: Any) -> "ExperimentBuilder":
        self._data["params"].setdefault("grid", {}).update(grid)
        return self

    def outputs(self, directory: str, *plots: Union[PlotKind, str]) -> "ExperimentBuilder":
        self._data["outputs"].update({"directory": directory, "plots": list(plots)})
        return self

    def seed(self, seed: int) -> "ExperimentBuilder":
        self._data["seed"] = seed
        return self

    def build(self) -> ExperimentConfig:
        """
        Validate and return the config.

        Raises:
            InputError: If the assembled config is invalid
        """
        try:
            return ExperimentConfig.model_validate(self._data)
        except ValidationError as e:
            raise InputError(f"Invalid experiment config: {e}") from e
