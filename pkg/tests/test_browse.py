"""Tests for filtering, sorting and paginating decomposition entries."""

import pytest

from tentlab.browse import (
    ENTRY_FIELDS,
    FILTER_STRATEGIES,
    FilterEngine,
    PaginationEngine,
    SortEngine,
    _coerce_value,
    _split_values,
    browse_entries,
    entry_rows,
    parse_sort,
)
from tentlab.decomp import decompose, decomposition_to_document
from tentlab.errors import InputError
from tentlab.models import (
    EntryFilter,
    EntryRow,
    FilterOperator,
    PaginationQuery,
    SortingOrder,
    SortingQuery,
)


def _row(level, index, coefficient, extended=False):
    return EntryRow(
        level=level,
        index=index,
        generation=0,
        cube=index,
        center=index,
        radius=1.5,
        coefficient=coefficient,
        support=3,
        radius_extended=extended,
    )


@pytest.fixture(name="rows")
def rows_fixture():
    return [
        _row(-1, 0, 4.0),
        _row(0, 0, 2.0, extended=True),
        _row(0, 1, 0.5),
        _row(1, 0, 1.0),
        _row(2, 0, 8.0, extended=True),
    ]


class TestStrategyRegistry:
    """Tests for the FILTER_STRATEGIES registry."""

    def test_all_operators_registered(self):
        """Every FilterOperator has a strategy registered."""
        for op in FilterOperator:
            assert op in FILTER_STRATEGIES, f"Missing strategy for {op}"

    def test_strategies_are_callable(self):
        """All registered strategies are callable."""
        assert all(callable(s) for s in FILTER_STRATEGIES.values())


class TestCoercion:
    """Tests for value coercion helpers."""

    def test_bool(self):
        """Boolean spellings parse."""
        assert _coerce_value("yes", bool) is True
        assert _coerce_value("F", bool) is False
        with pytest.raises(InputError, match="boolean"):
            _coerce_value("maybe", bool)

    def test_int_from_float_text(self):
        """Integers accept a float spelling."""
        assert _coerce_value("2.0", int) == 2

    def test_bad_float(self):
        """Unparseable numbers are input errors."""
        with pytest.raises(InputError, match="float"):
            _coerce_value("abc", float)

    def test_split(self):
        """Comma lists are split and stripped."""
        assert _split_values(" 1, 2 ,3") == ["1", "2", "3"]


class TestFilterEngine:
    """Tests for FilterEngine."""

    def test_no_filters(self, rows):
        """No filters keep every row."""
        assert FilterEngine().apply_filters(rows, None) == rows

    def test_gte(self, rows):
        """level >= 1 keeps the two top levels."""
        filters = [EntryFilter(field="level", operator=FilterOperator.GTE, value="1")]
        assert [r.level for r in FilterEngine().apply_filters(rows, filters)] == [1, 2]

    def test_and_logic(self, rows):
        """Filters combine with AND."""
        filters = [
            EntryFilter(field="level", operator=FilterOperator.EQ, value="0"),
            EntryFilter(field="radius_extended", operator=FilterOperator.EQ, value="true"),
        ]
        result = FilterEngine().apply_filters(rows, filters)
        assert [(r.level, r.index) for r in result] == [(0, 0)]

    def test_in_and_between(self, rows):
        """IN and BETWEEN parse comma lists."""
        in_filter = [EntryFilter(field="level", operator=FilterOperator.IN, value="-1,2")]
        assert len(FilterEngine().apply_filters(rows, in_filter)) == 2
        between = [
            EntryFilter(field="coefficient", operator=FilterOperator.BETWEEN, value="1,4")
        ]
        assert [r.coefficient for r in FilterEngine().apply_filters(rows, between)] == [
            4.0,
            2.0,
            1.0,
        ]

    def test_between_needs_two(self, rows):
        """BETWEEN with one value is an input error."""
        filters = [EntryFilter(field="level", operator=FilterOperator.BETWEEN, value="1")]
        with pytest.raises(InputError, match="low,high"):
            FilterEngine().apply_filters(rows, filters)

    def test_unknown_field(self, rows):
        """Unknown fields are ignored unless strict."""
        filters = [EntryFilter(field="color", operator=FilterOperator.EQ, value="red")]
        assert FilterEngine().apply_filters(rows, filters) == rows
        with pytest.raises(InputError, match="Available fields"):
            FilterEngine(strict_mode=True).apply_filters(rows, filters)


class TestSortEngine:
    """Tests for SortEngine."""

    def test_descending(self, rows):
        """Rows sort by coefficient descending."""
        sorting = SortingQuery(sort_by="coefficient", order=SortingOrder.DESC)
        result = SortEngine().apply_sort(rows, sorting)
        assert [r.coefficient for r in result] == [8.0, 4.0, 2.0, 1.0, 0.5]

    def test_stable(self, rows):
        """Equal keys keep their order."""
        sorting = SortingQuery(sort_by="generation", order=SortingOrder.ASC)
        assert SortEngine().apply_sort(rows, sorting) == rows

    def test_unknown_field(self, rows):
        """Unknown sort fields are ignored unless strict."""
        sorting = SortingQuery(sort_by="color", order=SortingOrder.ASC)
        assert SortEngine().apply_sort(rows, sorting) == rows
        with pytest.raises(InputError, match="Unknown sort field"):
            SortEngine(strict_mode=True).apply_sort(rows, sorting)

    def test_parse_sort(self):
        """Sort strings default to ascending."""
        assert parse_sort("level") == SortingQuery(sort_by="level", order=SortingOrder.ASC)
        assert parse_sort("radius:desc").order == SortingOrder.DESC
        with pytest.raises(InputError):
            parse_sort("radius:sideways")


class TestPaginationEngine:
    """Tests for PaginationEngine."""

    def test_pages(self, rows):
        """Pages slice in order and report totals."""
        engine = PaginationEngine(PaginationQuery(page=2, per_page=2))
        page = engine.build_response(len(rows), engine.paginate(rows))
        assert [r.level for r in page.data] == [0, 1]
        assert page.meta.pagination.total_pages == 3
        assert page.meta.pagination.current_page == 2

    def test_past_the_end(self, rows):
        """A page beyond the data is empty."""
        engine = PaginationEngine(PaginationQuery(page=9, per_page=2))
        assert engine.paginate(rows) == []

    def test_empty_total(self):
        """No rows still give one page."""
        engine = PaginationEngine(PaginationQuery(page=1, per_page=10))
        assert engine.build_response(0, []).meta.pagination.total_pages == 1

    def test_invalid(self):
        """Pages start at 1."""
        with pytest.raises(InputError):
            PaginationEngine(PaginationQuery(page=0, per_page=10))


class TestBrowseEntries:
    """Tests for browse_entries on real decompositions."""

    def test_rows_match_fields(self):
        """Entry rows expose exactly the browsable fields."""
        assert set(ENTRY_FIELDS) == set(EntryRow.model_fields)

    def test_decomposition_and_document_agree(self, line, grid, random_tent):
        """Browsing a decomposition or its document gives the same rows."""
        decomposition = decompose(line, grid, random_tent)
        document = decomposition_to_document(decomposition)
        assert entry_rows(decomposition) == entry_rows(document)

    def test_browse(self, line, grid, random_tent):
        """Filtered totals count every matching entry across pages."""
        decomposition = decompose(line, grid, random_tent)
        filters = [EntryFilter(field="coefficient", operator=FilterOperator.GT, value="0")]
        page = browse_entries(
            decomposition,
            filters,
            SortingQuery(sort_by="coefficient", order=SortingOrder.DESC),
            PaginationQuery(page=1, per_page=3),
        )
        assert page.meta.pagination.total_items == len(decomposition)
        assert len(page.data) == min(3, len(decomposition))
        coefficients = [r.coefficient for r in page.data]
        assert coefficients == sorted(coefficients, reverse=True)
        assert page.meta.filters == filters
