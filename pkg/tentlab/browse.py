"""Filter, sort and paginate the entries of a decomposition."""

import logging
from math import ceil
from typing import Any, Callable, Dict, List, Optional, Union

from tentlab.errors import InputError
from tentlab.models import (
    DecompositionDocument,
    EntryFilter,
    EntryRow,
    FilterOperator,
    Meta,
    Page,
    Pagination,
    PaginationQuery,
    SortingOrder,
    SortingQuery,
)

logger = logging.getLogger(__name__)

# Type alias for filter strategy functions
FilterStrategyFn = Callable[[Any, str, type], bool]

ENTRY_FIELDS: Dict[str, type] = {
    name: field.annotation for name, field in EntryRow.model_fields.items()
}


def _coerce_value(raw: str, pytype: type) -> Any:
    """
    Coerce a raw string to the field's Python type.

    Raises:
        InputError: If the value cannot be parsed
    """
    raw = raw.strip()
    if pytype is bool:
        val = raw.lower()
        if val in {"true", "1", "t", "yes", "y"}:
            return True
        if val in {"false", "0", "f", "no", "n"}:
            return False
        raise InputError(f"Cannot parse {raw!r} as a boolean")
    try:
        if pytype is int:
            try:
                return int(raw)
            except ValueError:
                return int(float(raw))
        return pytype(raw)
    except ValueError as e:
        raise InputError(f"Cannot parse {raw!r} as {pytype.__name__}") from e


def _split_values(raw: str) -> List[str]:
    return [item.strip() for item in raw.split(",")]


# --- Strategy functions for each filter operator ---


def _strategy_eq(value: Any, raw: str, pytype: type) -> bool:
    return value == _coerce_value(raw, pytype)


def _strategy_ne(value: Any, raw: str, pytype: type) -> bool:
    return value != _coerce_value(raw, pytype)


def _strategy_gt(value: Any, raw: str, pytype: type) -> bool:
    return value > _coerce_value(raw, pytype)


def _strategy_gte(value: Any, raw: str, pytype: type) -> bool:
    return value >= _coerce_value(raw, pytype)


def _strategy_lt(value: Any, raw: str, pytype: type) -> bool:
    return value < _coerce_value(raw, pytype)


def _strategy_lte(value: Any, raw: str, pytype: type) -> bool:
    return value <= _coerce_value(raw, pytype)


def _strategy_in(value: Any, raw: str, pytype: type) -> bool:
    return value in [_coerce_value(v, pytype) for v in _split_values(raw)]


def _strategy_not_in(value: Any, raw: str, pytype: type) -> bool:
    return not _strategy_in(value, raw, pytype)


def _strategy_between(value: Any, raw: str, pytype: type) -> bool:
    vals = _split_values(raw)
    if len(vals) != 2:
        raise InputError(f"between expects 'low,high', got {raw!r}")
    return _coerce_value(vals[0], pytype) <= value <= _coerce_value(vals[1], pytype)


# Strategy registry: maps FilterOperator -> handler function
FILTER_STRATEGIES: Dict[FilterOperator, FilterStrategyFn] = {
    FilterOperator.EQ: _strategy_eq,
    FilterOperator.NE: _strategy_ne,
    FilterOperator.GT: _strategy_gt,
    FilterOperator.GTE: _strategy_gte,
    FilterOperator.LT: _strategy_lt,
    FilterOperator.LTE: _strategy_lte,
    FilterOperator.IN: _strategy_in,
    FilterOperator.NOT_IN: _strategy_not_in,
    FilterOperator.BETWEEN: _strategy_between,
}


class FilterEngine:
    """
    Engine for filtering entry rows.

    Dispatches each filter to the strategy of its operator.
    """

    def __init__(self, strict_mode: bool = False):
        """
        Initialize FilterEngine.

        Args:
            strict_mode: If True, raise errors for unknown fields
        """
        self.strict_mode = strict_mode

    def apply_filters(
        self, rows: List[EntryRow], filters: Optional[List[EntryFilter]]
    ) -> List[EntryRow]:
        """
        Keep the rows matching every filter (AND logic).

        Args:
            rows: Rows to filter
            filters: Filters, or None

        Returns:
            List[EntryRow]: Matching rows in their original order

        Raises:
            InputError: If strict_mode is True and a field is unknown, or a value does not
                parse
        """
        if not filters:
            return rows
        active = []
        for f in filters:
            pytype = ENTRY_FIELDS.get(f.field)
            if pytype is None:
                if self.strict_mode:
                    available = ", ".join(sorted(ENTRY_FIELDS))
                    raise InputError(f"Unknown field '{f.field}'. Available fields: {available}")
                logger.debug("Ignoring filter on unknown field %r.", f.field)
                continue
            active.append((f, pytype, FILTER_STRATEGIES[f.operator]))
        return [
            row
            for row in rows
            if all(strategy(getattr(row, f.field), f.value, t) for f, t, strategy in active)
        ]


class SortEngine:
    """Engine for ordering entry rows."""

    def __init__(self, strict_mode: bool = False):
        """
        Initialize SortEngine.

        Args:
            strict_mode: If True, raise errors for unknown sort fields
        """
        self.strict_mode = strict_mode

    def apply_sort(self, rows: List[EntryRow], sorting: Optional[SortingQuery]) -> List[EntryRow]:
        """
        Stable sort of rows by one field.

        Raises:
            InputError: If strict_mode is True and the sort field is unknown
        """
        if not sorting or not sorting.sort_by:
            return rows
        if sorting.sort_by not in ENTRY_FIELDS:
            if self.strict_mode:
                available = ", ".join(sorted(ENTRY_FIELDS))
                raise InputError(
                    f"Unknown sort field '{sorting.sort_by}'. Available fields: {available}"
                )
            return rows
        return sorted(
            rows,
            key=lambda row: getattr(row, sorting.sort_by),
            reverse=sorting.order == SortingOrder.DESC,
        )


class PaginationEngine:
    """Engine for slicing rows into pages and building the page envelope."""

    def __init__(self, pagination: PaginationQuery):
        """
        Initialize PaginationEngine.

        Args:
            pagination: Pagination parameters (page, per_page)

        Raises:
            InputError: If page or per_page is below 1
        """
        if pagination.page < 1 or pagination.per_page < 1:
            raise InputError("page and per_page must be >= 1")
        self.pagination = pagination

    def paginate(self, rows: List[EntryRow]) -> List[EntryRow]:
        start = (self.pagination.page - 1) * self.pagination.per_page
        return rows[start : start + self.pagination.per_page]

    def build_response(
        self,
        total_items: int,
        data_page: List[EntryRow],
        filters: Optional[List[EntryFilter]] = None,
        sorting: Optional[SortingQuery] = None,
    ) -> Page[EntryRow]:
        per_page = self.pagination.per_page
        return Page[EntryRow](
            data=data_page,
            meta=Meta(
                pagination=Pagination(
                    total_items=total_items,
                    per_page=per_page,
                    current_page=self.pagination.page,
                    total_pages=max(1, ceil(total_items / per_page)),
                ),
                filters=filters,
                sort=sorting,
            ),
        )


def entry_rows(source: Union[DecompositionDocument, Any]) -> List[EntryRow]:
    """Summary rows of a decomposition or of its document."""
    entries = source.entries
    rows = []
    for e in entries:
        support = len(e.region)
        rows.append(
            EntryRow(
                level=e.level,
                index=e.index,
                generation=e.generation,
                cube=e.cube,
                center=e.center,
                radius=e.radius,
                coefficient=e.coefficient,
                support=support,
                radius_extended=e.radius_extended,
            )
        )
    return rows


def browse_entries(
    source: Union[DecompositionDocument, Any],
    filters: Optional[List[EntryFilter]] = None,
    sorting: Optional[SortingQuery] = None,
    pagination: Optional[PaginationQuery] = None,
    strict_mode: bool = True,
) -> Page[EntryRow]:
    """
    Filter, sort and paginate decomposition entries.

    Args:
        source: AtomicDecomposition or DecompositionDocument
        filters: AND filters on EntryRow fields
        sorting: Sort field and order
        pagination: Page and size (default: page 1 of 20)
        strict_mode: Reject unknown fields

    Returns:
        Page[EntryRow]: The requested page with totals
    """
    pagination = pagination or PaginationQuery(page=1, per_page=20)
    rows = entry_rows(source)
    rows = FilterEngine(strict_mode).apply_filters(rows, filters)
    rows = SortEngine(strict_mode).apply_sort(rows, sorting)
    engine = PaginationEngine(pagination)
    return engine.build_response(len(rows), engine.paginate(rows), filters, sorting)


def parse_sort(raw: str) -> SortingQuery:
    """Parse ``field`` or ``field:asc|desc``."""
    field, _, order = raw.partition(":")
    try:
        return SortingQuery(sort_by=field, order=SortingOrder(order or "asc"))
    except ValueError as e:
        raise InputError(f"Invalid sort {raw!r}") from e
