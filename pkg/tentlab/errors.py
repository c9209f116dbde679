"""Exception hierarchy for tentlab.

Every error carries a ``detail`` message and the process ``exit_code`` the CLI maps it to.
"""

from typing import Any, List, Optional, Tuple


class TentlabError(Exception):
    """Base class for all tentlab errors."""

    exit_code: int = 1

    def __init__(self, detail: str, exit_code: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code


class InputError(TentlabError):
    """Malformed document, missing file, invalid parameter or unknown kind."""

    exit_code = 2


class InvariantViolation(TentlabError):
    """A hard assertion of a report failed."""

    exit_code = 1


class ConvergenceError(InvariantViolation):
    """A quadrature gate or a generator target was not reached."""


class DecompositionError(InvariantViolation):
    """The tent decomposition could not place every sample.

    Args:
        detail: Human readable description
        samples: Offending ``(point, t-index)`` pairs
    """

    def __init__(self, detail: str, samples: Optional[List[Tuple[int, int]]] = None):
        super().__init__(detail)
        self.samples: List[Tuple[int, int]] = list(samples or [])

    def __reduce__(self) -> Tuple[Any, ...]:
        return (type(self), (self.detail, self.samples))
