"""Exception types shared across the library."""

from __future__ import annotations


class BudgetExceeded(RuntimeError):
    """A node/pair budget ran out before the requested tolerance was met.

    Carries the best certified data achieved so far, so callers can decide
    whether a partial enclosure is still usable.
    """

    def __init__(self, message: str, enclosure=None, nodes: int = 0):
        super().__init__(message)
        self.enclosure = enclosure
        self.nodes = nodes


class Inconclusive(RuntimeError):
    """A search could not certify a result (e.g. no straddling bracket).

    ``best`` holds whatever partial result was obtained.
    """

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


class IterationCapExceeded(RuntimeError):
    """A parameter scan hit its iteration cap; the request is infeasible at
    desk scale."""
