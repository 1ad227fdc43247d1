"""Exception types shared across the package."""

from __future__ import annotations


class FlipClusterError(Exception):
    """Base class for all package-specific errors."""


class SegmentOverflow(FlipClusterError):
    """A computation ran off the end of a finite line segment.

    Raised when a parameter lies outside a line's range, when a height is
    not transferable across a wall, or when a projection/bridge foot lands
    on a segment endpoint that the ambient tree continues past (so a longer
    segment could move the foot).  Carries enough context for a generator
    to grow the offending segment.
    """

    def __init__(self, message: str, *, edge: object = None, param: object = None):
        super().__init__(message)
        self.edge = edge
        self.param = param


class InvalidPointError(FlipClusterError, ValueError):
    """A point reference does not belong to the tree or piece in question."""


class NotOnLineError(FlipClusterError, ValueError):
    """A tree point was expected to lie on a given line but does not."""


class ClusterValidationError(FlipClusterError, ValueError):
    """An instance description violates the wellformedness rules.

    ``problems`` is a list of (code, context, message) triples; the string
    form lists every problem so a failing file can be fixed in one pass.
    """

    def __init__(self, problems: list[tuple[str, str, str]]):
        self.problems = problems
        lines = [f"[{code}] {ctx}: {msg}" for code, ctx, msg in problems]
        super().__init__("instance validation failed:\n" + "\n".join(lines))


class InstanceDefect(FlipClusterError):
    """A validated-looking instance turned out unusable mid-computation."""


class SizeCapError(FlipClusterError):
    """An exhaustive routine refused an input above its size cap."""


class NonConvexObjective(FlipClusterError):
    """The convexity certificate of a piecewise-linear objective failed."""


class ObjectiveStructureError(FlipClusterError):
    """A piecewise-linear objective couples variables in an unsupported shape."""
