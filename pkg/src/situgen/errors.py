"""Exception types shared across the package."""

from __future__ import annotations


class SitugenError(Exception):
    """Base class for all errors raised by this package."""


class SceneValidationError(SitugenError):
    """A scene file or in-memory scene violates the schema or an invariant.

    `field` names the offending field (dotted path) when known.
    """

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(message if field is None else f"{field}: {message}")


class SamplingError(SitugenError):
    """A situation/goal sampler cannot satisfy its preconditions."""


class PlanningError(SitugenError):
    """Path planning failed (unreachable goal, bad start cell)."""


class GenerationError(SitugenError):
    """QA generation or prompt assembly failed."""


class ParseError(SitugenError):
    """Model or file output could not be parsed; carries the raw text."""

    def __init__(self, message: str, raw: str = ""):
        self.raw = raw
        super().__init__(message)


class EvaluationError(SitugenError):
    """Scoring inputs are invalid (empty, mismatched, out of range)."""


class RefinementError(SitugenError):
    """Refinement inputs are inconsistent (e.g. dangling verdict ids)."""
