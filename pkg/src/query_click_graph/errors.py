"""Exception hierarchy shared by the pipeline stages."""

from __future__ import annotations

from typing import Optional


class ClickGraphError(Exception):
    """Base error carrying the process exit code the CLI should use."""

    exit_code = 1

    def __init__(self, message: str, exit_code: Optional[int] = None) -> None:
        super().__init__(message)
        if exit_code is not None:
            self.exit_code = exit_code


class ConfigError(ClickGraphError):
    """Invalid combination of settings, detected before any work starts."""

    exit_code = 2


class IngestIOError(ClickGraphError):
    """Reading a log source failed; `offset` is the byte position reached."""

    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class DuplicateEdgeError(ClickGraphError):
    """The same (query, url) pair was supplied twice to the graph builder."""


class SnapshotFormatError(ClickGraphError):
    """A graph snapshot or edge file could not be understood."""


class DegenerateFitError(ClickGraphError):
    """Too few usable points, or no spread in x, for a log-log regression."""


class InvalidWeightSchemeError(ClickGraphError):
    """Q_total / U_total smaller than a degree they must bound."""

    exit_code = 2


class ZeroVectorError(ClickGraphError):
    """A query row has no probability mass, so the similarity is undefined."""


class UnknownQueryError(ClickGraphError):
    """The requested query string or id is not part of the graph."""


class MissingCategoryError(ClickGraphError):
    """A query has no entry in the category catalog."""


class EmptySampleError(ClickGraphError):
    """No sampled query could be evaluated."""
