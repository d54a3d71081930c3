"""Exception types shared across the engine."""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all engine errors."""

    stage: str = "engine"


class UpstreamError(EngineError):
    """A model/provider call failed after exhausting retries."""

    stage = "upstream"


class AuthError(UpstreamError):
    """Missing or rejected credentials; raised before any network activity
    when the configured token env var is unset."""

    stage = "auth"


class UpstreamTimeout(UpstreamError):
    stage = "timeout"


class DimensionMismatch(EngineError):
    """Query vector dimensionality differs from the index's."""

    stage = "index"


class EmptyGraph(EngineError):
    """Query routing over a corpus graph with no leaves."""

    stage = "index"


class SpanOutOfBounds(EngineError):
    """A chunk's core span does not fit inside its source document."""

    stage = "retrieval"


class SchemaViolation(EngineError):
    """A model completion could not be parsed into a valid report, even
    after one repair attempt."""

    stage = "report"


class EmptyGroundTruth(EngineError):
    """Metrics requested against a case with no ground-truth spans."""

    stage = "eval"


class ConfigError(EngineError):
    stage = "config"
