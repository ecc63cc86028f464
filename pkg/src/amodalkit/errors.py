"""Exception types shared across the engine."""


class AmodalkitError(Exception):
    """Base class for engine errors."""


class DimensionMismatch(AmodalkitError):
    """Two rasters that must share a canvas do not."""

    def __init__(self, what: str, shape_a, shape_b):
        super().__init__(f"{what}: dimensions differ, {shape_a} vs {shape_b}")
        self.shape_a = shape_a
        self.shape_b = shape_b


class TargetNotFound(AmodalkitError):
    """The grounding backend could not locate the queried object.

    This is the complete-failure outcome: the run produces no completion,
    but it is data, not a crash.
    """


class BackendUnavailable(AmodalkitError):
    """A provider backend failed (transport, protocol, or server error)."""

    def __init__(self, message: str, endpoint: str | None = None):
        super().__init__(message)
        self.endpoint = endpoint


class GenerationError(AmodalkitError):
    """The synthetic-scene generator could not satisfy its constraints."""
