"""
Custom exceptions and error handling for oml-stream.
"""

from typing import Any, NoReturn

import numpy as np
from pydantic import ValidationError


class OmlStreamError(Exception):
    """Base exception for oml-stream."""

    def __init__(
        self,
        message: str,
        error_code: str = "OML_STREAM_ERROR",
        details: dict[str, Any] | None = None,
    ):
        self.message = message
        self.error_code = error_code
        self.details = details or {}
        super().__init__(message)


class DataParseError(OmlStreamError):
    """Malformed dataset text."""

    def __init__(
        self,
        message: str,
        line: int | None = None,
        details: dict[str, Any] | None = None,
    ):
        details = details or {}
        if line is not None:
            details["line"] = line
            message = f"line {line}: {message}"
        super().__init__(
            message=message,
            error_code="PARSE_ERROR",
            details=details,
        )


class DimensionError(OmlStreamError):
    """Label id or feature index outside the declared dimensions."""

    def __init__(
        self,
        message: str,
        line: int | None = None,
        details: dict[str, Any] | None = None,
    ):
        details = details or {}
        if line is not None:
            details["line"] = line
            message = f"line {line}: {message}"
        super().__init__(
            message=message,
            error_code="DIMENSION_ERROR",
            details=details,
        )


class ShapeError(OmlStreamError):
    """Array shapes do not agree."""

    def __init__(
        self,
        message: str,
        expected: Any = None,
        actual: Any = None,
        details: dict[str, Any] | None = None,
    ):
        details = details or {}
        if expected is not None:
            details["expected"] = expected
        if actual is not None:
            details["actual"] = actual
        super().__init__(
            message=message,
            error_code="SHAPE_ERROR",
            details=details,
        )


class ConfigError(OmlStreamError):
    """Invalid run, split or generator configuration."""

    def __init__(self, message: str, details: dict[str, Any] | None = None):
        super().__init__(
            message=message,
            error_code="CONFIG_ERROR",
            details=details,
        )


class NumericError(OmlStreamError):
    """Non-finite input or intermediate value."""

    def __init__(self, message: str, details: dict[str, Any] | None = None):
        super().__init__(
            message=message,
            error_code="NUMERIC_ERROR",
            details=details,
        )


class StoreStateError(OmlStreamError):
    """Operation not valid in the current model or store state."""

    def __init__(self, message: str, details: dict[str, Any] | None = None):
        super().__init__(
            message=message,
            error_code="STATE_ERROR",
            details=details,
        )


class QueryError(OmlStreamError):
    """Neighbor query cannot be answered."""

    def __init__(self, message: str, details: dict[str, Any] | None = None):
        super().__init__(
            message=message,
            error_code="QUERY_ERROR",
            details=details,
        )


class SingularUpdateError(OmlStreamError):
    """I - 2*lambda*A is singular for the requested step."""

    def __init__(
        self,
        message: str,
        step: float | None = None,
        details: dict[str, Any] | None = None,
    ):
        details = details or {}
        if step is not None:
            details["lambda"] = step
        super().__init__(
            message=message,
            error_code="SINGULAR_UPDATE",
            details=details,
        )


class SnapshotError(OmlStreamError):
    """Model snapshot cannot be written or read."""

    def __init__(self, message: str, details: dict[str, Any] | None = None):
        super().__init__(
            message=message,
            error_code="SNAPSHOT_ERROR",
            details=details,
        )


_EXIT_CODES = {
    "CONFIG_ERROR": 2,
    "PARSE_ERROR": 3,
    "DIMENSION_ERROR": 3,
    "SHAPE_ERROR": 3,
    "NUMERIC_ERROR": 4,
    "STATE_ERROR": 4,
    "QUERY_ERROR": 4,
    "SINGULAR_UPDATE": 4,
    "IO_ERROR": 5,
    "SNAPSHOT_ERROR": 5,
}


def exit_code_for(error: OmlStreamError) -> int:
    """Map an error code to the process exit code used by the CLI."""
    return _EXIT_CODES.get(error.error_code, 1)


def require_finite(name: str, *arrays: Any) -> None:
    """Raise NumericError when any of the arrays holds NaN or inf."""
    for array in arrays:
        if not np.all(np.isfinite(array)):
            raise NumericError(
                f"{name}: non-finite value encountered",
                details={"where": name},
            )


def handle_exception(e: Exception, context: str = "") -> NoReturn:
    """Convert foreign exceptions to the oml-stream hierarchy and raise."""

    if isinstance(e, OmlStreamError):
        raise e

    if isinstance(e, ValidationError):
        raise ConfigError(
            message=f"Invalid configuration: {e.errors()[0]['msg']}",
            details={
                "original_error": str(e),
                "context": context,
                "fields": [".".join(str(p) for p in err["loc"]) for err in e.errors()],
            },
        ) from e

    if isinstance(e, np.linalg.LinAlgError | FloatingPointError):
        raise NumericError(
            message=f"Numerical failure: {e}",
            details={"original_error": str(e), "context": context},
        ) from e

    if isinstance(e, FileNotFoundError):
        raise OmlStreamError(
            message=f"File not found: {e.filename}",
            error_code="IO_ERROR",
            details={"original_error": str(e), "context": context},
        ) from e

    if isinstance(e, OSError):
        raise OmlStreamError(
            message=f"I/O failure: {e}",
            error_code="IO_ERROR",
            details={"original_error": str(e), "context": context},
        ) from e

    raise OmlStreamError(
        message=f"Operation failed: {e}",
        error_code="OML_STREAM_OPERATION_ERROR",
        details={
            "original_error": str(e),
            "context": context,
            "type": type(e).__name__,
        },
    ) from e
