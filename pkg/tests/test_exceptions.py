"""
Test exception handling and custom exceptions.
"""

import numpy as np
import pytest

from oml_stream.exceptions import (
    ConfigError,
    DataParseError,
    DimensionError,
    NumericError,
    OmlStreamError,
    QueryError,
    ShapeError,
    SingularUpdateError,
    SnapshotError,
    StoreStateError,
    exit_code_for,
    handle_exception,
    require_finite,
)
from oml_stream.models.schemas import Hyperparams


class TestOmlStreamError:
    """Test the base OmlStreamError class."""

    def test_init_basic(self):
        """Test basic initialization."""
        error = OmlStreamError("Test message")
        assert error.message == "Test message"
        assert error.error_code == "OML_STREAM_ERROR"
        assert error.details == {}
        assert str(error) == "Test message"

    def test_init_with_all_params(self):
        """Test initialization with all parameters."""
        details = {"key": "value", "number": 42}
        error = OmlStreamError(message="Custom message", error_code="CUSTOM_ERROR", details=details)
        assert error.error_code == "CUSTOM_ERROR"
        assert error.details == details


class TestSpecificErrors:
    """Test the error subclasses."""

    def test_parse_error_line(self):
        error = DataParseError("bad token", line=4)
        assert error.message == "line 4: bad token"
        assert error.details == {"line": 4}
        assert error.error_code == "PARSE_ERROR"

    def test_dimension_error_line(self):
        error = DimensionError("label 9 >= q", line=2, details={"q": 3})
        assert error.details == {"q": 3, "line": 2}

    def test_shape_error(self):
        error = ShapeError("mismatch", expected=3, actual=2)
        assert error.details == {"expected": 3, "actual": 2}

    def test_singular_update(self):
        error = SingularUpdateError("singular", step=0.5)
        assert error.details["lambda"] == 0.5
        assert error.error_code == "SINGULAR_UPDATE"

    def test_all_are_oml_stream_errors(self):
        for cls in (ConfigError, NumericError, StoreStateError, QueryError, SnapshotError):
            assert isinstance(cls("x"), OmlStreamError)


class TestExitCodeFor:
    """Test the CLI exit code mapping."""

    @pytest.mark.parametrize(
        ("error", "code"),
        [
            (ConfigError("x"), 2),
            (DataParseError("x"), 3),
            (DimensionError("x"), 3),
            (ShapeError("x"), 3),
            (NumericError("x"), 4),
            (StoreStateError("x"), 4),
            (QueryError("x"), 4),
            (SingularUpdateError("x"), 4),
            (SnapshotError("x"), 5),
            (OmlStreamError("x", error_code="IO_ERROR"), 5),
            (OmlStreamError("x"), 1),
        ],
    )
    def test_codes(self, error, code):
        assert exit_code_for(error) == code


class TestRequireFinite:
    """Test the non-finite guard."""

    def test_finite(self):
        require_finite("x", np.ones(3), 2.0)

    @pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
    def test_non_finite(self, bad):
        with pytest.raises(NumericError) as exc_info:
            require_finite("lambda", np.array([1.0, bad]))
        assert exc_info.value.details["where"] == "lambda"


class TestHandleException:
    """Test conversion of foreign exceptions."""

    def test_passthrough(self):
        error = QueryError("k too large")
        with pytest.raises(QueryError) as exc_info:
            handle_exception(error)
        assert exc_info.value is error

    def test_validation_error(self):
        try:
            Hyperparams(k=0)
        except Exception as e:
            with pytest.raises(ConfigError) as exc_info:
                handle_exception(e, "hyperparams")
        assert exc_info.value.details["fields"] == ["k"]
        assert exc_info.value.details["context"] == "hyperparams"

    def test_linalg_error(self):
        with pytest.raises(NumericError):
            handle_exception(np.linalg.LinAlgError("Singular matrix"))

    def test_file_not_found(self):
        error = FileNotFoundError(2, "No such file", "data.txt")
        with pytest.raises(OmlStreamError) as exc_info:
            handle_exception(error)
        assert exc_info.value.error_code == "IO_ERROR"
        assert "data.txt" in exc_info.value.message

    def test_os_error(self):
        with pytest.raises(OmlStreamError) as exc_info:
            handle_exception(PermissionError("denied"))
        assert exc_info.value.error_code == "IO_ERROR"

    def test_generic(self):
        with pytest.raises(OmlStreamError) as exc_info:
            handle_exception(RuntimeError("boom"), "run")
        assert exc_info.value.error_code == "OML_STREAM_OPERATION_ERROR"
        assert exc_info.value.details["type"] == "RuntimeError"
        assert isinstance(exc_info.value.__cause__, RuntimeError)
