"""
Configuration file utilities.
"""

import os
from enum import Enum
from pathlib import Path
from typing import Any

from dotenv import dotenv_values

from oml_stream.config import OmlStreamConfig, build_config, config_keys
from oml_stream.exceptions import ConfigError

# Keys worth setting explicitly; a file without them runs on defaults
IMPORTANT_KEYS = ("k", "m", "M", "seed_fraction")


def _format_value(value: Any) -> str:
    if value is None:
        return "auto"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def render_config(config: OmlStreamConfig) -> str:
    """Render a configuration as ``key=value`` lines with descriptions."""
    lines = ["# oml-stream configuration"]
    for name, info in OmlStreamConfig.model_fields.items():
        if info.description:
            lines.append(f"# {info.description}")
        lines.append(f"{name}={_format_value(getattr(config, name))}")
    return "\n".join(lines) + "\n"


def create_default_config_file(file_path: str | Path) -> None:
    """Create a default configuration file."""
    config = OmlStreamConfig()

    # Ensure directory exists
    config_dir = os.path.dirname(file_path)
    if config_dir:
        os.makedirs(config_dir, exist_ok=True)

    Path(file_path).write_text(render_config(config), encoding="utf-8")


def validate_config_file(file_path: str | Path) -> dict[str, Any]:
    """Validate a configuration file."""
    result: dict[str, Any] = {
        "valid": False,
        "errors": [],
        "warnings": [],
        "config": None,
    }

    if not os.path.exists(file_path):
        result["errors"].append(f"Configuration file not found: {file_path}")
        return result

    try:
        config = build_config(config_file=file_path)
    except ConfigError as e:
        result["errors"].append(e.message)
        return result

    result["config"] = config.model_dump(mode="json")
    result["valid"] = True

    # Check for missing important fields
    present = _keys_in_file(file_path)
    missing_fields = [key for key in IMPORTANT_KEYS if key not in present]
    if missing_fields:
        result["warnings"].append(
            f"Missing important fields (using defaults): {missing_fields}"
        )

    return result


def _keys_in_file(file_path: str | Path) -> set[str]:
    return set(dotenv_values(file_path)) & config_keys()
