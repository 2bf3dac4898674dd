"""
oml-stream configuration management.

Values are resolved from defaults, then ``OML_STREAM_<key>`` environment
variables, then an optional ``key=value`` config file, then command-line flags.
"""

import threading
from pathlib import Path
from typing import Any

from dotenv import dotenv_values
from pydantic import Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from oml_stream.exceptions import ConfigError
from oml_stream.models.schemas import Hyperparams, TrainNNMetric, UpdateRule

ENV_PREFIX = "OML_STREAM_"


class OmlStreamConfig(BaseSettings):
    """Run configuration: hyperparameters plus run-level settings."""

    # Hyperparameters
    d: int | None = Field(default=None, description="Embedding dimension (auto if unset)")
    k: int = Field(default=10, description="Neighbors used for prediction")
    m: float = Field(default=1e-5, description="Lower clamp for the step size")
    M: float = Field(default=1e5, description="Upper clamp for the step size")
    seed_fraction: float = Field(
        default=0.2, description="Fraction of the data kept as initial memory"
    )
    ridge: float | None = Field(
        default=None, description="Ridge used to fit P (auto if unset)"
    )
    update_rule: UpdateRule = Field(
        default=UpdateRule.EXACT, description="exact or first_order V update"
    )
    train_nn_metric: TrainNNMetric = Field(
        default=TrainNNMetric.EUCLIDEAN_RAW,
        description="Training-time nearest neighbor distance",
    )
    threshold: float = Field(default=0.5, description="Label vote threshold")
    rng_seed: int = Field(default=0, description="Seed for split and V init")
    max_store_size: int | None = Field(
        default=None, description="FIFO cap on the neighbor store"
    )

    # Run settings
    checkpoint_every: int = Field(default=10, description="Rounds between curve rows")
    shuffle: bool = Field(default=True, description="Shuffle before the seed split")
    log_level: str = Field(default="info", description="Log level")

    # m and M are distinct keys, so names are matched case-sensitively
    # (OML_STREAM_k, OML_STREAM_M, ...)
    model_config = SettingsConfigDict(
        env_prefix=ENV_PREFIX, case_sensitive=True, extra="forbid"
    )

    @field_validator("update_rule", mode="before")
    @classmethod
    def validate_update_rule(cls, v: Any) -> Any:
        """Accept 'first-order' as well as 'first_order'."""
        if isinstance(v, str):
            return v.strip().lower().replace("-", "_")
        return v

    @field_validator("train_nn_metric", mode="before")
    @classmethod
    def validate_train_nn(cls, v: Any) -> Any:
        """Accept the short CLI spellings raw/learned."""
        if isinstance(v, str):
            v = v.strip().lower()
            return {"raw": "euclidean_raw"}.get(v, v)
        return v

    @field_validator("log_level", mode="before")
    @classmethod
    def validate_log_level(cls, v: Any) -> Any:
        """One of debug, info, warning, error."""
        if isinstance(v, str):
            v = v.strip().lower()
            if v not in ("debug", "info", "warning", "error"):
                raise ValueError(f"unknown log level {v!r}")
        return v

    @field_validator("ridge", "d", "max_store_size", mode="before")
    @classmethod
    def validate_auto(cls, v: Any) -> Any:
        """'auto' and empty strings mean unset."""
        if isinstance(v, str) and v.strip().lower() in ("", "auto", "none"):
            return None
        return v

    def to_hyperparams(self) -> Hyperparams:
        """Extract the hyperparameter block, validating it."""
        return Hyperparams(
            d=self.d,
            k=self.k,
            m=self.m,
            M=self.M,
            seed_fraction=self.seed_fraction,
            ridge=self.ridge,
            update_rule=self.update_rule,
            train_nn_metric=self.train_nn_metric,
            threshold=self.threshold,
            rng_seed=self.rng_seed,
            max_store_size=self.max_store_size,
        )


def config_keys() -> set[str]:
    """Keys accepted in a config file."""
    return set(OmlStreamConfig.model_fields.keys())


def read_config_file(file_path: str | Path) -> dict[str, Any]:
    """Read ``key=value`` lines; unknown keys are a ConfigError."""
    path = Path(file_path)
    if not path.is_file():
        raise ConfigError(
            f"Configuration file not found: {path}", details={"path": str(path)}
        )

    raw = dotenv_values(path)
    values: dict[str, Any] = {}
    valid = config_keys()
    for key, value in raw.items():
        if key not in valid:
            raise ConfigError(
                f"Unknown configuration key '{key}' in {path}",
                details={"path": str(path), "key": key},
            )
        if value is not None:
            values[key] = value
    return values


def build_config(
    config_file: str | Path | None = None, **overrides: Any
) -> OmlStreamConfig:
    """Resolve a configuration; ``None`` overrides are ignored."""
    values: dict[str, Any] = {}
    if config_file:
        values.update(read_config_file(config_file))
    values.update({k: v for k, v in overrides.items() if v is not None})

    try:
        config = OmlStreamConfig(**values)
        config.to_hyperparams()
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(p) for p in first["loc"]) or "config"
        raise ConfigError(
            f"Invalid configuration for '{field}': {first['msg']}",
            details={"errors": [err["msg"] for err in e.errors()]},
        ) from e
    if config.checkpoint_every < 1:
        raise ConfigError("checkpoint_every must be >= 1")
    return config


class ConfigManager:
    """Holds the process-wide configuration with thread safety."""

    def __init__(self) -> None:
        self._config: OmlStreamConfig | None = None
        self._lock = threading.RLock()

    def get_config(self) -> OmlStreamConfig:
        """Get configuration instance, building it from the environment once."""
        with self._lock:
            if self._config is None:
                self._config = build_config()
            return self._config

    def set_config(self, config: OmlStreamConfig) -> None:
        """Install an already resolved configuration."""
        with self._lock:
            self._config = config

    def reload_config(self) -> OmlStreamConfig:
        """Drop the cached configuration and resolve it again."""
        with self._lock:
            self._config = None
            return self.get_config()


# Global configuration manager instance
_config_manager = ConfigManager()


def get_config() -> OmlStreamConfig:
    """Get configuration instance using the global config manager."""
    return _config_manager.get_config()


def get_config_manager() -> ConfigManager:
    """Get the global configuration manager instance."""
    return _config_manager


def reload_config() -> OmlStreamConfig:
    """Reload configuration using the config manager."""
    return _config_manager.reload_config()
