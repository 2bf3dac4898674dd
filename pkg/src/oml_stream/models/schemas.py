"""
Pydantic schemas for configuration, presets and run results.
"""

from enum import Enum
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, model_validator


class UpdateRule(str, Enum):
    """How V is moved on a loss-positive round."""

    EXACT = "exact"
    FIRST_ORDER = "first_order"


class TrainNNMetric(str, Enum):
    """Distance used to pick the training-time nearest neighbor."""

    EUCLIDEAN_RAW = "euclidean_raw"
    LEARNED = "learned"


class Method(str, Enum):
    """Prediction method evaluated by a prequential run."""

    OML = "oml"
    KNN_EUCLIDEAN = "knn_euclidean"


class SynthConfig(BaseModel):
    """Synthetic label-correlated stream parameters."""

    model_config = ConfigDict(frozen=True)

    n: int = Field(default=2000, ge=10, description="Number of examples")
    p: int = Field(default=20, ge=1, description="Feature count")
    q: int = Field(default=8, ge=2, description="Label count")
    latent_dim: int = Field(default=4, ge=1, description="Latent dimension")
    noise_std: float = Field(default=0.1, ge=0.0, description="Feature noise std")
    label_threshold: float = Field(
        default=0.5, description="Latent score above which a label is on"
    )
    rng_seed: int = Field(default=0, description="Generator seed")

    @model_validator(mode="after")
    def check_latent_dim(self) -> "SynthConfig":
        if self.latent_dim > min(self.p, self.q):
            raise ValueError(
                f"latent_dim={self.latent_dim} must be <= min(p, q)={min(self.p, self.q)}"
            )
        return self


# Shapes follow the public benchmark statistics; the streams themselves are synthetic.
# unit-variance noise on every feature
SYNTH_PRESETS: dict[str, dict[str, Any]] = {
    "desk": {"n": 2000, "p": 20, "q": 8, "latent_dim": 4, "noise_std": 1.0},
    "emotions": {"n": 593, "p": 72, "q": 6, "latent_dim": 4, "noise_std": 1.0},
    "scene": {"n": 2407, "p": 294, "q": 6, "latent_dim": 4, "noise_std": 1.0},
    "image": {"n": 2000, "p": 103, "q": 14, "latent_dim": 6, "noise_std": 1.0},
}


def synth_preset(name: str, **overrides: Any) -> SynthConfig:
    """Build a SynthConfig from a named preset plus overrides."""
    if name not in SYNTH_PRESETS:
        raise KeyError(name)
    values = {**SYNTH_PRESETS[name], **{k: v for k, v in overrides.items() if v is not None}}
    return SynthConfig(**values)


class Hyperparams(BaseModel):
    """Online metric learning hyperparameters."""

    model_config = ConfigDict(frozen=True)

    d: int | None = Field(default=None, ge=1, description="Embedding dim (None = auto)")
    k: int = Field(default=10, ge=1, description="Neighbors used for prediction")
    m: float = Field(default=1e-5, gt=0.0, description="Lower clamp for lambda")
    M: float = Field(default=1e5, gt=0.0, description="Upper clamp for lambda")
    seed_fraction: float = Field(
        default=0.2, gt=0.0, lt=1.0, description="Fraction kept as initial memory"
    )
    ridge: float | None = Field(
        default=None, ge=0.0, description="Ridge for P (None = auto)"
    )
    update_rule: UpdateRule = Field(default=UpdateRule.EXACT)
    train_nn_metric: TrainNNMetric = Field(default=TrainNNMetric.EUCLIDEAN_RAW)
    threshold: float = Field(
        default=0.5, ge=0.0, le=1.0, description="Vote fraction to predict a label"
    )
    rng_seed: int = Field(default=0, description="Seed for split and V init")
    max_store_size: int | None = Field(
        default=None, ge=1, description="FIFO cap on the neighbor store"
    )

    @model_validator(mode="after")
    def check_clamps(self) -> "Hyperparams":
        if not self.m < self.M:
            raise ValueError(f"m={self.m} must be smaller than M={self.M}")
        return self


class DatasetStats(BaseModel):
    """Shape and label statistics of a dataset."""

    name: str
    n: int
    p: int
    q: int
    cardinality: float = Field(..., description="Mean positive labels per example")
    density: float = Field(..., description="Cardinality divided by q")
    distinct_labelsets: int


class FinalMetrics(BaseModel):
    """The four stream metrics at the end of a run."""

    macro_f1: float
    micro_f1: float
    example_f1: float
    hamming_loss: float


class RunSummary(BaseModel):
    """Summary written next to each curve file."""

    dataset: str
    method: Method
    n_seed: int
    n_stream: int
    p: int
    q: int
    d: int | None
    hyperparams: Hyperparams
    checkpoint_every: int
    metrics: FinalMetrics
    cumulative_loss: float
    loss_positive_rounds: int
    singular_fallbacks: int
    r_hat: float = Field(..., description="Running max of squared feature norm")
    bound_factor: float | None = Field(
        None, description="||P||_F^2 * r_hat + q, None for the baseline"
    )
    elapsed_seconds: float
