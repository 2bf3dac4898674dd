"""
Per-round cost as a function of memory size n.

Training rounds should grow linearly in n (nearest-neighbor scan over D
plus O(dpq) projection work); a least-squares line is fit to the medians.
"""

import logging
import time
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from oml_stream.core.data_io import generate_synthetic
from oml_stream.core.knn_predictor import predict
from oml_stream.core.metric_learner import init_state, online_round
from oml_stream.exceptions import ConfigError
from oml_stream.models.schemas import Hyperparams, SynthConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScalingPoint:
    n: int
    train_seconds: float
    test_seconds: float


@dataclass(frozen=True)
class ScalingResult:
    points: list[ScalingPoint]
    slope: float
    intercept: float
    r_squared: float


def linear_fit(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float, float]:
    """Slope, intercept and R^2 of the least-squares line."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sum((y - (slope * x + intercept)) ** 2))
    total = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 if total == 0.0 else 1.0 - residual / total
    return float(slope), float(intercept), r_squared


def scaling_benchmark(
    ns: Sequence[int] = (1000, 2000, 4000, 8000),
    p: int = 20,
    q: int = 8,
    d: int = 4,
    rounds: int = 200,
    rng_seed: int = 0,
) -> ScalingResult:
    """Median training-round and test-query time for stores of each size n."""
    if len(ns) < 2:
        raise ConfigError("need at least two store sizes to fit a trend")
    hp = Hyperparams(d=d, rng_seed=rng_seed)
    points: list[ScalingPoint] = []
    for n in ns:
        cfg = SynthConfig(n=n + rounds, p=p, q=q, latent_dim=min(4, p, q), rng_seed=rng_seed)
        ds = generate_synthetic(cfg)
        seed = ds.subset(np.arange(n))
        state = init_state(seed, hp)
        train_times: list[float] = []
        test_times: list[float] = []
        for x, y in zip(ds.features[n:], ds.labels[n:], strict=True):
            start = time.perf_counter()
            predict(state.store, state.V, x, hp.k, hp.threshold)
            test_times.append(time.perf_counter() - start)
            start = time.perf_counter()
            online_round(state, x, y, hp)
            train_times.append(time.perf_counter() - start)
        point = ScalingPoint(n, float(np.median(train_times)), float(np.median(test_times)))
        logger.info(
            "n=%d: train %.1f us, test %.1f us",
            n,
            point.train_seconds * 1e6,
            point.test_seconds * 1e6,
        )
        points.append(point)

    slope, intercept, r_squared = linear_fit(
        [pt.n for pt in points], [pt.train_seconds for pt in points]
    )
    return ScalingResult(points, slope, intercept, r_squared)
