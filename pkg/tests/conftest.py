"""
Pytest configuration and fixtures.
"""

import numpy as np
import pytest

from oml_stream.core.data_io import StreamDataset, generate_synthetic
from oml_stream.core.metric_learner import init_state
from oml_stream.models.schemas import Hyperparams, SynthConfig

SPARSE_SAMPLE = """#dims 4 3
0,2 1:1.0 3:0.5
1 2:2.0
 4:-1.5
0,1,2 1:0.25 2:0.75 3:1.0 4:1.0
"""


@pytest.fixture
def rng():
    """Seeded generator for randomized checks."""
    return np.random.default_rng(12345)


@pytest.fixture
def sparse_text():
    """Small sparse multi-label file with a header and an empty label set."""
    return SPARSE_SAMPLE


@pytest.fixture
def small_synth_config():
    """Tiny label-correlated stream."""
    return SynthConfig(n=120, p=6, q=4, latent_dim=2, rng_seed=7)


@pytest.fixture
def small_dataset(small_synth_config):
    """120 x 6 features, 4 labels."""
    return generate_synthetic(small_synth_config, name="small")


@pytest.fixture
def hyperparams():
    """Defaults with a small k and fixed seed."""
    return Hyperparams(k=5, rng_seed=3)


@pytest.fixture
def model_state(small_dataset, hyperparams):
    """State initialized on the first 30 examples."""
    seed = small_dataset.subset(np.arange(30), name="seed")
    return init_state(seed, hyperparams)


@pytest.fixture
def tiny_dataset():
    """Hand-written 6-example dataset for exact checks."""
    features = np.array(
        [
            [0.0, 0.0],
            [1.0, 0.0],
            [0.0, 1.0],
            [1.0, 1.0],
            [2.0, 0.5],
            [0.5, 2.0],
        ]
    )
    labels = np.array(
        [
            [1, 0, 0],
            [0, 1, 0],
            [0, 0, 1],
            [1, 1, 0],
            [0, 1, 1],
            [1, 0, 1],
        ]
    )
    return StreamDataset(features=features, labels=labels, name="tiny")
