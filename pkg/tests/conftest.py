"""Pytest fixtures for qbc-sim tests."""

import numpy as np
import pytest

from qbc_sim.config import Settings
from qbc_sim.models import (
    AdversaryConfig,
    ChannelModel,
    SimConfig,
    SourceModel,
    Strategy,
)

# Fixed seed shared by the statistical tests.
TEST_SEED = 20240601


@pytest.fixture
def rng() -> np.random.Generator:
    """Return a deterministic random stream."""
    return np.random.default_rng(TEST_SEED)


@pytest.fixture
def settings() -> Settings:
    """Return Settings with serial execution and quiet logging."""
    return Settings(parallelism=1, log_level="WARNING")


@pytest.fixture
def ideal_channel() -> ChannelModel:
    """Return a lossless, noiseless channel with perfect detectors."""
    return ChannelModel()


@pytest.fixture
def default_source() -> SourceModel:
    """Return the default weak coherent source (mu=0.2, 2000 pulses)."""
    return SourceModel()


@pytest.fixture
def honest_config() -> SimConfig:
    """Return a small honest primary-protocol configuration.

    Returns:
        SimConfig with an ideal channel and about 2000 pulses per session.
    """
    return SimConfig(seed=TEST_SEED, trials=4)


@pytest.fixture
def breidbart_config() -> SimConfig:
    """Return a Breidbart-cheating configuration on an ideal channel."""
    return SimConfig(
        seed=TEST_SEED,
        trials=2,
        adversary=AdversaryConfig(strategy=Strategy.BREIDBART),
    )
