"""Shared fixtures: tiny models, toy corpora and synthetic client updates."""

from __future__ import annotations

import numpy as np
import pytest

from corpus.config import CorpusConfig, TriggerSpec
from federation.config import FedConfig
from federation.updates import SubmittedUpdate
from nn_core.config import ModelConfig
from nn_core.params import ParamVector


def pytest_addoption(parser):
    parser.addoption("--run-slow", action="store_true", default=False, help="run desk-scale directional reproductions")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def tiny_lstm() -> ModelConfig:
    return ModelConfig(kind="lstm", vocab_size=8, hidden_dim=4, seq_len=6, seed=3)


@pytest.fixture
def tiny_transformer() -> ModelConfig:
    return ModelConfig(kind="transformer", vocab_size=8, hidden_dim=4, num_blocks=1, seq_len=6, seed=5)


@pytest.fixture
def toy_corpus() -> CorpusConfig:
    return CorpusConfig(vocab_size=12, num_clients=6, sequences_per_client=8, seq_len=8, batch_size=4, seed=7)


@pytest.fixture
def toy_trigger() -> TriggerSpec:
    return TriggerSpec.default(12)


@pytest.fixture
def toy_fed() -> FedConfig:
    return FedConfig(total_clients=6, clients_per_round=3, total_rounds=4, local_epochs_benign=1, local_epochs_malicious=2, lr=0.5, seed=7)


def make_vector(values, layers=None) -> ParamVector:
    """Vector over layers `a` and `b` (split in half) unless `layers` is given."""

    values = np.asarray(values, dtype=np.float64)
    if layers is None:
        half = values.shape[0] // 2
        layers = {"a": half, "b": values.shape[0] - half} if half else {"a": values.shape[0]}
    segments = {}
    start = 0
    for name, length in layers.items():
        segments[name] = values[start : start + length]
        start += length
    return ParamVector.from_segments(segments)


def make_updates(rows, num_samples=None) -> list[SubmittedUpdate]:
    rows = np.asarray(rows, dtype=np.float64)
    counts = num_samples if num_samples is not None else [10] * rows.shape[0]
    return [SubmittedUpdate(client_id, make_vector(row), int(count)) for client_id, (row, count) in enumerate(zip(rows, counts))]


@pytest.fixture
def vector_factory():
    return make_vector


@pytest.fixture
def update_factory():
    return make_updates
