from __future__ import annotations

import numpy as np
import pytest

from actnow.core.graph_store import split_stream
from actnow.core.rss_sampler import RssConfig
from actnow.engine.online_engine import EngineConfig
from actnow.engine.online_engine import run_offline
from actnow.harness.synthetic import DriftStreamConfig
from actnow.harness.synthetic import gen_drift_stream

# 6 nodes x 300 steps, split 10:2:3 -> train [0,200), val [200,240), test [240,300)
SMALL_STREAM = DriftStreamConfig(n_nodes=6, length=300, base_period=12, drift_interval=60, seed=0)

SMALL_CLI_FLAGS = [
    "--n-nodes", "6", "--length", "300", "--base-period", "12", "--drift-interval", "60",
    "--n-part", "2", "--l-in", "12", "--l-out", "6", "--d-freq", "2",
    "--hidden", "16", "--lr", "1e-3", "--epochs", "1", "--batch-size", "16",
]


def small_engine_config(**overrides) -> EngineConfig:
    rss = overrides.pop("rss", RssConfig(N_part=2, L_in=12, L_out=6, D_freq=2))
    settings = dict(hidden=16, lr=1e-3, epochs=1, batch_size_train=16, seed=0)
    settings.update(overrides)
    return EngineConfig(rss=rss, **settings)


@pytest.fixture(scope="session")
def small_graph():
    return gen_drift_stream(SMALL_STREAM)


@pytest.fixture(scope="session")
def small_split(small_graph):
    return split_stream(small_graph, (10, 2, 3), 12, 6)


@pytest.fixture
def small_cfg():
    return small_engine_config()


@pytest.fixture(scope="session")
def pretrained(small_graph, small_split):
    return run_offline(small_graph, small_split.train, small_engine_config())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def benchmark_config(**overrides) -> EngineConfig:
    # pretraining at 1e-3, online updates at 1e-4
    settings = dict(rss=RssConfig(), hidden=64, lr=1e-3, online_lr=1e-4, epochs=3, batch_size_train=64)
    settings.update(overrides)
    return small_engine_config(**settings)
