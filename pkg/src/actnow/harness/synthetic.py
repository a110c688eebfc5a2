# Seeded synthetic streams with regime-wise concept drift
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from actnow.core.graph_store import Graph
from actnow.enums import DriftKind
from actnow.errors import ConfigError


@dataclass(frozen=True)
class DriftStreamConfig:
    n_nodes: int = 20
    length: int = 3000
    base_period: int = 24
    drift_kind: DriftKind = DriftKind.MIXED
    drift_interval: int = 500
    noise_std: float = 0.1
    seed: int = 0
    level_shift: float = 1.0
    amplitude_step: float = 0.5
    period_step: float = 0.5
    k_neighbors: int = 4

    def __post_init__(self):
        if self.n_nodes < 1 or self.length < 1 or self.base_period < 1:
            raise ConfigError(f"n_nodes, length and base_period must be positive: {self}")
        if self.drift_interval < self.base_period:
            raise ConfigError(f"drift_interval ({self.drift_interval}) must be >= base_period ({self.base_period})")
        if self.noise_std < 0:
            raise ConfigError(f"noise_std must be >= 0, got {self.noise_std}")
        if self.k_neighbors < 0 or self.k_neighbors % 2:
            raise ConfigError(f"k_neighbors must be a nonnegative even number, got {self.k_neighbors}")


@dataclass(frozen=True)
class DriftStream:
    graph: Graph
    clean: np.ndarray
    regimes: np.ndarray


def _phase_ring(phase: np.ndarray, k: int) -> np.ndarray:
    """Connect each node to its k nearest neighbors on the ring ordered by phase."""
    n = len(phase)
    order = np.argsort(phase, kind="stable")
    adjacency = np.zeros((n, n))
    for pos, node in enumerate(order):
        for step in range(1, k // 2 + 1):
            for other in (order[(pos + step) % n], order[(pos - step) % n]):
                if other != node:
                    adjacency[node, other] = 1.0
    return adjacency


def generate_drift_stream(cfg: DriftStreamConfig) -> DriftStream:
    rng = np.random.default_rng(cfg.seed)
    phase0 = rng.uniform(0.0, 2.0 * np.pi, size=cfg.n_nodes)
    node_level = rng.uniform(-0.5, 0.5, size=cfg.n_nodes)

    regimes = np.arange(cfg.length) // cfg.drift_interval
    kind = cfg.drift_kind
    level = np.zeros(cfg.length)
    amplitude = np.ones(cfg.length)
    period = np.full(cfg.length, float(cfg.base_period))
    if kind in (DriftKind.MEAN_SHIFT, DriftKind.MIXED):
        level = cfg.level_shift * regimes
    if kind in (DriftKind.VARIANCE_SHIFT, DriftKind.MIXED):
        amplitude = 1.0 + cfg.amplitude_step * (regimes % 3)
    if kind in (DriftKind.PERIOD_SHIFT, DriftKind.MIXED):
        period = cfg.base_period * (1.0 + cfg.period_step * (regimes % 2))

    # accumulated phase keeps the sinusoid continuous across period switches
    angle = np.concatenate([[0.0], np.cumsum(2.0 * np.pi / period[:-1])])
    clean = node_level + level[:, None] + amplitude[:, None] * np.sin(angle[:, None] + phase0[None, :])
    values = clean + cfg.noise_std * rng.standard_normal(clean.shape)
    graph = Graph(values=values, adjacency=_phase_ring(phase0, cfg.k_neighbors))
    return DriftStream(graph=graph, clean=clean, regimes=regimes)


def gen_drift_stream(cfg: DriftStreamConfig) -> Graph:
    return generate_drift_stream(cfg).graph
