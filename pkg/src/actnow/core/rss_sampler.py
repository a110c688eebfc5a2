# Random Subgraph Sampling: random training batches, deterministic test partitions
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from actnow.core.graph_store import Graph
from actnow.core.graph_store import TimeRange
from actnow.enums import TailPolicy
from actnow.errors import ConfigError
from actnow.errors import SampleRangeError
from actnow.errors import ShapeMismatchError


@dataclass(frozen=True)
class RssConfig:
    N_part: int = 4
    L_in: int = 36
    L_out: int = 24
    D_freq: int = 1
    tail: TailPolicy = TailPolicy.DROP

    def __post_init__(self):
        if self.N_part < 1:
            raise ConfigError(f"N_part must be >= 1, got {self.N_part}")
        if self.L_in < 1 or self.L_out < 1:
            raise ConfigError(f"L_in and L_out must be >= 1, got {self.L_in}, {self.L_out}")
        if self.D_freq < 1:
            raise ConfigError(f"D_freq must be >= 1, got {self.D_freq}")
        if self.L_out < self.D_freq:
            raise ConfigError(f"L_out ({self.L_out}) must be >= D_freq ({self.D_freq})")

    def n_sub(self, n_node: int) -> int:
        if self.N_part > n_node:
            raise ConfigError(f"N_part ({self.N_part}) exceeds N_node ({n_node})")
        return n_node // self.N_part


@dataclass(frozen=True)
class SampleBatch:
    X: np.ndarray
    Y: np.ndarray
    node_indices: np.ndarray
    t: int
    origin: int = 0
    E_sub: np.ndarray | None = None

    @property
    def end(self) -> int:
        """Absolute exclusive end of the slice that produced X and Y."""
        return self.origin + self.t + self.X.shape[0] + self.Y.shape[0]


def n_partitions(cfg: RssConfig, n_node: int) -> int:
    n_sub = cfg.n_sub(n_node)
    if cfg.tail is TailPolicy.APPEND and n_sub * cfg.N_part < n_node:
        return cfg.N_part + 1
    return cfg.N_part


def partition_nodes(cfg: RssConfig, n_node: int, index: int) -> np.ndarray:
    n_sub = cfg.n_sub(n_node)
    if not 0 <= index < n_partitions(cfg, n_node):
        raise SampleRangeError(f"partition {index} out of range")
    begin = index * n_sub
    end = min((index + 1) * n_sub, n_node) if index < cfg.N_part else n_node
    return np.arange(begin, end)


def edge_submatrix(E: np.ndarray, idx) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= E.shape[0]):
        raise SampleRangeError(f"node index out of bounds for {E.shape[0]} nodes: {idx.tolist()}")
    return E[np.ix_(idx, idx)]


class RandomSubgraphSampler:
    """Cuts (X, Y) windows over node subsets out of one split range of a graph."""

    def __init__(self, graph: Graph, cfg: RssConfig, span: TimeRange | None = None):
        self.graph = graph
        self.cfg = cfg
        self.span = span or TimeRange(0, graph.length)
        self.n_sub = cfg.n_sub(graph.node_count)
        self.T = self.span.length - cfg.L_in - cfg.L_out

    def _require_windows(self) -> None:
        if self.T < 1:
            raise SampleRangeError(
                f"range [{self.span.start}, {self.span.stop}) admits no window (T={self.T})",
            )

    def _slice(self, t: int, nodes: np.ndarray) -> SampleBatch:
        cfg = self.cfg
        base = self.span.start + t
        X = self.graph.values[base:base + cfg.L_in, nodes]
        Y = self.graph.values[base + cfg.L_in:base + cfg.L_in + cfg.L_out, nodes]
        E_sub = None
        if self.graph.adjacency is not None:
            E_sub = edge_submatrix(self.graph.adjacency, nodes)
        return SampleBatch(X=X, Y=Y, node_indices=nodes, t=t, origin=self.span.start, E_sub=E_sub)

    @property
    def train_iterations(self) -> int:
        return self.T * self.cfg.N_part

    def sample_train(self, rng: np.random.Generator, iteration: int) -> SampleBatch:
        # Randint semantics: uniform with replacement, duplicates allowed
        self._require_windows()
        nodes = rng.integers(0, self.graph.node_count, size=self.n_sub)
        return self._slice(iteration % self.T, nodes)

    def sample_test(self, t_global: int) -> SampleBatch:
        self._require_windows()
        total = self.T * n_partitions(self.cfg, self.graph.node_count)
        if not 0 <= t_global < total:
            raise SampleRangeError(f"t_global={t_global} outside [0, {total})")
        index, t = divmod(t_global, self.T)
        return self._slice(t, partition_nodes(self.cfg, self.graph.node_count, index))

    def test_offsets(self) -> range:
        """Within-partition forecast offsets, one per stream update."""
        self._require_windows()
        steps = self.T // self.cfg.D_freq
        return range(0, steps * self.cfg.D_freq, self.cfg.D_freq)


def sample_train(g: Graph, cfg: RssConfig, rng: np.random.Generator, iteration: int,
                 span: TimeRange | None = None) -> SampleBatch:
    return RandomSubgraphSampler(g, cfg, span).sample_train(rng, iteration)


def sample_test(g: Graph, cfg: RssConfig, t_global: int, span: TimeRange | None = None) -> SampleBatch:
    return RandomSubgraphSampler(g, cfg, span).sample_test(t_global)


@dataclass
class AggregationCheck:
    """Mean-aggregation problem used to confirm subgraph sampling stays unbiased.

    W maps d_in features to d_out, h holds one feature row per node, C holds the
    per-edge normalization constants and P the per-node inclusion probability.
    """

    W: np.ndarray
    h: np.ndarray
    C: np.ndarray
    P: np.ndarray
    adjacency: np.ndarray

    def __post_init__(self):
        n = self.h.shape[0]
        if self.adjacency.shape != (n, n) or self.C.shape != (n, n) or self.P.shape != (n,):
            raise ShapeMismatchError("adjacency, C and P must match the node count of h")
        if self.W.shape[1] != self.h.shape[1]:
            raise ShapeMismatchError(f"W expects {self.W.shape[1]} features, h has {self.h.shape[1]}")
        if ((self.P <= 0) | (self.P > 1)).any():
            raise ConfigError("P(u) must lie in (0, 1]")
        if (self.C[self.adjacency != 0] <= 0).any():
            raise ConfigError("C_vu must be positive on every edge")

    def neighbors(self, v: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[v])

    def contributions(self, v: int) -> tuple[np.ndarray, np.ndarray]:
        """Neighbor ids of v and their unweighted terms (1/C_vu) W h_u."""
        nbrs = self.neighbors(v)
        terms = (self.h[nbrs] @ self.W.T) / self.C[v, nbrs][:, None]
        return nbrs, terms


def aggregate_full(chk: AggregationCheck, v: int) -> np.ndarray:
    _, terms = chk.contributions(v)
    if not len(terms):
        return np.zeros(chk.W.shape[0])
    return terms.sum(axis=0)


def aggregate_sampled(chk: AggregationCheck, v: int, rng: np.random.Generator) -> np.ndarray:
    keep = rng.random(chk.h.shape[0]) < chk.P
    nbrs, terms = chk.contributions(v)
    picked = keep[nbrs]
    if not picked.any():
        return np.zeros(chk.W.shape[0])
    return (terms[picked] / chk.P[nbrs][picked][:, None]).sum(axis=0)


def monte_carlo_aggregate(chk: AggregationCheck, v: int, rng: np.random.Generator, draws: int) -> np.ndarray:
    """Mean of `draws` independent sampled aggregations of node v."""
    nbrs, terms = chk.contributions(v)
    if not len(terms):
        return np.zeros(chk.W.shape[0])
    keep = rng.random((draws, chk.h.shape[0]))[:, nbrs] < chk.P[nbrs]
    weighted = terms / chk.P[nbrs][:, None]
    return (keep.astype(np.float64) @ weighted).mean(axis=0)


def random_aggregation_check(
    n_nodes: int,
    rng: np.random.Generator,
    density: float = 0.3,
    d_in: int = 3,
    d_out: int = 4,
    p_low: float = 0.2,
) -> AggregationCheck:
    """Random graph with a ring backbone so that no node is isolated."""
    upper = np.triu(rng.random((n_nodes, n_nodes)) < density, k=1)
    adjacency = (upper | upper.T).astype(np.float64)
    ring = np.arange(n_nodes)
    adjacency[ring, (ring + 1) % n_nodes] = 1.0
    adjacency[(ring + 1) % n_nodes, ring] = 1.0
    np.fill_diagonal(adjacency, 0.0)
    degree = adjacency.sum(axis=1)
    C = np.where(adjacency != 0, np.sqrt(np.outer(degree, degree)), 1.0)
    return AggregationCheck(
        W=rng.uniform(0.1, 1.0, size=(d_out, d_in)),
        h=rng.uniform(0.1, 1.0, size=(n_nodes, d_in)),
        C=C,
        P=rng.uniform(p_low, 1.0, size=n_nodes),
        adjacency=adjacency,
    )
