# In-memory graph-structured stream, its on-disk formats and the time split
from __future__ import annotations

import logging
import os
import struct
from dataclasses import dataclass

import numpy as np
import pandas as pd

from actnow.enums import StreamFormat
from actnow.errors import GraphFormatError
from actnow.errors import NonFiniteEntryError
from actnow.errors import RangeTooShortError
from actnow.errors import ShapeMismatchError

logger = logging.getLogger(__name__)

RAW_HEADER = struct.Struct("<QQ")


@dataclass(frozen=True)
class Graph:
    """Node signals over time (rows are time steps) plus an optional adjacency."""

    values: np.ndarray
    adjacency: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", np.array(self.values, dtype=np.float64))
        if self.adjacency is not None:
            object.__setattr__(self, "adjacency", np.array(self.adjacency, dtype=np.float64))
        if self.values.ndim != 2:
            raise ShapeMismatchError(f"values must be 2-D, got shape {self.values.shape}")
        _check_finite(self.values, "values")
        if self.adjacency is not None:
            side = self.values.shape[1]
            if self.adjacency.shape != (side, side):
                raise ShapeMismatchError(
                    f"adjacency must be {side}x{side}, got {self.adjacency.shape}",
                )
            _check_finite(self.adjacency, "adjacency")
            if (self.adjacency < 0).any():
                raise GraphFormatError("adjacency entries must be nonnegative")
        self.values.setflags(write=False)
        if self.adjacency is not None:
            self.adjacency.setflags(write=False)

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def node_count(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class TimeRange:
    start: int
    stop: int

    @property
    def length(self) -> int:
        return self.stop - self.start

    def __contains__(self, t: int) -> bool:
        return self.start <= t < self.stop


@dataclass(frozen=True)
class StreamSplit:
    train: TimeRange
    val: TimeRange
    test: TimeRange
    ratios: tuple[int, int, int]


def _check_finite(matrix: np.ndarray, source: str) -> None:
    bad = np.argwhere(~np.isfinite(matrix))
    if len(bad):
        row, col = (int(i) for i in bad[0])
        raise NonFiniteEntryError(row, col, source)


def _read_csv(path: str) -> np.ndarray:
    try:
        frame = pd.read_csv(path, header=None, sep=",", decimal=".")
    except pd.errors.ParserError as error:
        raise ShapeMismatchError(f"Ragged csv {path}: {error}") from error
    except pd.errors.EmptyDataError as error:
        raise ShapeMismatchError(f"Empty csv {path}") from error
    try:
        matrix = frame.to_numpy(dtype=np.float64)
    except ValueError as error:
        raise GraphFormatError(f"Non-numeric entry in {path}: {error}") from error
    _check_finite(matrix, path)
    return matrix


def _read_raw_f64(path: str) -> np.ndarray:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < RAW_HEADER.size:
        raise ShapeMismatchError(f"{path} is shorter than the raw_f64 header")
    rows, cols = RAW_HEADER.unpack_from(blob)
    payload = blob[RAW_HEADER.size:]
    expected = rows * cols * 8
    if len(payload) != expected:
        raise ShapeMismatchError(
            f"{path}: header declares {rows}x{cols} ({expected} bytes), payload has {len(payload)} bytes",
        )
    matrix = np.frombuffer(payload, dtype="<f8").reshape(rows, cols).astype(np.float64)
    _check_finite(matrix, path)
    return matrix


def _read_matrix(path: str, format: StreamFormat) -> np.ndarray:
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    if format is StreamFormat.CSV:
        return _read_csv(path)
    return _read_raw_f64(path)


def _write_matrix(matrix: np.ndarray, path: str, format: StreamFormat) -> None:
    if format is StreamFormat.CSV:
        pd.DataFrame(matrix).to_csv(path, header=False, index=False)
        return
    rows, cols = matrix.shape
    with open(path, "wb") as f:
        f.write(RAW_HEADER.pack(rows, cols))
        f.write(np.ascontiguousarray(matrix, dtype="<f8").tobytes())


def load_graph(
    values_path: str,
    adjacency_path: str | None = None,
    format: StreamFormat = StreamFormat.CSV,
) -> Graph:
    """Load a stream: csv rows (or raw_f64 rows) are time steps, columns are nodes."""
    values = _read_matrix(values_path, format)
    adjacency = _read_matrix(adjacency_path, format) if adjacency_path else None
    graph = Graph(values=values, adjacency=adjacency)
    logger.info(
        "Loaded graph from %s: L_data=%d, N_node=%d, adjacency=%s",
        values_path,
        graph.length,
        graph.node_count,
        adjacency is not None,
    )
    return graph


def save_graph(
    graph: Graph,
    values_path: str,
    adjacency_path: str | None = None,
    format: StreamFormat = StreamFormat.RAW_F64,
) -> None:
    _write_matrix(graph.values, values_path, format)
    if adjacency_path and graph.adjacency is not None:
        _write_matrix(graph.adjacency, adjacency_path, format)


def split_stream(g: Graph, ratios: tuple[int, int, int], L_in: int, L_out: int) -> StreamSplit:
    """Cut the stream along time; the test range absorbs the rounding remainder."""
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise RangeTooShortError(f"ratios must be three positive integers, got {ratios}")
    total = sum(ratios)
    t1 = g.length * ratios[0] // total
    t2 = g.length * (ratios[0] + ratios[1]) // total
    split = StreamSplit(
        train=TimeRange(0, t1),
        val=TimeRange(t1, t2),
        test=TimeRange(t2, g.length),
        ratios=tuple(ratios),
    )
    window = L_in + L_out
    for name in ("train", "val", "test"):
        span = getattr(split, name)
        if span.length < window:
            raise RangeTooShortError(
                f"{name} range [{span.start}, {span.stop}) has length {span.length} < L_in + L_out = {window}",
            )
    return split
