from __future__ import annotations

import struct

import numpy as np
import pytest

from actnow.core.graph_store import Graph
from actnow.core.graph_store import TimeRange
from actnow.core.graph_store import load_graph
from actnow.core.graph_store import save_graph
from actnow.core.graph_store import split_stream
from actnow.enums import StreamFormat
from actnow.errors import GraphFormatError
from actnow.errors import NonFiniteEntryError
from actnow.errors import RangeTooShortError
from actnow.errors import ShapeMismatchError


def test_load_csv(tmp_path):
    path = tmp_path / "values.csv"
    path.write_text("1,2\n3,4\n5,6\n")
    graph = load_graph(str(path))
    assert graph.length == 3
    assert graph.node_count == 2
    np.testing.assert_array_equal(graph.values, [[1, 2], [3, 4], [5, 6]])
    assert graph.adjacency is None


def test_load_csv_with_adjacency(tmp_path):
    values = tmp_path / "values.csv"
    adjacency = tmp_path / "adjacency.csv"
    values.write_text("1,2\n3,4\n")
    adjacency.write_text("0,1\n1,0\n")
    graph = load_graph(str(values), str(adjacency))
    np.testing.assert_array_equal(graph.adjacency, [[0, 1], [1, 0]])


def test_ragged_csv_is_rejected(tmp_path):
    path = tmp_path / "values.csv"
    path.write_text("1,2\n3,4,5\n")
    with pytest.raises(ShapeMismatchError):
        load_graph(str(path))


def test_nan_entry_reports_position(tmp_path):
    path = tmp_path / "values.csv"
    path.write_text("1,2\n3,nan\n")
    with pytest.raises(NonFiniteEntryError) as info:
        load_graph(str(path))
    assert (info.value.row, info.value.col) == (1, 1)


def test_non_square_adjacency_is_rejected():
    with pytest.raises(ShapeMismatchError):
        Graph(values=np.zeros((4, 3)), adjacency=np.zeros((3, 2)))


def test_negative_adjacency_is_rejected():
    with pytest.raises(GraphFormatError):
        Graph(values=np.zeros((4, 2)), adjacency=-np.eye(2))


def test_graph_is_read_only():
    graph = Graph(values=np.zeros((3, 2)))
    with pytest.raises(ValueError):
        graph.values[0, 0] = 1.0


def test_raw_f64_save_and_load(tmp_path):
    values = np.arange(12, dtype=np.float64).reshape(4, 3) / 7.0
    graph = Graph(values=values, adjacency=np.ones((3, 3)))
    save_graph(graph, str(tmp_path / "v.raw"), str(tmp_path / "a.raw"))
    blob = (tmp_path / "v.raw").read_bytes()
    assert struct.unpack_from("<QQ", blob) == (4, 3)
    assert len(blob) == 16 + 4 * 3 * 8
    loaded = load_graph(str(tmp_path / "v.raw"), str(tmp_path / "a.raw"), StreamFormat.RAW_F64)
    np.testing.assert_array_equal(loaded.values, values)
    np.testing.assert_array_equal(loaded.adjacency, np.ones((3, 3)))


def test_raw_f64_size_mismatch(tmp_path):
    path = tmp_path / "v.raw"
    path.write_bytes(struct.pack("<QQ", 3, 2) + np.zeros(5).astype("<f8").tobytes())
    with pytest.raises(ShapeMismatchError):
        load_graph(str(path), format=StreamFormat.RAW_F64)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_graph(str(tmp_path / "absent.csv"))


def test_split_floor_boundaries():
    split = split_stream(Graph(values=np.zeros((1498, 1))), (10, 2, 3), 12, 12)
    assert split.train == TimeRange(0, 998)
    assert split.val == TimeRange(998, 1198)
    assert split.test == TimeRange(1198, 1498)


def test_split_exact_division():
    split = split_stream(Graph(values=np.zeros((15, 1))), (10, 2, 3), 1, 1)
    assert (split.train, split.val, split.test) == (TimeRange(0, 10), TimeRange(10, 12), TimeRange(12, 15))


def test_split_rejects_a_range_shorter_than_one_window():
    # val [10, 12) cannot hold L_in + L_out = 3 steps
    with pytest.raises(RangeTooShortError, match="val range"):
        split_stream(Graph(values=np.zeros((15, 1))), (10, 2, 3), 2, 1)


def test_split_too_short():
    with pytest.raises(RangeTooShortError):
        split_stream(Graph(values=np.zeros((10, 1))), (10, 2, 3), 4, 4)


def test_split_rejects_nonpositive_ratios():
    with pytest.raises(RangeTooShortError):
        split_stream(Graph(values=np.zeros((100, 1))), (10, 0, 3), 1, 1)


def test_split_ranges_partition_the_stream(rng):
    for _ in range(200):
        length = int(rng.integers(30, 5000))
        ratios = tuple(int(r) for r in rng.integers(1, 20, size=3))
        try:
            split = split_stream(Graph(values=np.zeros((length, 1))), ratios, 1, 1)
        except RangeTooShortError:
            continue
        assert split.train.start == 0
        assert split.train.stop == split.val.start
        assert split.val.stop == split.test.start
        assert split.test.stop == length


def test_graph_copies_caller_arrays():
    values = np.zeros((4, 2))
    adjacency = np.ones((2, 2))
    graph = Graph(values=values, adjacency=adjacency)
    values[0, 0] = 1.0
    adjacency[0, 0] = 2.0
    assert values.flags.writeable
    assert graph.values[0, 0] == 0.0
    assert graph.adjacency[0, 0] == 1.0
    assert not graph.values.flags.writeable
