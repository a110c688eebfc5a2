from __future__ import annotations

import threading

import numpy as np
import pytest

from actnow.core.stream_buffers import PredictionLedger
from actnow.core.stream_buffers import PredictionRecord
from actnow.core.stream_buffers import StreamStore
from actnow.core.stream_buffers import default_capacity
from actnow.core.stream_buffers import fsb_view
from actnow.core.stream_buffers import ssb_view
from actnow.errors import ConfigError
from actnow.errors import DuplicatePushError
from actnow.errors import EvictedError
from actnow.errors import LeakageError
from actnow.errors import NonSequentialPushError
from actnow.errors import ShapeMismatchError


def filled_store(until: int, width: int = 2, capacity: int = 64, start: int = 0) -> StreamStore:
    store = StreamStore(width, capacity)
    for t in range(start, until + 1):
        store.push(t, np.full(width, float(t)))
    return store


def test_default_capacity():
    assert default_capacity(36, 24) == 240


def test_push_and_window():
    store = filled_store(5)
    assert store.now == 5
    assert len(store) == 6
    np.testing.assert_array_equal(store.window(4, 3)[:, 0], [2, 3, 4])


def test_window_returns_a_copy():
    store = filled_store(3)
    view = store.window(3, 2)
    view[:] = -1.0
    np.testing.assert_array_equal(store.window(3, 2)[:, 0], [2, 3])


def test_duplicate_push():
    store = filled_store(3)
    with pytest.raises(DuplicatePushError):
        store.push(3, np.zeros(2))


def test_gap_push():
    store = filled_store(3)
    with pytest.raises(NonSequentialPushError) as info:
        store.push(5, np.zeros(2))
    assert not isinstance(info.value, DuplicatePushError)


def test_push_wrong_width():
    with pytest.raises(ShapeMismatchError):
        StreamStore(2, 4).push(0, np.zeros(3))


def test_eviction():
    store = filled_store(5, capacity=3)
    assert store.oldest == 3
    np.testing.assert_array_equal(store.window(5, 3)[:, 0], [3, 4, 5])
    with pytest.raises(EvictedError):
        store.window(5, 4)


def test_store_may_start_late():
    store = filled_store(12, start=10)
    assert store.oldest == 10
    with pytest.raises(EvictedError):
        store.window(12, 4)


def test_future_read_is_refused_and_counted():
    store = filled_store(4)
    with pytest.raises(LeakageError) as info:
        store.window(5, 2)
    assert (info.value.requested, info.value.now) == (5, 4)
    assert store.violations == 1
    with pytest.raises(LeakageError):
        StreamStore(2, 4).window(0, 1)


def test_concurrent_readers_see_consistent_rows():
    store = StreamStore(1, 16)
    store.push(0, np.zeros(1))
    bad = []

    def reader():
        for _ in range(2000):
            now = store.now
            try:
                rows = store.window(now, 1)
            except EvictedError:
                continue
            if rows[0, 0] != now:
                bad.append((now, rows[0, 0]))

    thread = threading.Thread(target=reader)
    thread.start()
    for t in range(1, 2000):
        store.push(t, np.full(1, float(t)))
    thread.join()
    assert not bad


def test_ledger_completion_and_capacity():
    ledger = PredictionLedger(L_out=4, D_freq=2)
    ledger.append(PredictionRecord(made_at=5, y_hat=np.zeros((4, 1))))
    ledger.append(PredictionRecord(made_at=7, y_hat=np.zeros((4, 1))))
    with pytest.raises(ConfigError):
        ledger.append(PredictionRecord(made_at=9, y_hat=np.zeros((4, 1))))
    assert ledger.pop_completed(8) == []
    done = ledger.pop_completed(9)
    assert [r.made_at for r in done] == [5]
    assert len(ledger) == 1


def test_fsb_view():
    store = filled_store(7)
    ledger = PredictionLedger(L_out=4, D_freq=2)
    record = PredictionRecord(made_at=5, y_hat=np.ones((4, 2)))
    ledger.append(record)
    item = fsb_view(store, ledger, 4, 2)
    assert item.y_old is record
    np.testing.assert_array_equal(item.y_part[:, 0], [6, 7])
    assert item.overlap_len == 2
    assert list(item.label_slots) == [6, 7]
    assert list(item.pseudo_slots) == [8, 9]


def test_fsb_view_without_matching_forecast():
    store = filled_store(8)
    ledger = PredictionLedger(L_out=4, D_freq=2)
    ledger.append(PredictionRecord(made_at=5, y_hat=np.ones((4, 2))))
    assert fsb_view(store, ledger, 4, 2) is None
    assert fsb_view(StreamStore(2, 8), ledger, 4, 2) is None


def test_ssb_view_waits_for_every_label():
    store = filled_store(9)
    assert ssb_view(store, 3, 2, 8) is None
    store.push(10, np.full(2, 10.0))
    item = ssb_view(store, 3, 2, 8)
    np.testing.assert_array_equal(item.X[:, 0], [6, 7, 8])
    np.testing.assert_array_equal(item.Y_full[:, 0], [9, 10])
    assert item.cursor == 8


def test_ssb_view_skips_evicted_inputs():
    store = filled_store(10, capacity=4)
    assert ssb_view(store, 3, 2, 8) is None
