# Incremental stream storage with fast/slow buffer views and a leakage audit
from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass
from dataclasses import field

import numpy as np

from actnow.errors import ConfigError
from actnow.errors import DuplicatePushError
from actnow.errors import EvictedError
from actnow.errors import LeakageError
from actnow.errors import NonSequentialPushError
from actnow.errors import ShapeMismatchError


def default_capacity(L_in: int, L_out: int) -> int:
    return 4 * (L_in + L_out)


class StreamStore:
    """Ring of per-time-step rows, each time index stored exactly once.

    One writer pushes rows in strictly increasing time order; any number of
    readers may call `window`. Reads past `now` are refused and counted.
    """

    def __init__(self, width: int, capacity: int):
        if capacity < 1 or width < 1:
            raise ConfigError(f"capacity and width must be positive, got {capacity}, {width}")
        self.width = width
        self.capacity = capacity
        self._ring = np.zeros((capacity, width))
        self._lock = threading.Lock()
        self._now: int | None = None
        self._first: int | None = None
        self._violations = 0

    @property
    def now(self) -> int | None:
        return self._now

    @property
    def oldest(self) -> int | None:
        if self._now is None:
            return None
        return max(self._first, self._now - self.capacity + 1)

    @property
    def violations(self) -> int:
        with self._lock:
            return self._violations

    def __len__(self) -> int:
        if self._now is None:
            return 0
        return self._now - self.oldest + 1

    def push(self, t: int, values: np.ndarray) -> None:
        row = np.asarray(values, dtype=np.float64)
        if row.shape != (self.width,):
            raise ShapeMismatchError(f"expected a row of {self.width} values, got shape {row.shape}")
        with self._lock:
            if self._now is not None:
                if t <= self._now:
                    raise DuplicatePushError(f"t={t} already stored (now={self._now})")
                if t != self._now + 1:
                    raise NonSequentialPushError(f"t={t} does not follow now={self._now}")
            else:
                self._first = t
            self._ring[t % self.capacity] = row
            self._now = t

    def extend(self, t_start: int, rows: np.ndarray) -> None:
        for offset, row in enumerate(rows):
            self.push(t_start + offset, row)

    def window(self, end_t: int, length: int) -> np.ndarray:
        """Rows (end_t - length, end_t] in time order."""
        with self._lock:
            if self._now is None or end_t > self._now:
                self._violations += 1
                raise LeakageError(end_t, -1 if self._now is None else self._now)
            start = end_t - length + 1
            oldest = max(self._first, self._now - self.capacity + 1)
            if start < oldest:
                raise EvictedError(f"rows from t={start} are not retained (oldest={oldest})")
            return self._ring[np.arange(start, end_t + 1) % self.capacity].copy()


@dataclass
class PredictionRecord:
    made_at: int
    y_hat: np.ndarray
    fsb_loss: float | None = None
    ssb_loss: float | None = None
    # predicted mean, variance and residual behind y_hat
    m_hat: np.ndarray | None = None
    v_hat: np.ndarray | None = None
    n_hat: np.ndarray | None = None

    @property
    def horizon(self) -> range:
        return range(self.made_at + 1, self.made_at + self.y_hat.shape[0] + 1)


@dataclass
class FsbItem:
    y_old: PredictionRecord
    y_part: np.ndarray
    overlap_len: int

    @property
    def label_slots(self) -> range:
        return range(self.y_old.made_at + 1, self.y_old.made_at + self.y_part.shape[0] + 1)

    @property
    def pseudo_slots(self) -> range:
        stop = self.y_old.horizon.stop
        return range(stop - self.overlap_len, stop)


@dataclass
class SsbItem:
    X: np.ndarray
    Y_full: np.ndarray
    cursor: int


@dataclass
class PredictionLedger:
    """Recent forecasts whose horizons have not fully elapsed yet."""

    L_out: int
    D_freq: int
    records: deque = field(init=False)

    def __post_init__(self):
        self.records = deque(maxlen=-(-self.L_out // self.D_freq))

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def append(self, record: PredictionRecord) -> None:
        if len(self.records) == self.records.maxlen:
            # a forecast would leave without its labels being scored
            raise ConfigError(f"ledger full: {len(self.records)} forecasts still pending labels")
        self.records.append(record)

    def pop_completed(self, now: int) -> list[PredictionRecord]:
        done = []
        while self.records and self.records[0].made_at + self.L_out <= now:
            done.append(self.records.popleft())
        return done


def fsb_view(store: StreamStore, ledger, L_out: int, D_freq: int) -> FsbItem | None:
    if store.now is None:
        return None
    made_at = store.now - D_freq
    record = next((r for r in ledger if r.made_at == made_at), None)
    if record is None:
        return None
    y_part = store.window(made_at + D_freq, D_freq)
    return FsbItem(y_old=record, y_part=y_part, overlap_len=L_out - D_freq)


def ssb_view(store: StreamStore, L_in: int, L_out: int, cursor: int) -> SsbItem | None:
    """Full-label window ending at `cursor`; None until all L_out labels have arrived."""
    if store.now is None or cursor + L_out > store.now:
        return None
    if cursor - L_in + 1 < store.oldest:
        return None
    return SsbItem(
        X=store.window(cursor, L_in),
        Y_full=store.window(cursor + L_out, L_out),
        cursor=cursor,
    )
