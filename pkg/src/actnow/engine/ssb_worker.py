# Slow-stream updates on a model replica, adopted by the live model at sync points
from __future__ import annotations

import logging
import queue
import threading

from actnow.core.stream_buffers import SsbItem
from actnow.errors import DivergenceError
from actnow.models.lade import LadeModel
from actnow.models.lade import decompose

logger = logging.getLogger(__name__)


def ssb_update(model: LadeModel, item: SsbItem, eps: float) -> float:
    """One full-label update; returns the normalization-flow loss before the step."""
    out = model.forward(item.X)
    _, norm = model.backward_and_step(out, decompose(item.Y_full, eps), item.Y_full)
    return norm


class SsbWorker:
    """Consumes SsbItems on a replica of the live model.

    The replica is cloned from the live model when a sync window opens and is
    handed back after `sync_every` items; the live thread merges it in `poll`,
    which it calls only between its own steps. The merge adds the replica's
    change since cloning, so fast-buffer updates made on the live model in the
    meantime are kept. `sync_every=None` never syncs.
    With `serialized=True` items are processed inline on submit.
    """

    def __init__(self, live: LadeModel, sync_every: int | None, eps: float, serialized: bool = False):
        self.live = live
        self.sync_every = sync_every
        self.eps = eps
        self.serialized = serialized
        self.replica: LadeModel | None = None
        self.base: LadeModel | None = None
        self.items_done = 0
        self.syncs = 0
        self.merges = 0
        self.discards = 0
        self.last_loss: float | None = None
        self._pending: list[tuple[LadeModel, LadeModel]] = []
        self._lock = threading.Lock()
        self._queue: queue.Queue | None = None
        self._thread: threading.Thread | None = None
        if not serialized:
            self._queue = queue.Queue()
            self._thread = threading.Thread(target=self._run, name="ssb-worker", daemon=True)
            self._thread.start()

    def submit(self, item: SsbItem) -> None:
        if self.serialized:
            self._process(item)
            self.poll()
        else:
            self._queue.put(item)

    def poll(self) -> bool:
        """Merge finished replicas into the live model, oldest first."""
        with self._lock:
            pending, self._pending = self._pending, []
        if not pending:
            return False
        for replica, base in pending:
            if not self.live.merge_replica(replica, base):
                self.merges += 1
            self.syncs += 1
        logger.debug("Live model took replica after %d SSB items", self.items_done)
        return True

    def flush(self) -> None:
        if self._queue is not None:
            self._queue.join()
        self.poll()

    def close(self) -> None:
        if self._thread is not None:
            self._queue.put(None)
            self._thread.join()
            self._thread = None
        self.poll()

    def _process(self, item: SsbItem) -> None:
        if self.replica is None:
            self.base = self.live.clone_params()
            self.replica = self.base.clone_params()
        try:
            loss = ssb_update(self.replica, item, self.eps)
        except DivergenceError as error:
            self.discards += 1
            logger.warning("Replica diverged (%s); discarding it and re-cloning from the live model", error)
            self.replica = self.base = None
            return
        self.last_loss = loss
        self.items_done += 1
        if self.sync_every and self.items_done % self.sync_every == 0:
            with self._lock:
                self._pending.append((self.replica, self.base))
            self.replica = self.base = None

    def _run(self) -> None:
        while True:
            item = self._queue.get()
            try:
                if item is None:
                    return
                self._process(item)
            finally:
                self._queue.task_done()
