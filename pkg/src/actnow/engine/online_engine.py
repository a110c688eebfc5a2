# Offline pretraining and leakage-free online updates through fast and slow stream buffers
from __future__ import annotations

import logging
from dataclasses import dataclass
from dataclasses import field

import numpy as np

from actnow.core.graph_store import Graph
from actnow.core.graph_store import StreamSplit
from actnow.core.graph_store import TimeRange
from actnow.core.rss_sampler import RandomSubgraphSampler
from actnow.core.rss_sampler import RssConfig
from actnow.core.rss_sampler import n_partitions
from actnow.core.rss_sampler import partition_nodes
from actnow.core.stream_buffers import FsbItem
from actnow.core.stream_buffers import PredictionLedger
from actnow.core.stream_buffers import PredictionRecord
from actnow.core.stream_buffers import StreamStore
from actnow.core.stream_buffers import default_capacity
from actnow.core.stream_buffers import fsb_view
from actnow.core.stream_buffers import ssb_view
from actnow.engine.ssb_worker import SsbWorker
from actnow.engine.ssb_worker import ssb_update
from actnow.enums import Arm
from actnow.enums import Phase
from actnow.enums import SsbMode
from actnow.errors import ConfigError
from actnow.errors import DivergenceError
from actnow.errors import RangeTooShortError
from actnow.errors import ShapeMismatchError
from actnow.errors import TrainingDivergedError
from actnow.models.lade import DecompParts
from actnow.models.lade import LadeModel
from actnow.models.lade import ModelConfig
from actnow.models.lade import decompose
from actnow.utils.metrics import mae
from actnow.utils.metrics import mse

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EngineConfig:
    rss: RssConfig = field(default_factory=RssConfig)
    hidden: int = 512
    lr: float = 1e-4
    epochs: int = 10
    batch_size_train: int = 64
    eps: float = 1e-5
    ssb_mode: SsbMode = SsbMode.INTERLEAVED
    sync_every: int | None = 8
    seed: int = 0
    online_lr: float | None = None
    fsb_stat_loss: bool = True
    serialized: bool = False
    capacity: int | None = None
    snapshot_every: int = 64

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size_train < 1:
            raise ConfigError(f"batch_size_train must be >= 1, got {self.batch_size_train}")
        if self.sync_every is not None and self.sync_every < 1:
            raise ConfigError(f"sync_every must be >= 1 (or None for never), got {self.sync_every}")
        if self.online_lr is not None and self.online_lr <= 0:
            raise ConfigError(f"online_lr must be positive, got {self.online_lr}")
        if self.store_capacity < self.rss.L_in + self.rss.L_out + self.rss.D_freq:
            raise ConfigError(f"capacity {self.store_capacity} cannot hold one FSB and one SSB window")

    @property
    def model_cfg(self) -> ModelConfig:
        return ModelConfig(L_in=self.rss.L_in, L_out=self.rss.L_out, hidden=self.hidden, lr=self.lr, eps=self.eps)

    @property
    def store_capacity(self) -> int:
        if self.capacity is not None:
            return self.capacity
        return default_capacity(self.rss.L_in, self.rss.L_out)


@dataclass
class ForecastParts:
    """Predicted decomposition of one scored forecast next to that of its labels."""

    nodes: np.ndarray
    y_hat: np.ndarray
    y_true: np.ndarray
    m_hat: np.ndarray
    v_hat: np.ndarray
    n_hat: np.ndarray
    truth: DecompParts


@dataclass
class StepLog:
    t: int
    mse: float
    mae: float
    fsb_loss: float | None
    ssb_loss: float | None
    phase: Phase
    partition: int = 0
    parts: ForecastParts | None = None


class DivergenceGuard:
    """Keeps a last-good snapshot; a diverging step is retried once at half lr_norm."""

    def __init__(self, model: LadeModel):
        self.model = model
        self.snapshot = model.clone_params()

    def refresh(self) -> None:
        self.snapshot = self.model.clone_params()

    def run(self, step):
        try:
            return step()
        except DivergenceError as error:
            self.model.adopt_params(self.snapshot)
            self.model.opt_norm.lr /= 2.0
            self.snapshot.opt_norm.lr = self.model.opt_norm.lr
            logger.warning("%s; restored last good parameters, lr_norm halved to %g", error, self.model.opt_norm.lr)
            try:
                return step()
            except DivergenceError as again:
                logger.error("Training diverged twice: %s", again)
                raise TrainingDivergedError(str(again), checkpoint=self.snapshot) from again


def run_offline(graph: Graph, train: TimeRange, cfg: EngineConfig, history: list | None = None) -> LadeModel:
    """Pretrain on the train range; the last epoch's parameters are returned."""
    init_seq, sample_seq = np.random.SeedSequence(cfg.seed).spawn(2)
    model = LadeModel.init(cfg.model_cfg, np.random.default_rng(init_seq))
    if cfg.epochs == 0:
        return model
    rng = np.random.default_rng(sample_seq)
    sampler = RandomSubgraphSampler(graph, cfg.rss, train)
    total = sampler.train_iterations
    if total < 1:
        raise RangeTooShortError(f"train range [{train.start}, {train.stop}) admits no window")
    guard = DivergenceGuard(model)
    for epoch in range(cfg.epochs):
        losses = []
        for start in range(0, total, cfg.batch_size_train):
            batch = [sampler.sample_train(rng, i) for i in range(start, min(start + cfg.batch_size_train, total))]
            X = np.concatenate([b.X for b in batch], axis=1)
            Y = np.concatenate([b.Y for b in batch], axis=1)
            stats = decompose(Y, cfg.eps)

            def step():
                return model.backward_and_step(model.forward(X), stats, Y)

            _, norm = guard.run(step)
            losses.append(norm)
        guard.refresh()
        epoch_mse = float(np.mean(losses))
        if history is not None:
            history.append(epoch_mse)
        logger.info("Epoch %d/%d: train mse %.6f over %d batches", epoch + 1, cfg.epochs, epoch_mse, len(losses))
    return model


def fsb_update(model: LadeModel, item: FsbItem, y_new_overlap: np.ndarray, x_old: np.ndarray,
               eps: float, stat_loss: bool = True) -> float:
    """Consistent pseudo-label update of the forecast made D_freq steps ago.

    The target is the newly revealed labels followed by the overlapping part of
    the newest forecast, which is used as a constant. Statistics are fitted only
    to the revealed labels, and only when there are at least two of them.
    """
    target = np.concatenate([item.y_part, np.array(y_new_overlap, copy=True)], axis=0)
    if target.shape != item.y_old.y_hat.shape:
        raise ShapeMismatchError(f"FSB target {target.shape} does not match old forecast {item.y_old.y_hat.shape}")
    stat_target = decompose(item.y_part, eps) if stat_loss and item.y_part.shape[0] >= 2 else None
    out = model.forward(x_old)
    _, norm = model.backward_and_step(out, stat_target, target)
    return norm


@dataclass
class PartitionSession:
    index: int
    nodes: np.ndarray
    store: StreamStore
    ledger: PredictionLedger
    ssb_cursor: int


class OnlineEngine:
    """Replays split ranges partition by partition, forecasting once per stream update.

    Buffers live per partition and persist across `run_online` calls, so the
    test phase starts from what the validation phase left behind.
    """

    def __init__(self, graph: Graph, cfg: EngineConfig, model: LadeModel, arm: Arm = Arm.SSB_FSB_VAL):
        self.graph = graph
        self.cfg = cfg
        self.model = model
        self.arm = arm
        self.sessions: dict[int, PartitionSession] = {}
        self.carried_rows: dict[int, int] = {}
        if cfg.online_lr is not None:
            model.opt_stat.lr = cfg.online_lr
            model.opt_norm.lr = cfg.online_lr
        self.guard = DivergenceGuard(model)
        self._updates = 0
        self.worker: SsbWorker | None = None
        if arm.uses_ssb and cfg.ssb_mode is SsbMode.REPLICA:
            self.worker = SsbWorker(model, cfg.sync_every, cfg.eps, serialized=cfg.serialized)

    @property
    def leakage_violations(self) -> int:
        return sum(s.store.violations for s in self.sessions.values())

    def close(self) -> None:
        if self.worker is not None:
            self.worker.close()

    def run_online(self, span: TimeRange, phase: Phase) -> list[StepLog]:
        rss = self.cfg.rss
        offsets = RandomSubgraphSampler(self.graph, rss, span).test_offsets()
        if not offsets:
            raise RangeTooShortError(f"{phase.value} range of length {span.length} admits no D_freq={rss.D_freq} step")
        logger.info("Online %s phase over [%d, %d): %d steps per partition", phase.value, span.start, span.stop, len(offsets))
        logs: list[StepLog] = []
        for index in range(n_partitions(rss, self.graph.node_count)):
            session = self._session(index, span)
            self.carried_rows[index] = len(session.store)
            for offset in offsets:
                self._step(session, span, span.start + offset + rss.L_in - 1, phase, logs)
            # reveal the remaining labels of this range
            self._advance(session, span, span.stop - 1)
            if self.worker is not None:
                self.worker.flush()
            self._drain(session, phase, logs)
        logger.info("Online %s phase done: %d scored forecasts", phase.value, len(logs))
        return logs

    def fsb_update(self, item: FsbItem, y_new_overlap: np.ndarray, x_old: np.ndarray) -> float:
        return self._guarded(lambda: fsb_update(
            self.model, item, y_new_overlap, x_old, self.cfg.eps, stat_loss=self.cfg.fsb_stat_loss,
        ))

    # Internals

    def _guarded(self, step):
        result = self.guard.run(step)
        self._updates += 1
        if self._updates % self.cfg.snapshot_every == 0:
            self.guard.refresh()
        return result

    def _session(self, index: int, span: TimeRange) -> PartitionSession:
        if index not in self.sessions:
            rss = self.cfg.rss
            nodes = partition_nodes(rss, self.graph.node_count, index)
            self.sessions[index] = PartitionSession(
                index=index,
                nodes=nodes,
                store=StreamStore(len(nodes), self.cfg.store_capacity),
                ledger=PredictionLedger(rss.L_out, rss.D_freq),
                ssb_cursor=span.start + rss.L_in - 1,
            )
        return self.sessions[index]

    def _advance(self, session: PartitionSession, span: TimeRange, until: int) -> None:
        store = session.store
        first = span.start if store.now is None else store.now + 1
        if first <= until:
            store.extend(first, self.graph.values[first:until + 1][:, session.nodes])

    def _input_end(self, store: StreamStore) -> int:
        return store.now

    def _step(self, session: PartitionSession, span: TimeRange, now: int, phase: Phase, logs: list) -> None:
        rss = self.cfg.rss
        self._advance(session, span, now)
        if self.worker is not None:
            self.worker.poll()
        store = session.store
        out = self.model.forward(store.window(self._input_end(store), rss.L_in))
        y_new = out.Y_hat
        fsb_loss = None
        if self.arm.uses_fsb:
            item = fsb_view(store, session.ledger, rss.L_out, rss.D_freq)
            if item is not None:
                x_old = store.window(item.y_old.made_at, rss.L_in)
                fsb_loss = self.fsb_update(item, y_new[:item.overlap_len], x_old)
        ssb_loss = self._drain(session, phase, logs)
        session.ledger.append(PredictionRecord(
            made_at=now,
            y_hat=y_new,
            fsb_loss=fsb_loss,
            ssb_loss=ssb_loss,
            m_hat=out.M_hat,
            v_hat=out.V_hat,
            n_hat=out.N_hat,
        ))

    def _drain(self, session: PartitionSession, phase: Phase, logs: list) -> float | None:
        """Consume every complete SSB window, then score forecasts whose labels are all in."""
        ssb_loss = self._consume_ssb(session) if self.arm.uses_ssb else None
        store = session.store
        for record in session.ledger.pop_completed(store.now):
            labels = store.window(record.made_at + self.cfg.rss.L_out, self.cfg.rss.L_out)
            logs.append(StepLog(
                t=record.made_at,
                mse=mse(labels, record.y_hat),
                mae=mae(labels, record.y_hat),
                fsb_loss=record.fsb_loss,
                ssb_loss=record.ssb_loss,
                phase=phase,
                partition=session.index,
                parts=ForecastParts(
                    nodes=session.nodes,
                    y_hat=record.y_hat,
                    y_true=labels,
                    m_hat=record.m_hat,
                    v_hat=record.v_hat,
                    n_hat=record.n_hat,
                    truth=decompose(labels, self.cfg.eps),
                ),
            ))
        return ssb_loss

    def _consume_ssb(self, session: PartitionSession) -> float | None:
        rss = self.cfg.rss
        store = session.store
        while session.ssb_cursor - rss.L_in + 1 < store.oldest:
            logger.warning("SSB cursor %d fell behind the retained rows; skipping ahead", session.ssb_cursor)
            session.ssb_cursor += rss.D_freq
        losses = []
        while (item := ssb_view(store, rss.L_in, rss.L_out, session.ssb_cursor)) is not None:
            session.ssb_cursor += rss.D_freq
            if self.worker is not None:
                self.worker.submit(item)
                if self.worker.last_loss is not None:
                    losses.append(self.worker.last_loss)
            else:
                losses.append(self._guarded(lambda: ssb_update(self.model, item, self.cfg.eps)))
        return float(np.mean(losses)) if losses else None


@dataclass
class ProtocolResult:
    logs: list[StepLog]
    model: LadeModel
    leakage_violations: int
    carried_rows: dict[int, int]


def run_protocol(graph: Graph, split: StreamSplit, cfg: EngineConfig, arm: Arm = Arm.SSB_FSB_VAL,
                 pretrained: LadeModel | None = None) -> ProtocolResult:
    """Offline pretraining (unless a model is given), then validation and test phases for one arm."""
    model = pretrained.clone_params() if pretrained is not None else run_offline(graph, split.train, cfg)
    engine = OnlineEngine(graph, cfg, model, arm)
    logs: list[StepLog] = []
    try:
        if arm.uses_val:
            logs += engine.run_online(split.val, Phase.VAL)
        logs += engine.run_online(split.test, Phase.TEST)
    finally:
        engine.close()
    return ProtocolResult(logs, model, engine.leakage_violations, dict(engine.carried_rows))
