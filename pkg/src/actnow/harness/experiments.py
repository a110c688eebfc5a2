# Experiment presets: single runs, component ablation, update-frequency and partition sweeps
from __future__ import annotations

import dataclasses
import logging
import os
import time

import pandas as pd

from actnow.core.graph_store import Graph
from actnow.core.graph_store import StreamSplit
from actnow.engine.online_engine import EngineConfig
from actnow.engine.online_engine import run_offline
from actnow.engine.online_engine import run_protocol
from actnow.enums import Arm
from actnow.harness.reports import RunReport
from actnow.harness.reports import config_echo
from actnow.harness.reports import evaluate
from actnow.harness.reports import summary_row
from actnow.harness.reports import write_run_report
from actnow.harness.reports import write_summary
from actnow.models.lade import LadeModel

logger = logging.getLogger(__name__)

ALL_ARMS = (Arm.FROZEN, Arm.SSB, Arm.SSB_FSB, Arm.SSB_FSB_VAL)
DEFAULT_D_FREQS = (1, 2, 4, 8)
DEFAULT_N_PARTS = (5, 10, 20)


def run_arm(graph: Graph, split: StreamSplit, cfg: EngineConfig, arm: Arm,
            pretrained: LadeModel | None = None) -> RunReport:
    started = time.perf_counter()
    result = run_protocol(graph, split, cfg, arm, pretrained)
    return evaluate(
        result.logs,
        config={"arm": arm.value, **config_echo(cfg)},
        wall_seconds=time.perf_counter() - started,
        leakage_violations=result.leakage_violations,
    )


def seeds_from(seed: int, count: int) -> list[int]:
    return [seed + k for k in range(count)]


def ablate(graph: Graph, split: StreamSplit, cfg: EngineConfig, seeds: list[int],
           arms=ALL_ARMS, out_dir: str | None = None) -> pd.DataFrame:
    """Every arm for every seed; arms of one seed share a single pretrained model."""
    rows = []
    for seed in seeds:
        seeded = dataclasses.replace(cfg, seed=seed)
        pretrained = run_offline(graph, split.train, seeded)
        for arm in arms:
            report = run_arm(graph, split, seeded, arm, pretrained)
            logger.info("Arm %s seed %d: cumulative test mse %.6f", arm.value, seed, report.cumulative_mse)
            if out_dir:
                write_run_report(report, os.path.join(out_dir, f"{arm.value}_seed{seed}", "run_report.csv"))
            rows.append(summary_row(report, arm=arm.value, seed=seed, d_freq=cfg.rss.D_freq))
    frame = pd.DataFrame(rows)
    if out_dir:
        write_summary(rows, os.path.join(out_dir, "summary.csv"))
    return frame


def freqsweep(graph: Graph, split: StreamSplit, cfg: EngineConfig, seeds: list[int],
              d_freqs=DEFAULT_D_FREQS, arm: Arm = Arm.SSB_FSB_VAL, out_dir: str | None = None) -> pd.DataFrame:
    """Full protocol at several update frequencies; pretraining does not depend on D_freq."""
    rows = []
    for seed in seeds:
        seeded = dataclasses.replace(cfg, seed=seed)
        pretrained = run_offline(graph, split.train, seeded)
        for d_freq in d_freqs:
            swept = dataclasses.replace(seeded, rss=dataclasses.replace(seeded.rss, D_freq=d_freq))
            report = run_arm(graph, split, swept, arm, pretrained)
            logger.info("D_freq %d seed %d: cumulative test mse %.6f", d_freq, seed, report.cumulative_mse)
            if out_dir:
                write_run_report(report, os.path.join(out_dir, f"dfreq{d_freq}_seed{seed}", "run_report.csv"))
            rows.append(summary_row(report, arm=arm.value, seed=seed, d_freq=d_freq))
    frame = pd.DataFrame(rows)
    if out_dir:
        write_summary(rows, os.path.join(out_dir, "summary.csv"))
    return frame


def partsweep(graph: Graph, split: StreamSplit, cfg: EngineConfig, seeds: list[int],
              n_parts=DEFAULT_N_PARTS, arm: Arm = Arm.SSB_FSB_VAL, out_dir: str | None = None) -> pd.DataFrame:
    """Full protocol at several partition counts; each count is pretrained on its own subgraphs."""
    rows = []
    for seed in seeds:
        for n_part in n_parts:
            swept = dataclasses.replace(cfg, seed=seed, rss=dataclasses.replace(cfg.rss, N_part=n_part))
            report = run_arm(graph, split, swept, arm)
            logger.info("N_part %d seed %d: cumulative test mse %.6f", n_part, seed, report.cumulative_mse)
            if out_dir:
                write_run_report(report, os.path.join(out_dir, f"npart{n_part}_seed{seed}", "run_report.csv"))
            rows.append(summary_row(report, arm=arm.value, seed=seed, d_freq=cfg.rss.D_freq, n_part=n_part))
    frame = pd.DataFrame(rows)
    if out_dir:
        write_summary(rows, os.path.join(out_dir, "summary.csv"))
    return frame


def median_by(frame: pd.DataFrame, key: str, column: str = "cumulative_mse") -> dict:
    return frame.groupby(key)[column].median().to_dict()
