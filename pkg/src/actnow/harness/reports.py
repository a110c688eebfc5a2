# Run reports: cumulative error per phase, forecast components and CSV emission
from __future__ import annotations

import dataclasses
import enum
import logging
import os
from dataclasses import dataclass
from dataclasses import field

import numpy as np
import pandas as pd

from actnow.engine.online_engine import StepLog
from actnow.enums import Phase
from actnow.errors import EmptyLogsError

logger = logging.getLogger(__name__)

RUN_REPORT_COLUMNS = ["phase", "t", "mse", "mae", "fsb_loss", "ssb_loss"]
COMPONENT_COLUMNS = [
    "phase", "t", "partition", "node", "step",
    "y_true", "y_hat", "m_true", "m_hat", "v_true", "v_hat", "n_true", "n_hat",
]


@dataclass
class RunReport:
    steps: pd.DataFrame
    cumulative: dict[str, dict[str, float]]
    config: dict = field(default_factory=dict)
    wall_seconds: float = 0.0
    leakage_violations: int = 0
    logs: list[StepLog] = field(default_factory=list, repr=False)

    @property
    def cumulative_mse(self) -> float:
        return self.cumulative[Phase.TEST.value]["mse"]

    @property
    def cumulative_mae(self) -> float:
        return self.cumulative[Phase.TEST.value]["mae"]


def config_echo(cfg) -> dict:
    """Flatten a (nested) config dataclass into plain key/value pairs."""
    flat = {}
    for key, value in dataclasses.asdict(cfg).items():
        if isinstance(value, dict):
            for inner, inner_value in value.items():
                flat[f"{key}.{inner}"] = inner_value.value if isinstance(inner_value, enum.Enum) else inner_value
        else:
            flat[key] = value.value if isinstance(value, enum.Enum) else value
    return flat


def evaluate(logs: list[StepLog], config: dict | None = None, wall_seconds: float = 0.0,
             leakage_violations: int = 0) -> RunReport:
    """Cumulative error is the plain mean of the per-forecast errors of each phase."""
    if not any(log.phase is Phase.TEST for log in logs):
        raise EmptyLogsError("no test-phase step logs to evaluate")
    steps = pd.DataFrame({
        "phase": [log.phase.value for log in logs],
        "t": [log.t for log in logs],
        "mse": [log.mse for log in logs],
        "mae": [log.mae for log in logs],
        "fsb_loss": [log.fsb_loss for log in logs],
        "ssb_loss": [log.ssb_loss for log in logs],
        "partition": [log.partition for log in logs],
    })
    cumulative = {}
    for phase, rows in steps.groupby("phase", sort=False):
        cumulative[phase] = {"mse": float(rows["mse"].mean()), "mae": float(rows["mae"].mean()), "steps": len(rows)}
    return RunReport(
        steps=steps,
        cumulative=cumulative,
        config=config or {},
        wall_seconds=wall_seconds,
        leakage_violations=leakage_violations,
        logs=list(logs),
    )


def _ensure_parent(path: str) -> None:
    directory = os.path.dirname(path)
    if directory and not os.path.exists(directory):
        os.makedirs(directory)


def write_run_report(report: RunReport, path: str) -> None:
    _ensure_parent(path)
    report.steps[RUN_REPORT_COLUMNS].to_csv(path, index=False)
    logger.info("Run report with %d steps written to %s", len(report.steps), path)


def summary_row(report: RunReport, **labels) -> dict:
    row = dict(labels)
    for phase, metrics in report.cumulative.items():
        row[f"{phase}_mse"] = metrics["mse"]
        row[f"{phase}_mae"] = metrics["mae"]
        row[f"{phase}_steps"] = metrics["steps"]
    row["cumulative_mse"] = report.cumulative_mse
    row["cumulative_mae"] = report.cumulative_mae
    row["leakage_violations"] = report.leakage_violations
    row["wall_seconds"] = report.wall_seconds
    return row


def write_summary(rows: list[dict], path: str) -> pd.DataFrame:
    _ensure_parent(path)
    frame = pd.DataFrame(rows)
    frame.to_csv(path, index=False)
    logger.info("Summary with %d runs written to %s", len(frame), path)
    return frame


def components_frame(logs: list[StepLog]) -> pd.DataFrame:
    """One row per (forecast, node, horizon step) with predicted and realized mean, variance and residual."""
    columns = {name: [] for name in COMPONENT_COLUMNS}
    for log in logs:
        parts = log.parts
        if parts is None:
            continue
        L_out, n = parts.y_hat.shape
        columns["phase"].append(np.full(L_out * n, log.phase.value))
        columns["t"].append(np.full(L_out * n, log.t))
        columns["partition"].append(np.full(L_out * n, log.partition))
        columns["node"].append(np.tile(parts.nodes, L_out))
        columns["step"].append(np.repeat(np.arange(1, L_out + 1), n))
        columns["y_true"].append(parts.y_true.ravel())
        columns["y_hat"].append(parts.y_hat.ravel())
        columns["m_true"].append(np.tile(parts.truth.M, L_out))
        columns["m_hat"].append(np.tile(parts.m_hat, L_out))
        columns["v_true"].append(np.tile(parts.truth.V, L_out))
        columns["v_hat"].append(np.tile(parts.v_hat, L_out))
        columns["n_true"].append(parts.truth.N.ravel())
        columns["n_hat"].append(parts.n_hat.ravel())
    if not columns["t"]:
        raise EmptyLogsError("no step log carries forecast components")
    return pd.DataFrame({name: np.concatenate(chunks) for name, chunks in columns.items()})


def write_components_report(report: RunReport, path: str) -> pd.DataFrame:
    _ensure_parent(path)
    frame = components_frame(report.logs)
    frame.to_csv(path, index=False)
    logger.info("Forecast components (%d rows) written to %s", len(frame), path)
    return frame
