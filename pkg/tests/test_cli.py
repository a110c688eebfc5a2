from __future__ import annotations

import pandas as pd
import pytest

from actnow.engine.online_engine import OnlineEngine
from actnow.harness.cli import build_parser
from actnow.harness.cli import engine_config
from actnow.harness.cli import main
from tests.conftest import SMALL_CLI_FLAGS


def test_gen_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert main(["gen", "--seed", "7", "--n-nodes", "4", "--length", "600", "--out", str(tmp_path / name)]) == 0
    for filename in ("values.raw_f64", "adjacency.raw_f64"):
        assert (tmp_path / "a" / filename).read_bytes() == (tmp_path / "b" / filename).read_bytes()


def test_gen_csv(tmp_path):
    assert main(["gen", "--format", "csv", "--n-nodes", "3", "--length", "48", "--base-period", "12",
                 "--drift-interval", "24", "--out", str(tmp_path)]) == 0
    assert pd.read_csv(tmp_path / "values.csv", header=None).shape == (48, 3)


def test_online_writes_reports(tmp_path):
    assert main(["online", *SMALL_CLI_FLAGS, "--out", str(tmp_path)]) == 0
    steps = pd.read_csv(tmp_path / "run_report.csv")
    assert list(steps.columns) == ["phase", "t", "mse", "mae", "fsb_loss", "ssb_loss"]
    assert len(steps) == 22 + 42
    components = pd.read_csv(tmp_path / "components.csv")
    # 3 nodes per partition, 6 horizon steps per forecast
    assert len(components) == (22 + 42) * 3 * 6
    assert set(components["node"]) == set(range(6))
    summary = pd.read_csv(tmp_path / "summary.csv")
    assert len(summary) == 1
    assert summary["cumulative_mse"].item() == pytest.approx(steps[steps["phase"] == "test"]["mse"].mean())


def test_online_from_checkpoint(tmp_path):
    assert main(["pretrain", *SMALL_CLI_FLAGS, "--out", str(tmp_path)]) == 0
    checkpoint = tmp_path / "model.ckpt"
    assert checkpoint.exists()
    args = ["online", *SMALL_CLI_FLAGS, "--arm", "frozen", "--checkpoint", str(checkpoint), "--out"]
    assert main([*args, str(tmp_path / "resumed")]) == 0
    assert main([*args, str(tmp_path / "again")]) == 0
    first = pd.read_csv(tmp_path / "resumed" / "run_report.csv")
    second = pd.read_csv(tmp_path / "again" / "run_report.csv")
    pd.testing.assert_frame_equal(first, second)


def test_checkpoint_with_other_window_is_rejected(tmp_path):
    assert main(["pretrain", *SMALL_CLI_FLAGS, "--out", str(tmp_path)]) == 0
    flags = SMALL_CLI_FLAGS + ["--l-in", "10"]
    assert main(["online", *flags, "--checkpoint", str(tmp_path / "model.ckpt"), "--out", str(tmp_path)]) == 1


def test_ablate_summary_rows(tmp_path):
    assert main(["ablate", *SMALL_CLI_FLAGS, "--arms", "frozen,ssb", "--seeds", "2", "--out", str(tmp_path)]) == 0
    summary = pd.read_csv(tmp_path / "summary.csv")
    assert len(summary) == 4
    assert sorted(summary["seed"].unique()) == [0, 1]


def test_injected_future_read_exits_with_leakage_code(tmp_path, monkeypatch):
    monkeypatch.setattr(OnlineEngine, "_input_end", lambda self, store: store.now + 1)
    assert main(["online", *SMALL_CLI_FLAGS, "--out", str(tmp_path)]) == 3


def test_config_errors_exit_with_one(tmp_path):
    assert main(["online", *SMALL_CLI_FLAGS, "--d-freq", "7", "--out", str(tmp_path)]) == 1
    assert main(["online", "--no-such-flag"]) == 1
    assert main(["online", "--values", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == 1
    assert main(["ablate", *SMALL_CLI_FLAGS, "--arms", "bogus", "--out", str(tmp_path)]) == 1


def test_too_short_stream_exits_with_one(tmp_path):
    assert main(["online", *SMALL_CLI_FLAGS, "--length", "60", "--drift-interval", "12", "--out", str(tmp_path)]) == 1


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv("ACTNOW_SEED", "42")
    args = build_parser().parse_args(["online", "--seed", "3"])
    assert engine_config(args).seed == 42


def test_sync_every_accepts_inf():
    args = build_parser().parse_args(["online", "--sync-every", "inf"])
    assert engine_config(args).sync_every is None
    args = build_parser().parse_args(["online", "--sync-every", "5"])
    assert engine_config(args).sync_every == 5


def test_verify_passes():
    assert main(["verify"]) == 0


def test_gen_seed_from_environment(tmp_path, monkeypatch):
    flags = ["--n-nodes", "4", "--length", "600"]
    assert main(["gen", "--seed", "5", *flags, "--out", str(tmp_path / "flag")]) == 0
    monkeypatch.setenv("ACTNOW_SEED", "5")
    assert main(["gen", "--seed", "7", *flags, "--out", str(tmp_path / "env")]) == 0
    assert (tmp_path / "flag" / "values.raw_f64").read_bytes() == (tmp_path / "env" / "values.raw_f64").read_bytes()


def test_verify_seed_from_environment(monkeypatch):
    seen = []
    monkeypatch.setattr("actnow.harness.cli.run_suite", lambda seed: seen.append(seed) or [])
    monkeypatch.setenv("ACTNOW_SEED", "9")
    assert main(["verify", "--seed", "1"]) == 0
    assert seen == [9]
