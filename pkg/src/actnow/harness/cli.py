# Command-line entry point: pretrain, online, ablate, freqsweep, partsweep, gen, verify
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

from actnow.core.graph_store import Graph
from actnow.core.graph_store import load_graph
from actnow.core.graph_store import save_graph
from actnow.core.graph_store import split_stream
from actnow.core.rss_sampler import RssConfig
from actnow.engine.online_engine import EngineConfig
from actnow.engine.online_engine import run_offline
from actnow.enums import Arm
from actnow.enums import DriftKind
from actnow.enums import SsbMode
from actnow.enums import StreamFormat
from actnow.enums import TailPolicy
from actnow.errors import CheckpointError
from actnow.errors import ConfigError
from actnow.errors import GraphFormatError
from actnow.errors import LeakageError
from actnow.errors import RangeTooShortError
from actnow.errors import TrainingDivergedError
from actnow.harness.experiments import ALL_ARMS
from actnow.harness.experiments import DEFAULT_D_FREQS
from actnow.harness.experiments import DEFAULT_N_PARTS
from actnow.harness.experiments import ablate
from actnow.harness.experiments import freqsweep
from actnow.harness.experiments import partsweep
from actnow.harness.experiments import run_arm
from actnow.harness.experiments import seeds_from
from actnow.harness.reports import summary_row
from actnow.harness.reports import write_components_report
from actnow.harness.reports import write_run_report
from actnow.harness.reports import write_summary
from actnow.harness.synthetic import DriftStreamConfig
from actnow.harness.synthetic import gen_drift_stream
from actnow.harness.verify import run_suite
from actnow.models.lade import LadeModel
from actnow.utils.log import configure_logging

logger = logging.getLogger(__name__)

SEED_ENV = "ACTNOW_SEED"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VERIFY = 2
EXIT_LEAKAGE = 3


class ActNowArgumentParser(argparse.ArgumentParser):
    """Argument errors surface as ConfigError instead of exiting the process."""

    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _sync_every(value: str) -> int | None:
    if value.lower() in ("inf", "never", "none"):
        return None
    return int(value)


def _csv_list(kind):
    def parse(value: str) -> list:
        return [kind(item.strip()) for item in value.split(",") if item.strip()]
    return parse


def _add_drift_args(parser: argparse.ArgumentParser, *seed_flags: str) -> None:
    group = parser.add_argument_group("synthetic stream (used when --values is not given)")
    defaults = DriftStreamConfig()
    group.add_argument("--n-nodes", type=int, default=defaults.n_nodes)
    group.add_argument("--length", type=int, default=defaults.length)
    group.add_argument("--base-period", type=int, default=defaults.base_period)
    group.add_argument("--drift-kind", choices=[k.value for k in DriftKind], default=defaults.drift_kind.value)
    group.add_argument("--drift-interval", type=int, default=defaults.drift_interval)
    group.add_argument("--noise-std", type=float, default=defaults.noise_std)
    group.add_argument(*seed_flags, dest="stream_seed", type=int, default=defaults.seed)
    group.add_argument("--level-shift", type=float, default=defaults.level_shift)
    group.add_argument("--amplitude-step", type=float, default=defaults.amplitude_step)
    group.add_argument("--period-step", type=float, default=defaults.period_step)
    group.add_argument("--k-neighbors", type=int, default=defaults.k_neighbors)


def _add_engine_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("engine")
    defaults = EngineConfig()
    rss = defaults.rss
    group.add_argument("--n-part", type=int, default=rss.N_part)
    group.add_argument("--l-in", type=int, default=rss.L_in)
    group.add_argument("--l-out", type=int, default=rss.L_out)
    group.add_argument("--d-freq", type=int, default=rss.D_freq)
    group.add_argument("--tail", choices=[p.value for p in TailPolicy], default=rss.tail.value)
    group.add_argument("--hidden", type=int, default=defaults.hidden)
    group.add_argument("--lr", type=float, default=defaults.lr)
    group.add_argument("--epochs", type=int, default=defaults.epochs)
    group.add_argument("--batch-size", type=int, default=defaults.batch_size_train)
    group.add_argument("--eps", type=float, default=defaults.eps)
    group.add_argument("--ssb-mode", choices=[m.value for m in SsbMode], default=defaults.ssb_mode.value)
    group.add_argument("--sync-every", type=_sync_every, default=defaults.sync_every, help="integer or 'inf'")
    group.add_argument("--online-lr", type=float, default=None)
    group.add_argument("--no-fsb-stat-loss", action="store_true")
    group.add_argument("--serialized", action="store_true")
    group.add_argument("--capacity", type=int, default=None)
    group.add_argument("--snapshot-every", type=int, default=defaults.snapshot_every)
    group.add_argument("--seed", type=int, default=defaults.seed, help=f"overridden by ${SEED_ENV}")


def _add_stream_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--values", help="stream values file; a synthetic stream is generated when omitted")
    parser.add_argument("--adjacency")
    parser.add_argument("--format", choices=[f.value for f in StreamFormat], default=StreamFormat.CSV.value)
    parser.add_argument("--ratios", type=_csv_list(int), default=[10, 2, 3])
    _add_drift_args(parser, "--stream-seed")
    _add_engine_args(parser)


def build_parser() -> ActNowArgumentParser:
    parser = ActNowArgumentParser(prog="actnow", description="Leakage-free online forecasting on graph streams")
    parser.add_argument("--log-level", type=str.upper, choices=["DEBUG", "INFO", "WARNING", "ERROR"], default="INFO")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=ActNowArgumentParser)

    pretrain = commands.add_parser("pretrain", help="offline training, writes model.ckpt")
    _add_stream_args(pretrain)
    pretrain.add_argument("--out", default="runs")

    online = commands.add_parser("online", help="validation and test replay for one arm")
    _add_stream_args(online)
    online.add_argument("--arm", choices=[a.value for a in Arm], default=Arm.SSB_FSB_VAL.value)
    online.add_argument("--checkpoint", help="resume from a pretrained model.ckpt instead of training")
    online.add_argument("--out", default="runs")

    ablation = commands.add_parser("ablate", help="every arm over several seeds")
    _add_stream_args(ablation)
    ablation.add_argument("--arms", type=_csv_list(str), default=[a.value for a in ALL_ARMS])
    ablation.add_argument("--seeds", type=int, default=3, help="number of seeds starting at --seed")
    ablation.add_argument("--out", default="runs/ablate")

    sweep = commands.add_parser("freqsweep", help="full protocol over several D_freq values")
    _add_stream_args(sweep)
    sweep.add_argument("--d-freqs", type=_csv_list(int), default=list(DEFAULT_D_FREQS))
    sweep.add_argument("--arm", choices=[a.value for a in Arm], default=Arm.SSB_FSB_VAL.value)
    sweep.add_argument("--seeds", type=int, default=3)
    sweep.add_argument("--out", default="runs/freqsweep")

    parts = commands.add_parser("partsweep", help="full protocol over several N_part values")
    _add_stream_args(parts)
    parts.add_argument("--n-parts", type=_csv_list(int), default=list(DEFAULT_N_PARTS))
    parts.add_argument("--arm", choices=[a.value for a in Arm], default=Arm.SSB_FSB_VAL.value)
    parts.add_argument("--seeds", type=int, default=3)
    parts.add_argument("--out", default="runs/partsweep")

    gen = commands.add_parser("gen", help="write a synthetic drifting stream")
    _add_drift_args(gen, "--seed", "--stream-seed")
    gen.add_argument("--format", choices=[f.value for f in StreamFormat], default=StreamFormat.RAW_F64.value)
    gen.add_argument("--out", default="data")

    verify = commands.add_parser("verify", help="run the invariant suite")
    verify.add_argument("--seed", type=int, default=0)
    return parser


def resolve_seed(seed: int) -> int:
    """`$ACTNOW_SEED`, when set, replaces the value given to --seed."""
    env = os.environ.get(SEED_ENV)
    if env is None:
        return seed
    try:
        return int(env)
    except ValueError as error:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from error


def drift_config(args: argparse.Namespace) -> DriftStreamConfig:
    return DriftStreamConfig(
        n_nodes=args.n_nodes,
        length=args.length,
        base_period=args.base_period,
        drift_kind=DriftKind(args.drift_kind),
        drift_interval=args.drift_interval,
        noise_std=args.noise_std,
        seed=args.stream_seed,
        level_shift=args.level_shift,
        amplitude_step=args.amplitude_step,
        period_step=args.period_step,
        k_neighbors=args.k_neighbors,
    )


def engine_config(args: argparse.Namespace) -> EngineConfig:
    return EngineConfig(
        rss=RssConfig(
            N_part=args.n_part,
            L_in=args.l_in,
            L_out=args.l_out,
            D_freq=args.d_freq,
            tail=TailPolicy(args.tail),
        ),
        hidden=args.hidden,
        lr=args.lr,
        epochs=args.epochs,
        batch_size_train=args.batch_size,
        eps=args.eps,
        ssb_mode=SsbMode(args.ssb_mode),
        sync_every=args.sync_every,
        seed=resolve_seed(args.seed),
        online_lr=args.online_lr,
        fsb_stat_loss=not args.no_fsb_stat_loss,
        serialized=args.serialized,
        capacity=args.capacity,
        snapshot_every=args.snapshot_every,
    )


def load_stream(args: argparse.Namespace) -> Graph:
    if args.values:
        return load_graph(args.values, args.adjacency, StreamFormat(args.format))
    return gen_drift_stream(drift_config(args))


def _prepare(args: argparse.Namespace):
    cfg = engine_config(args)
    graph = load_stream(args)
    split = split_stream(graph, tuple(args.ratios), cfg.rss.L_in, cfg.rss.L_out)
    return graph, split, cfg


def cmd_pretrain(args: argparse.Namespace) -> int:
    graph, split, cfg = _prepare(args)
    model = run_offline(graph, split.train, cfg)
    path = os.path.join(args.out, "model.ckpt")
    model.save_checkpoint(path)
    print(f"✅ Pretrained model written to {path}")
    return EXIT_OK


def cmd_online(args: argparse.Namespace) -> int:
    graph, split, cfg = _prepare(args)
    pretrained = None
    if args.checkpoint:
        pretrained = LadeModel.load_checkpoint(args.checkpoint)
        if (pretrained.cfg.L_in, pretrained.cfg.L_out) != (cfg.rss.L_in, cfg.rss.L_out):
            raise ConfigError(
                f"checkpoint was trained for L_in={pretrained.cfg.L_in}, L_out={pretrained.cfg.L_out}",
            )
    arm = Arm(args.arm)
    report = run_arm(graph, split, cfg, arm, pretrained)
    write_run_report(report, os.path.join(args.out, "run_report.csv"))
    write_components_report(report, os.path.join(args.out, "components.csv"))
    write_summary([summary_row(report, arm=arm.value, seed=cfg.seed, d_freq=cfg.rss.D_freq)],
                  os.path.join(args.out, "summary.csv"))
    if report.leakage_violations:
        print(f"❌ Leakage audit recorded {report.leakage_violations} violations")
        return EXIT_LEAKAGE
    print(f"✅ {arm.value}: cumulative test mse {report.cumulative_mse:.6f}, mae {report.cumulative_mae:.6f}")
    return EXIT_OK


def _exit_for(frame) -> int:
    if frame["leakage_violations"].sum():
        print(f"❌ Leakage audit recorded {int(frame['leakage_violations'].sum())} violations")
        return EXIT_LEAKAGE
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    graph, split, cfg = _prepare(args)
    try:
        arms = [Arm(name) for name in args.arms]
    except ValueError as error:
        raise ConfigError(f"unknown arm in {args.arms}") from error
    frame = ablate(graph, split, cfg, seeds_from(cfg.seed, args.seeds), arms, args.out)
    print(f"✅ Ablation finished: {len(frame)} runs summarized in {os.path.join(args.out, 'summary.csv')}")
    return _exit_for(frame)


def cmd_freqsweep(args: argparse.Namespace) -> int:
    graph, split, cfg = _prepare(args)
    frame = freqsweep(graph, split, cfg, seeds_from(cfg.seed, args.seeds), args.d_freqs, Arm(args.arm), args.out)
    print(f"✅ Frequency sweep finished: {len(frame)} runs summarized in {os.path.join(args.out, 'summary.csv')}")
    return _exit_for(frame)


def cmd_partsweep(args: argparse.Namespace) -> int:
    graph, split, cfg = _prepare(args)
    frame = partsweep(graph, split, cfg, seeds_from(cfg.seed, args.seeds), args.n_parts, Arm(args.arm), args.out)
    print(f"✅ Partition sweep finished: {len(frame)} runs summarized in {os.path.join(args.out, 'summary.csv')}")
    return _exit_for(frame)


def cmd_gen(args: argparse.Namespace) -> int:
    # --seed is the stream seed here
    graph = gen_drift_stream(dataclasses.replace(drift_config(args), seed=resolve_seed(args.stream_seed)))
    fmt = StreamFormat(args.format)
    suffix = "csv" if fmt is StreamFormat.CSV else "raw_f64"
    os.makedirs(args.out, exist_ok=True)
    values_path = os.path.join(args.out, f"values.{suffix}")
    save_graph(graph, values_path, os.path.join(args.out, f"adjacency.{suffix}"), fmt)
    print(f"✅ Stream of {graph.length} steps over {graph.node_count} nodes written to {values_path}")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    results = run_suite(seed=resolve_seed(args.seed))
    for result in results:
        print(f"{'✅' if result.passed else '❌'} {result.name}: {result.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


COMMANDS = {
    "pretrain": cmd_pretrain,
    "online": cmd_online,
    "ablate": cmd_ablate,
    "freqsweep": cmd_freqsweep,
    "partsweep": cmd_partsweep,
    "gen": cmd_gen,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        configure_logging(args.log_level)
        return COMMANDS[args.command](args)
    except LeakageError as error:
        logger.error("Leakage audit tripped: %s", error)
        print(f"❌ Leakage audit tripped: {error}")
        return EXIT_LEAKAGE
    except (ConfigError, GraphFormatError, RangeTooShortError, CheckpointError, FileNotFoundError) as error:
        print(f"❌ {error}")
        return EXIT_CONFIG
    except TrainingDivergedError as error:
        print(f"❌ Training diverged: {error}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
