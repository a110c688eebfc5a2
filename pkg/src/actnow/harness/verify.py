# Invariant suite: sampling unbiasedness, decomposition identity, gradients, leakage audit
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from actnow.core.graph_store import split_stream
from actnow.core.rss_sampler import RssConfig
from actnow.core.rss_sampler import aggregate_full
from actnow.core.rss_sampler import monte_carlo_aggregate
from actnow.core.rss_sampler import random_aggregation_check
from actnow.engine.online_engine import EngineConfig
from actnow.engine.online_engine import run_protocol
from actnow.enums import Arm
from actnow.harness.synthetic import DriftStreamConfig
from actnow.harness.synthetic import gen_drift_stream
from actnow.models.lade import STAT_NETS
from actnow.models.lade import LadeModel
from actnow.models.lade import ModelConfig
from actnow.models.lade import decompose
from actnow.models.lade import loss_norm
from actnow.models.lade import loss_stat

logger = logging.getLogger(__name__)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def check_unbiased_sampling(seed: int = 0, n_nodes: int = 50, draws: int = 10_000, tol: float = 0.02) -> CheckResult:
    rng = np.random.default_rng(seed)
    chk = random_aggregation_check(n_nodes, rng)
    worst = 0.0
    for v in range(n_nodes):
        if not len(chk.neighbors(v)):
            continue
        full = aggregate_full(chk, v)
        estimate = monte_carlo_aggregate(chk, v, rng, draws)
        worst = max(worst, np.linalg.norm(estimate - full) / (np.linalg.norm(full) + 1e-12))
    return CheckResult("unbiased_sampling", worst < tol, f"max relative error {worst:.4g} over {draws} draws")


def check_decompose_roundtrip(seed: int = 0, windows: int = 1000, tol: float = 1e-12) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(windows):
        length = int(rng.integers(1, 97))
        window = rng.uniform(-1e3, 1e3, size=(length, int(rng.integers(1, 9))))
        rebuilt = decompose(window).reconstruct()
        worst = max(worst, np.linalg.norm(rebuilt - window) / (np.linalg.norm(window) + 1e-300))
    constant = np.full((12, 3), 0.1)
    exact = np.array_equal(decompose(constant).reconstruct(), constant)
    passed = worst < tol and exact
    return CheckResult("decompose_roundtrip", passed, f"max relative error {worst:.3g}, constant exact={exact}")


def finite_difference_error(model: LadeModel, X: np.ndarray, Y: np.ndarray, step: float = 1e-5) -> float:
    """Worst relative gap between analytic and central-difference gradients.

    theta/phi are checked against loss_stat, psi/xi against loss_norm.
    Perturbations that flip any ReLU sit on a kink and are skipped.
    """
    out = model.forward(X)
    stats = decompose(Y, model.cfg.eps)
    analytic_stat = model.gradients(out, stats, None)
    analytic_norm = model.gradients(out, None, Y)
    base_mask = out.tape.relu_masks()
    worst = 0.0
    for name, param in model.parameters().items():
        is_stat = name.split(".")[0] in STAT_NETS
        analytic = (analytic_stat if is_stat else analytic_norm)[name]
        for idx in np.ndindex(param.shape):
            original = param[idx]
            values = []
            for delta in (step, -step):
                param[idx] = original + delta
                shifted = model.forward(X)
                if not np.array_equal(shifted.tape.relu_masks(), base_mask):
                    values = None
                    break
                values.append(loss_stat(shifted.M_hat, shifted.V_hat, stats) if is_stat
                              else loss_norm(shifted.Y_hat, Y))
            param[idx] = original
            if values is None:
                continue
            numeric = (values[0] - values[1]) / (2.0 * step)
            gap = abs(analytic[idx] - numeric) / max(abs(analytic[idx]), abs(numeric), 1e-6)
            worst = max(worst, gap)
    return worst


def toy_problem(seed: int) -> tuple[LadeModel, np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    cfg = ModelConfig(L_in=5, L_out=3, hidden=int(rng.integers(4, 17)))
    model = LadeModel.init(cfg, rng)
    # nonzero biases so the check also covers them
    for net in model.nets.values():
        net.params["b1"] += rng.normal(scale=0.1, size=net.params["b1"].shape)
        net.params["b2"] += rng.normal(scale=0.1, size=net.params["b2"].shape)
    X = rng.normal(size=(cfg.L_in, 4))
    Y = rng.normal(size=(cfg.L_out, 4))
    return model, X, Y


def check_gradients(seed: int = 0, models: int = 20, tol: float = 1e-4) -> CheckResult:
    worst = 0.0
    detached = True
    for k in range(models):
        model, X, Y = toy_problem(seed + k)
        worst = max(worst, finite_difference_error(model, X, Y))
        norm_only = model.gradients(model.forward(X), None, Y)
        detached &= all(not norm_only[name].any() for name in model.parameters(STAT_NETS))
    return CheckResult("gradients", worst < tol and detached,
                       f"max relative error {worst:.3g} over {models} models, detached={detached}")


def check_leakage_audit(seed: int = 0) -> CheckResult:
    graph = gen_drift_stream(DriftStreamConfig(n_nodes=6, length=300, base_period=12, drift_interval=60, seed=seed))
    cfg = EngineConfig(
        rss=RssConfig(N_part=2, L_in=12, L_out=6, D_freq=2),
        hidden=16,
        lr=1e-3,
        epochs=1,
        batch_size_train=16,
        seed=seed,
    )
    split = split_stream(graph, (10, 2, 3), cfg.rss.L_in, cfg.rss.L_out)
    result = run_protocol(graph, split, cfg, Arm.SSB_FSB_VAL)
    return CheckResult("leakage_audit", result.leakage_violations == 0,
                       f"{result.leakage_violations} violations over {len(result.logs)} scored forecasts")


def run_suite(seed: int = 0) -> list[CheckResult]:
    results = []
    for check in (check_unbiased_sampling, check_decompose_roundtrip, check_gradients, check_leakage_audit):
        result = check(seed=seed)
        logger.info("%s: %s (%s)", result.name, "passed" if result.passed else "FAILED", result.detail)
        results.append(result)
    return results
