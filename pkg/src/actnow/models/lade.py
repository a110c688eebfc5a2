# Label-decomposition forecaster: statistical flow (mean, variance) and normalization flow
from __future__ import annotations

import threading
from dataclasses import asdict
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from actnow.core.forecaster import StreamForecaster
from actnow.errors import CheckpointError
from actnow.errors import ConfigError
from actnow.errors import DivergenceError
from actnow.errors import ShapeMismatchError
from actnow.models.adam import AdamState
from actnow.models.mlp import MlpCache
from actnow.models.mlp import Mlp2

STAT_NETS = ("mean", "var")
NORM_NETS = ("norm", "comb")


@dataclass(frozen=True)
class ModelConfig:
    L_in: int = 36
    L_out: int = 24
    hidden: int = 512
    lr: float = 1e-4
    eps: float = 1e-5

    def __post_init__(self):
        if min(self.L_in, self.L_out, self.hidden) < 1:
            raise ConfigError(f"L_in, L_out and hidden must be positive: {self}")
        if self.lr <= 0 or self.eps <= 0:
            raise ConfigError(f"lr and eps must be positive: {self}")


@dataclass
class DecompParts:
    M: np.ndarray
    V: np.ndarray
    N: np.ndarray
    eps: float

    def reconstruct(self) -> np.ndarray:
        return (self.V + self.eps) * self.N + self.M


def decompose(window: np.ndarray, eps: float = 1e-5) -> DecompParts:
    """Per-series temporal mean, population variance and residual scaled by (V + eps)."""
    if window.ndim != 2 or window.shape[0] < 1:
        raise ShapeMismatchError(f"window must be [len x N] with len >= 1, got {window.shape}")
    constant = window.max(axis=0) == window.min(axis=0)
    # constant series keep their exact value so reconstruction is exact
    M = np.where(constant, window[0], window.mean(axis=0))
    centered = window - M
    V = np.mean(centered * centered, axis=0)
    return DecompParts(M=M, V=V, N=centered / (V + eps), eps=eps)


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def loss_stat(M_hat: np.ndarray, V_hat: np.ndarray, parts: DecompParts) -> float:
    return float(np.mean((M_hat - parts.M) ** 2) + np.mean((V_hat - parts.V) ** 2))


def loss_norm(Y_hat: np.ndarray, target: np.ndarray) -> float:
    return float(np.mean((Y_hat - target) ** 2))


@dataclass
class LadeTape:
    inputs: DecompParts
    mean: MlpCache
    var: MlpCache
    var_pre: np.ndarray
    norm: MlpCache
    comb: MlpCache

    def relu_masks(self) -> np.ndarray:
        return np.concatenate([(c.z1 > 0).ravel() for c in (self.mean, self.var, self.norm, self.comb)])


@dataclass
class LadeOutput:
    M_hat: np.ndarray
    V_hat: np.ndarray
    N_hat: np.ndarray
    Y_hat: np.ndarray
    tape: LadeTape


class LadeModel(StreamForecaster):
    """Mean and variance predictors (theta, phi), residual predictor (psi) and combiner (xi).

    Series are columns: every network is shared across series, the statistics
    networks map one scalar to one scalar and the residual/combiner networks act
    along the time axis. `opt_stat` owns theta and phi, `opt_norm` owns psi and xi.
    """

    def __init__(self, cfg: ModelConfig, nets: dict[str, Mlp2], opt_stat: AdamState | None = None,
                 opt_norm: AdamState | None = None):
        self.cfg = cfg
        self.nets = nets
        self.opt_stat = opt_stat or AdamState.for_params(self.parameters(STAT_NETS), lr=cfg.lr)
        self.opt_norm = opt_norm or AdamState.for_params(self.parameters(NORM_NETS), lr=cfg.lr)
        # bumped whenever parameters change; replicas compare it at sync time
        self.version = 0
        self._lock = threading.RLock()

    @classmethod
    def init(cls, cfg: ModelConfig, rng: np.random.Generator) -> LadeModel:
        return cls(cfg, {
            "mean": Mlp2.init(1, cfg.hidden, 1, rng),
            "var": Mlp2.init(1, cfg.hidden, 1, rng),
            "norm": Mlp2.init(cfg.L_in, cfg.hidden, cfg.L_out, rng),
            "comb": Mlp2.init(cfg.L_out, cfg.hidden, cfg.L_out, rng),
        })

    def parameters(self, nets=STAT_NETS + NORM_NETS) -> dict[str, np.ndarray]:
        return {f"{net}.{name}": p for net in nets for name, p in self.nets[net].params.items()}

    # Forward

    def forward(self, X: np.ndarray) -> LadeOutput:
        if X.ndim != 2 or X.shape[0] != self.cfg.L_in:
            raise ShapeMismatchError(f"expected [{self.cfg.L_in} x N] input, got {X.shape}")
        parts = decompose(X, self.cfg.eps)
        m_out, mean_cache = self.nets["mean"].forward(parts.M[:, None])
        var_pre, var_cache = self.nets["var"].forward(parts.V[:, None])
        M_hat = m_out[:, 0]
        V_hat = softplus(var_pre[:, 0])
        n_rows, norm_cache = self.nets["norm"].forward(parts.N.T)
        # V_hat and M_hat enter the combiner as constants
        y_rows, comb_cache = self.nets["comb"].forward(n_rows * V_hat[:, None])
        Y_hat = (y_rows + M_hat[:, None]).T
        if not (np.isfinite(Y_hat).all() and np.isfinite(V_hat).all()):
            raise DivergenceError("non-finite activation in forward pass")
        tape = LadeTape(parts, mean_cache, var_cache, var_pre[:, 0], norm_cache, comb_cache)
        return LadeOutput(M_hat=M_hat, V_hat=V_hat, N_hat=n_rows.T, Y_hat=Y_hat, tape=tape)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.forward(X).Y_hat

    def relu_masks(self, X: np.ndarray) -> np.ndarray:
        return self.forward(X).tape.relu_masks()

    # Backward

    def gradients(self, out: LadeOutput, stat_target: DecompParts | None,
                  y_target: np.ndarray | None) -> dict[str, np.ndarray]:
        """Gradients of loss_stat (to theta, phi) and loss_norm (to psi, xi) for one tape."""
        grads = {name: np.zeros_like(p) for name, p in self.parameters().items()}
        tape = out.tape
        if stat_target is not None:
            n = out.M_hat.size
            g_mean = 2.0 * (out.M_hat - stat_target.M) / n
            g_var = 2.0 * (out.V_hat - stat_target.V) / n * expit(tape.var_pre)
            for net, cache, g in (("mean", tape.mean, g_mean), ("var", tape.var, g_var)):
                net_grads, _ = self.nets[net].backward(cache, g[:, None])
                for name, grad in net_grads.items():
                    grads[f"{net}.{name}"] = grad
        if y_target is not None:
            if y_target.shape != out.Y_hat.shape:
                raise ShapeMismatchError(f"target {y_target.shape} does not match forecast {out.Y_hat.shape}")
            g_y = 2.0 * (out.Y_hat - y_target) / y_target.size
            comb_grads, g_comb_in = self.nets["comb"].backward(tape.comb, g_y.T)
            norm_grads, _ = self.nets["norm"].backward(tape.norm, g_comb_in * out.V_hat[:, None])
            for net, net_grads in (("comb", comb_grads), ("norm", norm_grads)):
                for name, grad in net_grads.items():
                    grads[f"{net}.{name}"] = grad
        return grads

    def backward_and_step(self, out: LadeOutput, stat_target: DecompParts | None,
                          y_target: np.ndarray | None) -> tuple[float | None, float | None]:
        """Step opt_stat on loss_stat and opt_norm on loss_norm; a None target skips that flow."""
        grads = self.gradients(out, stat_target, y_target)
        for name, grad in grads.items():
            if not np.isfinite(grad).all():
                raise DivergenceError(f"non-finite gradient for {name}")
        stat = norm = None
        with self._lock:
            if stat_target is not None:
                stat = loss_stat(out.M_hat, out.V_hat, stat_target)
                self.opt_stat.step(self.parameters(STAT_NETS), grads)
            if y_target is not None:
                norm = loss_norm(out.Y_hat, y_target)
                self.opt_norm.step(self.parameters(NORM_NETS), grads)
            self.version += 1
        return stat, norm

    # Replicas

    def clone_params(self) -> LadeModel:
        with self._lock:
            clone = LadeModel(
                self.cfg,
                {name: net.copy() for name, net in self.nets.items()},
                self.opt_stat.copy(),
                self.opt_norm.copy(),
            )
            clone.version = self.version
            return clone

    def adopt_params(self, other: LadeModel) -> None:
        mine = self.parameters()
        theirs = other.parameters()
        for name, p in mine.items():
            if theirs[name].shape != p.shape:
                raise ShapeMismatchError(f"{name}: {theirs[name].shape} cannot replace {p.shape}")
        snapshot = other.clone_params()
        fresh = snapshot.parameters()
        with self._lock:
            for name, p in mine.items():
                np.copyto(p, fresh[name])
            self.opt_stat = snapshot.opt_stat
            self.opt_norm = snapshot.opt_norm
            self.version += 1

    def merge_replica(self, replica: LadeModel, base: LadeModel) -> bool:
        """Fold a replica's progress since `base` into the live parameters.

        When the live model has not moved since `base` was cloned the replica is
        adopted whole, optimizer states included. Otherwise only the replica's
        parameter change is added, so live updates made in between survive.
        Returns True for a whole adoption.
        """
        with self._lock:
            if self.version == base.version:
                self.adopt_params(replica)
                return True
            theirs = replica.parameters()
            origin = base.parameters()
            for name, p in self.parameters().items():
                p += theirs[name] - origin[name]
            self.version += 1
            return False

    # Checkpoints

    def state_arrays(self) -> dict[str, np.ndarray]:
        arrays = dict(self.parameters())
        for label, opt in (("opt_stat", self.opt_stat), ("opt_norm", self.opt_norm)):
            for name in sorted(opt.m):
                arrays[f"{label}.m.{name}"] = opt.m[name]
                arrays[f"{label}.v.{name}"] = opt.v[name]
        return arrays

    def checkpoint_meta(self) -> dict:
        return {
            "config": asdict(self.cfg),
            "opt_stat": self.opt_stat.hyperparameters(),
            "opt_norm": self.opt_norm.hyperparameters(),
        }

    @classmethod
    def from_checkpoint(cls, meta: dict, arrays: dict[str, np.ndarray]) -> LadeModel:
        cfg = ModelConfig(**meta["config"])
        template = cls.init(cfg, np.random.default_rng(0))
        nets = {}
        for net_name, net in template.nets.items():
            params = {}
            for name, shape in net.shapes().items():
                key = f"{net_name}.{name}"
                if key not in arrays or arrays[key].shape != shape:
                    raise CheckpointError(f"checkpoint array {key} missing or not shaped {shape}")
                params[name] = arrays[key]
            nets[net_name] = Mlp2(net.d_in, net.hidden, net.d_out, params)
        optimizers = []
        for label, nets_of in (("opt_stat", STAT_NETS), ("opt_norm", NORM_NETS)):
            hyper = meta[label]
            names = [f"{n}.{p}" for n in nets_of for p in nets[n].params]
            optimizers.append(AdamState(
                lr=hyper["lr"],
                beta1=hyper["beta1"],
                beta2=hyper["beta2"],
                adam_eps=hyper["adam_eps"],
                m={k: arrays[f"{label}.m.{k}"] for k in names},
                v={k: arrays[f"{label}.v.{k}"] for k in names},
                step_count=hyper["step_count"],
            ))
        return cls(cfg, nets, *optimizers)
