"""Two-stage multi-task network, trained jointly on the weighted loss
L = a*L_f + (1-a)*L_g.

Task f maps image features to the 19 perceptual indicators; task g maps
(features, indicators) to the thermal-affordance score. During training g
consumes observed indicator scores (teacher forcing); at inference it
consumes f's predictions. Everything is plain numpy with hand-written
backprop so gradients can be verified against finite differences.
"""

from __future__ import annotations

import copy
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from . import schema, stats
from .errors import (
    ConfigError,
    DivergenceError,
    NumericError,
    ShapeError,
    StratumTooSmallError,
)

N_VPI = len(schema.VPI_NAMES)


@dataclass
class NetworkConfig:
    input_dim: int
    hidden_f: tuple[int, ...] = (256, 128)
    hidden_g: tuple[int, ...] = (128, 64)
    activation: str = "relu"          # relu | tanh
    loss_alpha: float = 0.5
    learning_rate: float = 1e-3
    epochs: int = 200
    batch_size: int = 32
    seed: int = 0
    optimizer: str = "adam"           # adam | sgd-momentum
    momentum: float = 0.9
    feature_jitter_sd: float = 0.0    # optional Gaussian jitter on train batches

    def validate(self) -> "NetworkConfig":
        if not 0.0 <= self.loss_alpha <= 1.0:
            raise ConfigError("loss_alpha must be in [0, 1]")
        if self.activation not in ("relu", "tanh"):
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.optimizer not in ("adam", "sgd-momentum"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if any(w < 1 for w in self.hidden_f) or any(w < 1 for w in self.hidden_g):
            raise ConfigError("hidden widths must be >= 1")
        if self.input_dim < 1:
            raise ConfigError("input_dim must be >= 1")
        return self

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden_f": list(self.hidden_f),
            "hidden_g": list(self.hidden_g),
            "activation": self.activation,
            "loss_alpha": self.loss_alpha,
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "optimizer": self.optimizer,
            "momentum": self.momentum,
            "feature_jitter_sd": self.feature_jitter_sd,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        return cls(
            input_dim=int(d["input_dim"]),
            hidden_f=tuple(d["hidden_f"]),
            hidden_g=tuple(d["hidden_g"]),
            activation=d["activation"],
            loss_alpha=float(d["loss_alpha"]),
            learning_rate=float(d["learning_rate"]),
            epochs=int(d["epochs"]),
            batch_size=int(d["batch_size"]),
            seed=int(d["seed"]),
            optimizer=d["optimizer"],
            momentum=float(d.get("momentum", 0.9)),
            feature_jitter_sd=float(d.get("feature_jitter_sd", 0.0)),
        ).validate()


# --- stratified splitting -------------------------------------------------------


@dataclass
class SplitPlan:
    train_ids: list[str]
    val_ids: list[str]
    test_ids: list[str]
    folds: dict[str, int]              # image_id -> fold index
    strata: dict[str, int]             # image_id -> cluster label

    def all_ids(self) -> list[str]:
        return self.train_ids + self.val_ids + self.test_ids


def _largest_remainder(n: int, ratios: Sequence[float]) -> list[int]:
    raw = [n * r for r in ratios]
    counts = [int(math.floor(v)) for v in raw]
    short = n - sum(counts)
    order = sorted(range(len(ratios)), key=lambda i: raw[i] - counts[i], reverse=True)
    for i in order[:short]:
        counts[i] += 1
    return counts


def split(
    ids: Sequence[str],
    cluster_labels: Mapping[str, int],
    ratios: tuple[float, float, float] = (0.6, 0.2, 0.2),
    seed: int = 0,
    n_folds: int = 5,
) -> SplitPlan:
    """Cluster-stratified train/val/test split plus k-fold assignments.

    Within each stratum the three partitions get largest-remainder exact
    counts and folds are assigned round-robin, so per-fold class counts
    differ by at most one.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError("ratios must sum to 1")
    unlabeled = [i for i in ids if i not in cluster_labels]
    if unlabeled:
        raise ConfigError(f"id {unlabeled[0]!r} has no cluster label")
    strata: dict[int, list[str]] = {}
    for image_id in ids:
        strata.setdefault(int(cluster_labels[image_id]), []).append(image_id)

    train, val, test = [], [], []
    folds: dict[str, int] = {}
    for label in sorted(strata):
        members = sorted(strata[label])
        if len(members) < 5:
            raise StratumTooSmallError(f"stratum {label} has {len(members)} < 5 members")
        rng = np.random.default_rng([seed, label])
        members = [members[i] for i in rng.permutation(len(members))]
        n_train, n_val, n_test = _largest_remainder(len(members), ratios)
        train += members[:n_train]
        val += members[n_train:n_train + n_val]
        test += members[n_train + n_val:]
        for pos, image_id in enumerate(members):
            folds[image_id] = pos % n_folds
    return SplitPlan(
        train_ids=train,
        val_ids=val,
        test_ids=test,
        folds=folds,
        strata={i: int(cluster_labels[i]) for i in ids},
    )


# --- parameters and forward pass ---------------------------------------------------


def _layer_dims(config: NetworkConfig) -> tuple[list[int], list[int]]:
    f_dims = [config.input_dim, *config.hidden_f, N_VPI]
    g_dims = [config.input_dim + N_VPI, *config.hidden_g, 1]
    return f_dims, g_dims


def init_params(config: NetworkConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """He-scaled (relu) or Glorot-scaled (tanh) Gaussian init."""
    config.validate()
    params: dict[str, np.ndarray] = {}
    f_dims, g_dims = _layer_dims(config)
    for head, dims in (("f", f_dims), ("g", g_dims)):
        for i in range(len(dims) - 1):
            fan_in = dims[i]
            scale = math.sqrt(2.0 / fan_in) if config.activation == "relu" else math.sqrt(1.0 / fan_in)
            params[f"{head}.W{i}"] = rng.normal(0.0, scale, size=(dims[i], dims[i + 1]))
            params[f"{head}.b{i}"] = np.zeros(dims[i + 1])
    return params


def zero_params(config: NetworkConfig) -> dict[str, np.ndarray]:
    params = init_params(config, np.random.default_rng(0))
    return {k: np.zeros_like(v) for k, v in params.items()}


def _act(x: np.ndarray, kind: str) -> np.ndarray:
    return np.maximum(x, 0.0) if kind == "relu" else np.tanh(x)


def _act_grad(pre: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (pre > 0.0).astype(float)
    t = np.tanh(pre)
    return 1.0 - t * t


def _mlp_forward(params, head: str, X: np.ndarray, n_layers: int, kind: str):
    """Returns (output, cache of pre-activations and inputs per layer)."""
    cache = []
    a = X
    for i in range(n_layers):
        W, b = params[f"{head}.W{i}"], params[f"{head}.b{i}"]
        z = a @ W + b
        last = i == n_layers - 1
        out = z if last else _act(z, kind)
        cache.append((a, z))
        a = out
    return a, cache


def _mlp_backward(params, head: str, cache, grad_out: np.ndarray, n_layers: int, kind: str, grads: dict):
    g = grad_out
    for i in reversed(range(n_layers)):
        a_in, z = cache[i]
        if i != n_layers - 1:
            g = g * _act_grad(z, kind)
        grads[f"{head}.W{i}"] = a_in.T @ g
        grads[f"{head}.b{i}"] = g.sum(axis=0)
        g = g @ params[f"{head}.W{i}"].T
    return g   # gradient w.r.t. the head's input


def forward(
    params: dict[str, np.ndarray],
    config: NetworkConfig,
    X,
    vpi_true=None,
) -> tuple[np.ndarray, np.ndarray]:
    """(indicator predictions, affordance predictions).

    With ``vpi_true`` given, g is teacher-forced on the observed indicators;
    otherwise it consumes f's predictions (inference mode).
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != config.input_dim:
        raise ShapeError(f"expected width {config.input_dim}, got {X.shape[1]}")
    f_dims, g_dims = _layer_dims(config)
    vpi_pred, _ = _mlp_forward(params, "f", X, len(f_dims) - 1, config.activation)
    v_input = np.asarray(vpi_true, dtype=float) if vpi_true is not None else vpi_pred
    if v_input.shape != (X.shape[0], N_VPI):
        raise ShapeError(f"indicator block must be (n, {N_VPI}), got {v_input.shape}")
    vata_pred, _ = _mlp_forward(
        params, "g", np.hstack([X, v_input]), len(g_dims) - 1, config.activation
    )
    return vpi_pred, vata_pred[:, 0]


def loss(
    vpi_pred, vpi_true, vata_pred, vata_true, loss_alpha: float
) -> tuple[float, float, float]:
    """(L, L_f, L_g): per-task mean squared errors under the task weight."""
    vpi_pred = np.asarray(vpi_pred, dtype=float)
    vpi_true = np.asarray(vpi_true, dtype=float)
    vata_pred = np.asarray(vata_pred, dtype=float)
    vata_true = np.asarray(vata_true, dtype=float)
    if vpi_pred.shape != vpi_true.shape or vata_pred.shape != vata_true.shape:
        raise ShapeError("prediction/target shapes differ")
    l_f = float(np.mean((vpi_pred - vpi_true) ** 2))
    l_g = float(np.mean((vata_pred - vata_true) ** 2))
    return loss_alpha * l_f + (1.0 - loss_alpha) * l_g, l_f, l_g


def loss_and_grads(
    params: dict[str, np.ndarray],
    config: NetworkConfig,
    X: np.ndarray,
    V: np.ndarray,
    y: np.ndarray,
) -> tuple[float, float, float, dict[str, np.ndarray]]:
    """Teacher-forced training loss and analytic gradients."""
    n = X.shape[0]
    f_dims, g_dims = _layer_dims(config)
    kind = config.activation
    vpi_pred, f_cache = _mlp_forward(params, "f", X, len(f_dims) - 1, kind)
    g_in = np.hstack([X, V])
    vata_out, g_cache = _mlp_forward(params, "g", g_in, len(g_dims) - 1, kind)
    vata_pred = vata_out[:, 0]

    total, l_f, l_g = loss(vpi_pred, V, vata_pred, y, config.loss_alpha)

    grads: dict[str, np.ndarray] = {}
    d_vpi = config.loss_alpha * 2.0 * (vpi_pred - V) / (n * N_VPI)
    _mlp_backward(params, "f", f_cache, d_vpi, len(f_dims) - 1, kind, grads)
    d_vata = ((1.0 - config.loss_alpha) * 2.0 * (vata_pred - y) / n)[:, None]
    _mlp_backward(params, "g", g_cache, d_vata, len(g_dims) - 1, kind, grads)
    return total, l_f, l_g, grads


# --- optimizers ----------------------------------------------------------------------


class _Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for k in params:
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            params[k] -= self.lr * (self.m[k] / b1t) / (np.sqrt(self.v[k] / b2t) + self.eps)


class _Momentum:
    def __init__(self, params, lr, momentum=0.9):
        self.lr, self.momentum = lr, momentum
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params, grads):
        for k in params:
            self.v[k] = self.momentum * self.v[k] - self.lr * grads[k]
            params[k] += self.v[k]


# --- training --------------------------------------------------------------------------


@dataclass
class TrainedNetwork:
    params: dict[str, np.ndarray]
    config: NetworkConfig
    history: list[dict]
    best_epoch: int

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "best_epoch": self.best_epoch,
            "history": self.history,
            "params": {k: v.tolist() for k, v in sorted(self.params.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedNetwork":
        return cls(
            params={k: np.array(v, dtype=float) for k, v in d["params"].items()},
            config=NetworkConfig.from_dict(d["config"]),
            history=list(d["history"]),
            best_epoch=int(d["best_epoch"]),
        )


def _full_losses(params, config, X, V, y) -> tuple[float, float, float]:
    vpi_pred, vata_pred = forward(params, config, X, vpi_true=V)
    return loss(vpi_pred, V, vata_pred, y, config.loss_alpha)


def train(
    config: NetworkConfig,
    X: np.ndarray,
    V: np.ndarray,
    y: np.ndarray,
    plan_idx: tuple[Sequence[int], Sequence[int]],
) -> TrainedNetwork:
    """Mini-batch training on the weighted two-task loss.

    ``plan_idx`` is (train row indices, val row indices). The parameters of
    the best-validation epoch are returned; history records per-epoch
    losses. Deterministic given the config seed.
    """
    config.validate()
    X = np.asarray(X, dtype=float)
    V = np.asarray(V, dtype=float)
    y = np.asarray(y, dtype=float)
    tr, va = (np.asarray(plan_idx[0], dtype=int), np.asarray(plan_idx[1], dtype=int))
    rng = np.random.default_rng(config.seed)
    params = init_params(config, rng)
    opt = (
        _Adam(params, config.learning_rate)
        if config.optimizer == "adam"
        else _Momentum(params, config.learning_rate, config.momentum)
    )

    best_val = math.inf
    best_epoch = 0
    best_params = copy.deepcopy(params)
    history: list[dict] = []
    for epoch in range(1, config.epochs + 1):
        erng = np.random.default_rng([config.seed, epoch])
        order = erng.permutation(tr.size)
        for start in range(0, tr.size, config.batch_size):
            idx = tr[order[start:start + config.batch_size]]
            Xb = X[idx]
            if config.feature_jitter_sd > 0.0:
                Xb = Xb + erng.normal(0.0, config.feature_jitter_sd, Xb.shape)
            total, _, _, grads = loss_and_grads(params, config, Xb, V[idx], y[idx])
            if not math.isfinite(total):
                raise DivergenceError(epoch)
            opt.step(params, grads)
        train_l, l_f, l_g = _full_losses(params, config, X[tr], V[tr], y[tr])
        val_l, _, _ = _full_losses(params, config, X[va], V[va], y[va]) if va.size else (train_l, 0, 0)
        if not (math.isfinite(train_l) and math.isfinite(val_l)):
            raise DivergenceError(epoch)
        history.append(
            {"epoch": epoch, "train_loss": train_l, "val_loss": val_l,
             "loss_f": l_f, "loss_g": l_g}
        )
        if val_l < best_val:
            best_val = val_l
            best_epoch = epoch
            best_params = copy.deepcopy(params)
    if not history:   # epochs == 0: untouched init
        best_params, best_epoch = params, 0
    return TrainedNetwork(best_params, config, history, best_epoch)


# --- gradient verification ----------------------------------------------------------


def _min_abs_preactivation(params, config, X, V) -> float:
    f_dims, g_dims = _layer_dims(config)
    _, f_cache = _mlp_forward(params, "f", X, len(f_dims) - 1, config.activation)
    _, g_cache = _mlp_forward(params, "g", np.hstack([X, V]), len(g_dims) - 1, config.activation)
    hidden_z = [z for _, z in f_cache[:-1]] + [z for _, z in g_cache[:-1]]
    if not hidden_z:
        return math.inf
    return min(float(np.min(np.abs(z))) for z in hidden_z)


def gradient_check(
    config: NetworkConfig,
    n_samples: int = 5,
    h: float = 1e-5,
    avoid_relu_kinks: bool = False,
    zero_weights: bool = False,
) -> float:
    """Max relative error of analytic vs central-difference gradients over
    every parameter entry of a small network.

    With ``avoid_relu_kinks`` the sample is redrawn until every hidden
    pre-activation is safely away from zero, where relu is non-smooth.
    """
    config.validate()
    if max([*config.hidden_f, *config.hidden_g]) > 32:
        raise ConfigError("gradient_check expects hidden widths <= 32")
    for attempt in range(64):
        rng = np.random.default_rng([config.seed, attempt])
        X = rng.normal(0.0, 1.0, size=(n_samples, config.input_dim))
        V = rng.normal(0.0, 1.0, size=(n_samples, N_VPI))
        y = rng.normal(0.0, 1.0, size=n_samples)
        params = zero_params(config) if zero_weights else init_params(config, rng)
        if not avoid_relu_kinks or config.activation != "relu":
            break
        if _min_abs_preactivation(params, config, X, V) > 100.0 * h:
            break
    else:
        raise NumericError("could not find a kink-free sample")

    _, _, _, grads = loss_and_grads(params, config, X, V, y)
    max_rel = 0.0
    for key in sorted(params):
        W = params[key]
        it = np.nditer(W, flags=["multi_index"])
        while not it.finished:
            ix = it.multi_index
            orig = W[ix]
            W[ix] = orig + h
            lp = _loss_only(params, config, X, V, y)
            W[ix] = orig - h
            lm = _loss_only(params, config, X, V, y)
            W[ix] = orig
            numeric = (lp - lm) / (2.0 * h)
            analytic = grads[key][ix]
            denom = max(abs(analytic) + abs(numeric), 1e-8)
            rel = abs(analytic - numeric) / denom
            if rel > max_rel:
                max_rel = rel
            it.iternext()
    return max_rel


def _loss_only(params, config, X, V, y) -> float:
    vpi_pred, f_cache = _mlp_forward(
        params, "f", X, len(_layer_dims(config)[0]) - 1, config.activation
    )
    g_in = np.hstack([X, V])
    vata_out, _ = _mlp_forward(
        params, "g", g_in, len(_layer_dims(config)[1]) - 1, config.activation
    )
    total, _, _ = loss(vpi_pred, V, vata_out[:, 0], y, config.loss_alpha)
    return total


# --- evaluation ---------------------------------------------------------------------


def evaluate(
    trained: TrainedNetwork,
    X: np.ndarray,
    V_true: np.ndarray,
    y: np.ndarray,
    k_convention: str = "d1_width",
) -> dict:
    """Inference-mode metrics (g consumes predicted indicators).

    Adjusted R2 uses the input width as k by default, labeled as the
    "neural" convention; falls back to k = 0 with a warning when the sample
    is too small for that many degrees of freedom.
    """
    config = trained.config
    vpi_pred, vata_pred = forward(trained.params, config, X)
    n = X.shape[0]
    if k_convention == "d1_width" and n - config.input_dim - 1 > 0:
        k = config.input_dim
        label = f"neural(k=input_dim={k})"
    else:
        k = 0
        label = "neural(k=0; input_dim exceeds dof)" if k_convention == "d1_width" else "neural(k=0)"
    vata_report = stats.regression_metrics(y, vata_pred, k)
    vata_report.convention = label + "; " + vata_report.convention
    per_vpi = {}
    for j, name in enumerate(schema.VPI_NAMES):
        rep = stats.regression_metrics(V_true[:, j], vpi_pred[:, j], k)
        rep.convention = label + "; " + rep.convention
        per_vpi[name] = rep
    return {"vata": vata_report, "vpi": per_vpi, "k_label": label}


# --- matched-capacity single-task baseline --------------------------------------------


def train_single_task(
    config: NetworkConfig,
    X: np.ndarray,
    y: np.ndarray,
    plan_idx: tuple[Sequence[int], Sequence[int]],
) -> TrainedNetwork:
    """Direct features -> affordance network of matched total capacity
    (hidden widths = hidden_f ++ hidden_g), used as the ordering baseline."""
    single = NetworkConfig(
        input_dim=config.input_dim,
        hidden_f=tuple(config.hidden_f) + tuple(config.hidden_g),
        hidden_g=(1,),                 # unused head kept minimal
        activation=config.activation,
        loss_alpha=0.0,                # only the affordance loss trains
        learning_rate=config.learning_rate,
        epochs=config.epochs,
        batch_size=config.batch_size,
        seed=config.seed,
        optimizer=config.optimizer,
        momentum=config.momentum,
    )
    return _train_plain_mlp(single, X, y, plan_idx)


def _train_plain_mlp(config: NetworkConfig, X, y, plan_idx) -> TrainedNetwork:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    tr, va = (np.asarray(plan_idx[0], dtype=int), np.asarray(plan_idx[1], dtype=int))
    dims = [config.input_dim, *config.hidden_f, 1]
    rng = np.random.default_rng(config.seed)
    params: dict[str, np.ndarray] = {}
    for i in range(len(dims) - 1):
        scale = (
            math.sqrt(2.0 / dims[i]) if config.activation == "relu" else math.sqrt(1.0 / dims[i])
        )
        params[f"s.W{i}"] = rng.normal(0.0, scale, size=(dims[i], dims[i + 1]))
        params[f"s.b{i}"] = np.zeros(dims[i + 1])
    n_layers = len(dims) - 1
    opt = (
        _Adam(params, config.learning_rate)
        if config.optimizer == "adam"
        else _Momentum(params, config.learning_rate, config.momentum)
    )

    def full_loss(idx):
        out, _ = _mlp_forward(params, "s", X[idx], n_layers, config.activation)
        return float(np.mean((out[:, 0] - y[idx]) ** 2))

    best_val = math.inf
    best_epoch = 0
    best_params = copy.deepcopy(params)
    history = []
    for epoch in range(1, config.epochs + 1):
        erng = np.random.default_rng([config.seed, epoch])
        order = erng.permutation(tr.size)
        for start in range(0, tr.size, config.batch_size):
            idx = tr[order[start:start + config.batch_size]]
            out, cache = _mlp_forward(params, "s", X[idx], n_layers, config.activation)
            resid = out[:, 0] - y[idx]
            total = float(np.mean(resid**2))
            if not math.isfinite(total):
                raise DivergenceError(epoch)
            grads: dict[str, np.ndarray] = {}
            d_out = (2.0 * resid / idx.size)[:, None]
            _mlp_backward(params, "s", cache, d_out, n_layers, config.activation, grads)
            opt.step(params, grads)
        train_l = full_loss(tr)
        val_l = full_loss(va) if va.size else train_l
        if not (math.isfinite(train_l) and math.isfinite(val_l)):
            raise DivergenceError(epoch)
        history.append({"epoch": epoch, "train_loss": train_l, "val_loss": val_l,
                        "loss_f": 0.0, "loss_g": train_l})
        if val_l < best_val:
            best_val, best_epoch = val_l, epoch
            best_params = copy.deepcopy(params)
    return TrainedNetwork(best_params, config, history, best_epoch)


def predict_single_task(trained: TrainedNetwork, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    dims = [trained.config.input_dim, *trained.config.hidden_f, 1]
    out, _ = _mlp_forward(trained.params, "s", X, len(dims) - 1, trained.config.activation)
    return out[:, 0]
