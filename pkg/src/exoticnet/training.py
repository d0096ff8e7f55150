"""Optimization stack: schedules, RMS-scaled momentum SGD, early
stopping, and greedy layer-wise autoencoder pretraining.

The update rule scales each gradient by a decaying RMS of its history
first, then applies classical momentum::

    r <- beta * r + (1 - beta) * g^2
    v <- mu * v - lr * g / (sqrt(r) + eps)
    theta <- theta + v

The learning rate follows search-then-converge decay
``lr0 / (1 + rate * epoch)`` by default; set ``anneal_mode="geometric"``
for ``lr0 * (1 - rate)^epoch`` instead.  Both are logged per epoch so a
run can be audited either way.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import evaluation
from .core import Prng
from .dataset import Dataset, split_stratified
from .errors import ShapeError
from .kernels import rmsprop_kernel
from .network import (
    Architecture,
    Gradients,
    Network,
    _activate,
    _activation_deriv,
    backward,
    ce_loss,
    forward,
    init_network,
    predict_scores,
)


@dataclass
class OptimizerConfig:
    lr0: float = 0.05
    momentum0: float = 0.9
    momentum_final: float = 0.99
    momentum_ramp_epochs: int = 100
    anneal_rate: float = 0.0005
    anneal_mode: str = "harmonic"  # or "geometric"
    rms_beta: float = 0.9
    rms_epsilon: float = 1e-8
    batch_size: int = 50
    max_epochs: int = 500
    patience_epochs: int = 30
    min_rel_improvement: float = 0.001
    valid_fraction: float = 0.2
    weighted_loss: bool = False

    def __post_init__(self):
        if self.lr0 <= 0 or self.anneal_rate <= 0:
            raise ValueError("lr0 and anneal_rate must be positive")
        if not (0.0 <= self.momentum0 < 1.0 and 0.0 <= self.momentum_final < 1.0):
            raise ValueError("momentum values must lie in [0, 1)")
        if self.momentum_ramp_epochs <= 0:
            raise ValueError("momentum_ramp_epochs must be positive")
        if self.rms_beta <= 0 or self.rms_beta > 1.0:
            raise ValueError("rms_beta must lie in (0, 1]")
        if self.rms_epsilon < 0:
            raise ValueError("rms_epsilon must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_epochs < 1 or self.patience_epochs < 1:
            raise ValueError("epoch limits must be >= 1")
        if self.min_rel_improvement <= 0:
            raise ValueError("min_rel_improvement must be positive")
        if not 0.0 < self.valid_fraction < 1.0:
            raise ValueError("valid_fraction must lie in (0, 1)")
        if self.anneal_mode not in ("harmonic", "geometric"):
            raise ValueError(f"unknown anneal_mode {self.anneal_mode!r}")


def lr_at(cfg: OptimizerConfig, epoch: int) -> float:
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    if cfg.anneal_mode == "geometric":
        return cfg.lr0 * (1.0 - cfg.anneal_rate) ** epoch
    return cfg.lr0 / (1.0 + cfg.anneal_rate * epoch)


def momentum_at(cfg: OptimizerConfig, epoch: int) -> float:
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    if epoch >= cfg.momentum_ramp_epochs:
        return cfg.momentum_final
    span = cfg.momentum_final - cfg.momentum0
    return cfg.momentum0 + span * epoch / cfg.momentum_ramp_epochs


class OptimizerState:
    """Velocity and RMS accumulators, shape-congruent with the network.

    RMS accumulators start at 1.0 (the original formulation of the
    technique): early steps then behave like plain momentum SGD instead
    of dividing by a near-zero root-mean-square, which blows a deep
    sigmoid net apart within the first epoch.
    """

    def __init__(self, net: Network):
        self.vel_w = [np.zeros_like(w) for w in net.weights]
        self.vel_b = [np.zeros_like(b) for b in net.biases]
        self.rms_w = [np.ones_like(w) for w in net.weights]
        self.rms_b = [np.ones_like(b) for b in net.biases]
        self.epoch = 0


def sgd_step(
    net: Network,
    grads: Gradients,
    state: OptimizerState,
    lr: float,
    mu: float,
    cfg: OptimizerConfig,
) -> None:
    """One in-place parameter update across every tensor of the network."""
    for l in range(net.n_layers):
        if grads.weights[l].shape != net.weights[l].shape:
            raise ShapeError(
                f"layer {l}: gradient {grads.weights[l].shape} vs "
                f"weights {net.weights[l].shape}"
            )
        rmsprop_kernel(
            net.weights[l].reshape(-1),
            np.ascontiguousarray(grads.weights[l]).reshape(-1),
            state.vel_w[l].reshape(-1),
            state.rms_w[l].reshape(-1),
            lr, mu, cfg.rms_beta, cfg.rms_epsilon,
        )
        rmsprop_kernel(
            net.biases[l],
            np.ascontiguousarray(grads.biases[l]),
            state.vel_b[l],
            state.rms_b[l],
            lr, mu, cfg.rms_beta, cfg.rms_epsilon,
        )


@dataclass
class EarlyStopState:
    best_error: float = float("inf")
    best_epoch: int = -1
    snapshot: Optional[Network] = None


def early_stop_update(
    state: EarlyStopState,
    epoch: int,
    val_err: float,
    net: Network,
    cfg: OptimizerConfig,
) -> bool:
    """Record improvements and signal when patience has run out.

    An epoch counts as an improvement only when its validation error is
    strictly below best * (1 - min_rel_improvement); returns True (stop)
    once ``epoch - best_epoch >= patience_epochs``.
    """
    if val_err < state.best_error * (1.0 - cfg.min_rel_improvement):
        state.best_error = val_err
        state.best_epoch = epoch
        state.snapshot = net.copy()
    return epoch - state.best_epoch >= cfg.patience_epochs


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    valid_loss: float
    lr: float
    momentum: float
    valid_ams: float


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)
    stop_reason: str = ""

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("epoch,train_loss,valid_loss,lr,momentum,valid_ams\n")
            for r in self.records:
                fh.write(
                    f"{r.epoch},{r.train_loss:.17g},{r.valid_loss:.17g},"
                    f"{r.lr:.17g},{r.momentum:.17g},{r.valid_ams:.17g}\n"
                )


@dataclass
class PretrainConfig:
    epochs: int = 15
    lr: float = 0.01
    noise: float = 0.0  # stddev of additive input corruption; 0 = plain
    batch_size: int = 50

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("pretrain epochs must be >= 0")
        if self.lr <= 0:
            raise ValueError("pretrain lr must be positive")
        if self.noise < 0:
            raise ValueError("pretrain noise must be >= 0")
        if self.batch_size < 1:
            raise ValueError("pretrain batch_size must be >= 1")


@dataclass
class PretrainedLayer:
    weight: np.ndarray
    bias: np.ndarray
    initial_loss: float
    final_loss: float


def _reconstruction_loss(visible, w, b_hidden, b_visible, activation) -> float:
    h = _activate(np.dot(visible, w.T) + b_hidden, activation)
    recon = np.dot(h, w) + b_visible
    diff = recon - visible
    return float(0.5 * (diff * diff).sum(axis=1).mean())


def pretrain_stack(
    data: np.ndarray,
    arch: Architecture,
    pcfg: PretrainConfig,
    rng: Prng,
    hidden_activation: str = "sigmoid",
) -> list[PretrainedLayer]:
    """Greedy layer-wise init from tied-weight autoencoders.

    For each hidden layer in order, a one-hidden-layer autoencoder (its
    decoder the transpose of its encoder, linear reconstruction, halved
    squared error) is trained by plain minibatch SGD on the activations
    of the stack so far; the trained encoder becomes that layer's init.
    With epochs=0 the Gaussian inits come back untouched, bit for bit.
    """
    data = np.ascontiguousarray(data, dtype=np.float64)
    net0 = init_network(arch, rng, hidden_activation)
    n_hidden = arch.n_layers - 1
    current = data
    out: list[PretrainedLayer] = []
    for l in range(n_hidden):
        w = net0.weights[l].copy()
        b_h = net0.biases[l].copy()
        b_v = np.zeros(w.shape[1])
        act = net0.activations[l]
        initial = _reconstruction_loss(current, w, b_h, b_v, act)
        n = current.shape[0]
        for _ in range(pcfg.epochs):
            perm = rng.permutation(n)
            for lo in range(0, n, pcfg.batch_size):
                idx = perm[lo : lo + pcfg.batch_size]
                x = current[idx]
                if pcfg.noise > 0.0:
                    x_in = x + rng.normals(x.size, 0.0, pcfg.noise**2).reshape(x.shape)
                else:
                    x_in = x
                h = _activate(np.dot(x_in, w.T) + b_h, act)
                recon = np.dot(h, w) + b_v
                d_r = (recon - x) / x.shape[0]
                d_h = np.dot(d_r, w.T) * _activation_deriv(h, act)
                grad_w = np.dot(h.T, d_r) + np.dot(d_h.T, x_in)
                w -= pcfg.lr * grad_w
                b_v -= pcfg.lr * d_r.sum(axis=0)
                b_h -= pcfg.lr * d_h.sum(axis=0)
        final = _reconstruction_loss(current, w, b_h, b_v, act)
        out.append(PretrainedLayer(w, b_h, initial, final))
        current = _activate(np.dot(current, w.T) + b_h, act)
    return out


def apply_pretrained(net: Network, layers: list[PretrainedLayer]) -> None:
    """Overwrite the hidden layers of ``net`` with pretrained inits."""
    if len(layers) > net.n_layers - 1:
        raise ShapeError(
            f"{len(layers)} pretrained layers for {net.n_layers - 1} hidden slots"
        )
    for l, pl in enumerate(layers):
        if pl.weight.shape != net.weights[l].shape:
            raise ShapeError(
                f"layer {l}: pretrained {pl.weight.shape} vs net {net.weights[l].shape}"
            )
        net.weights[l][:] = pl.weight
        net.biases[l][:] = pl.bias


def train_loop(
    net: Network,
    data: Dataset,
    cfg: OptimizerConfig,
    rng: Prng,
    ams_grid: Optional[np.ndarray] = None,
) -> tuple[Network, TrainHistory]:
    """Minibatch training with validation-based early stopping.

    Splits off the validation fraction (stratified, weight-renormalized),
    shuffles each epoch with the caller's rng, trains every minibatch
    including the short final one, and returns the snapshot from the best
    validation epoch together with the per-epoch history.
    """
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    if data.labels is None or data.weights is None:
        raise ValueError("training data must carry labels and weights")

    train_d, valid_d = split_stratified(data, cfg.valid_fraction, rng)
    x = train_d.features
    y = train_d.labels.astype(np.float64)
    w = train_d.weights
    xv = valid_d.features
    yv = valid_d.labels.astype(np.float64)
    wv = valid_d.weights

    state = OptimizerState(net)
    stopper = EarlyStopState()
    history = TrainHistory()
    n = len(train_d)
    stop_reason = "max_epochs"

    for epoch in range(cfg.max_epochs):
        lr = lr_at(cfg, epoch)
        mu = momentum_at(cfg, epoch)
        perm = rng.permutation(n)
        loss_sum = 0.0
        for lo in range(0, n, cfg.batch_size):
            idx = perm[lo : lo + cfg.batch_size]
            xb, yb = x[idx], y[idx]
            wb = w[idx] if cfg.weighted_loss else None
            trace = forward(net, xb)
            loss_sum += ce_loss(trace.outputs, yb, wb) * idx.shape[0]
            grads = backward(net, trace, yb, wb)
            sgd_step(net, grads, state, lr, mu, cfg)
        state.epoch = epoch + 1

        scores_v = predict_scores(net, xv)
        valid_loss = ce_loss(scores_v, yv, wv if cfg.weighted_loss else None)
        valid_ams = evaluation.sweep_threshold(scores_v, wv, yv, ams_grid).best_ams
        history.records.append(
            EpochRecord(epoch, loss_sum / n, valid_loss, lr, mu, valid_ams)
        )
        if early_stop_update(stopper, epoch, valid_loss, net, cfg):
            stop_reason = "patience"
            break

    history.stop_reason = stop_reason
    best = stopper.snapshot if stopper.snapshot is not None else net.copy()
    return best, history
