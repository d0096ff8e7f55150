"""Sigmoid multilayer perceptron: init, forward, loss, backprop.

Weight matrices are stored (fan_out x fan_in); a forward step is
``a @ W.T + bias``.  Gradients are hand-derived for this fixed family --
sigmoid/tanh/linear hidden units and a sigmoid output trained with
binary cross-entropy, where the output delta collapses to
``activation - target``.

Targets are 1.0 for signal and 0.0 for background.  Event importance
weights do not enter the loss unless explicitly passed; they are a
significance-evaluation concept first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Prng, gaussian_matrix, matmul
from .errors import SchemaError, ShapeError
from .kernels import sigmoid_kernel, tanh_kernel

DEFAULT_WIDTHS = (30, 300, 300, 300, 300, 1)

# weight-init variance by position: first layer, middle layers, output layer
INIT_VARIANCES = (0.1, 0.05, 0.01)

ACTIVATIONS = ("sigmoid", "tanh", "linear")

CLAMP_EPS = 1e-12

MODEL_FORMAT = "exoticnet-model v1"


@dataclass(frozen=True)
class Architecture:
    """Layer widths for a scoring network; input first, single output last."""

    widths: tuple[int, ...] = DEFAULT_WIDTHS

    def __post_init__(self):
        if len(self.widths) < 2:
            raise ValueError("architecture needs at least input and output widths")
        if any(w <= 0 for w in self.widths):
            raise ValueError(f"layer widths must be positive, got {self.widths}")
        if self.widths[-1] != 1:
            raise ValueError(f"output width must be 1, got {self.widths[-1]}")

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1


class Network:
    """Parameter container; immutable during forward/backward, updated in
    place only by the optimizer."""

    def __init__(self, weights, biases, activations):
        if not (len(weights) == len(biases) == len(activations)):
            raise ValueError("weights, biases, activations must align per layer")
        for act in activations:
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}")
        for l, (w, b) in enumerate(zip(weights, biases)):
            if w.shape[0] != b.shape[0]:
                raise ShapeError(
                    f"layer {l}: weight {w.shape} does not match bias {b.shape}"
                )
            if l > 0 and w.shape[1] != weights[l - 1].shape[0]:
                raise ShapeError(
                    f"layer {l}: fan-in {w.shape[1]} does not match previous "
                    f"fan-out {weights[l - 1].shape[0]}"
                )
        self.weights = [np.ascontiguousarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.ascontiguousarray(b, dtype=np.float64) for b in biases]
        self.activations = list(activations)

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1], *(w.shape[0] for w in self.weights))

    def copy(self) -> "Network":
        return Network(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            list(self.activations),
        )


@dataclass
class ForwardTrace:
    """Pre-activations and activations per layer; activations[0] is the
    input batch."""

    zs: list[np.ndarray]
    activations: list[np.ndarray]

    @property
    def outputs(self) -> np.ndarray:
        return self.activations[-1][:, 0]


@dataclass
class Gradients:
    weights: list[np.ndarray] = field(default_factory=list)
    biases: list[np.ndarray] = field(default_factory=list)


def init_variance(layer: int, n_layers: int) -> float:
    first, middle, last = INIT_VARIANCES
    if layer == n_layers - 1:
        return last
    if layer == 0:
        return first
    return middle


def init_network(
    arch: Architecture, rng: Prng, hidden_activation: str = "sigmoid"
) -> Network:
    """Gaussian weights (variance 0.1 / 0.05 / 0.01 by layer position),
    zero biases, sigmoid output."""
    if hidden_activation not in ACTIVATIONS:
        raise ValueError(f"unknown activation {hidden_activation!r}")
    n_layers = arch.n_layers
    weights, biases, acts = [], [], []
    for l in range(n_layers):
        fan_out, fan_in = arch.widths[l + 1], arch.widths[l]
        weights.append(gaussian_matrix(rng, fan_out, fan_in, 0.0, init_variance(l, n_layers)))
        biases.append(np.zeros(fan_out))
        acts.append("sigmoid" if l == n_layers - 1 else hidden_activation)
    return Network(weights, biases, acts)


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "sigmoid":
        return sigmoid_kernel(z)
    if kind == "tanh":
        return tanh_kernel(z)
    return z.copy()


def _activation_deriv(a: np.ndarray, kind: str) -> np.ndarray:
    """Derivative wrt pre-activation, expressed through the activation."""
    if kind == "sigmoid":
        return a * (1.0 - a)
    if kind == "tanh":
        return 1.0 - a * a
    return np.ones_like(a)


def forward(net: Network, batch: np.ndarray) -> ForwardTrace:
    batch = np.ascontiguousarray(batch, dtype=np.float64)
    if batch.ndim != 2:
        raise ShapeError(f"batch must be 2-D, got shape {batch.shape}")
    if batch.shape[1] != net.weights[0].shape[1]:
        raise ShapeError(
            f"batch width {batch.shape[1]} does not match input width "
            f"{net.weights[0].shape[1]}"
        )
    zs, acts = [], [batch]
    a = batch
    for w, b, kind in zip(net.weights, net.biases, net.activations):
        z = matmul(a, w.T) + b
        a = _activate(z, kind)
        zs.append(z)
        acts.append(a)
    return ForwardTrace(zs, acts)


def predict_scores(net: Network, features: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Forward pass in chunks, keeping no intermediate traces."""
    features = np.ascontiguousarray(features, dtype=np.float64)
    out = np.empty(features.shape[0])
    for lo in range(0, features.shape[0], chunk):
        hi = min(lo + chunk, features.shape[0])
        a = features[lo:hi]
        for w, b, kind in zip(net.weights, net.biases, net.activations):
            a = _activate(matmul(a, w.T) + b, kind)
        out[lo:hi] = a[:, 0]
    return out


def _as_column(x, name: str, n: int) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.shape != (n, 1):
        raise ShapeError(f"{name} has shape {np.asarray(x).shape}, expected ({n},) or ({n}, 1)")
    return arr


def ce_loss(outputs, targets, weights=None) -> float:
    """Binary cross-entropy, averaged over rows (weighted when asked).

    Outputs are clamped to [1e-12, 1 - 1e-12] before the logs.
    """
    out = np.asarray(outputs, dtype=np.float64).reshape(-1)
    tgt = np.asarray(targets, dtype=np.float64).reshape(-1)
    if out.shape != tgt.shape:
        raise ShapeError(
            f"outputs length {out.shape[0]} does not match targets length {tgt.shape[0]}"
        )
    a = np.clip(out, CLAMP_EPS, 1.0 - CLAMP_EPS)
    per_row = -(tgt * np.log(a) + (1.0 - tgt) * np.log(1.0 - a))
    if weights is None:
        return float(per_row.mean())
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if w.shape != out.shape:
        raise ShapeError(
            f"weights length {w.shape[0]} does not match outputs length {out.shape[0]}"
        )
    return float((w * per_row).sum() / w.sum())


def backward(net: Network, trace: ForwardTrace, targets, weights=None) -> Gradients:
    """Exact cross-entropy gradients via backprop through the trace.

    Requires the sigmoid output unit (its delta is activation - target);
    hidden layers may be sigmoid, tanh, or linear.
    """
    if net.activations[-1] != "sigmoid":
        raise ValueError("cross-entropy backward requires a sigmoid output layer")
    if len(trace.activations) != net.n_layers + 1:
        raise ShapeError(
            f"trace has {len(trace.activations) - 1} layers, network has {net.n_layers}"
        )
    n = trace.activations[0].shape[0]
    y = _as_column(targets, "targets", n)
    if weights is not None:
        w = _as_column(weights, "weights", n)
        coef = w / w.sum()
    else:
        coef = 1.0 / n

    grads = Gradients([None] * net.n_layers, [None] * net.n_layers)
    delta = (trace.activations[-1] - y) * coef
    for l in range(net.n_layers - 1, -1, -1):
        grads.weights[l] = matmul(delta.T, trace.activations[l])
        grads.biases[l] = delta.sum(axis=0)
        if l > 0:
            delta = matmul(delta, net.weights[l]) * _activation_deriv(
                trace.activations[l], net.activations[l - 1]
            )
    return grads


def save_network(net: Network, path) -> None:
    """Versioned plain text; 17 significant digits round-trip float64
    bit-exactly."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(MODEL_FORMAT + "\n")
        fh.write(" ".join(str(w) for w in net.widths) + "\n")
        fh.write(" ".join(net.activations) + "\n")
        for w, b in zip(net.weights, net.biases):
            fh.write(" ".join(f"{v:.17g}" for v in w.reshape(-1)) + "\n")
            fh.write(" ".join(f"{v:.17g}" for v in b) + "\n")


def load_network(path) -> Network:
    with open(path, "r", encoding="utf-8") as fh:
        magic = fh.readline().strip()
        if magic != MODEL_FORMAT:
            raise SchemaError(f"{path}: not a model file (got {magic!r})")
        widths = tuple(int(v) for v in fh.readline().split())
        acts = fh.readline().split()
        if len(acts) != len(widths) - 1:
            raise SchemaError(
                f"{path}: {len(acts)} activations for {len(widths) - 1} layers"
            )
        weights, biases = [], []
        for l in range(len(widths) - 1):
            fan_out, fan_in = widths[l + 1], widths[l]
            wline = fh.readline().split()
            bline = fh.readline().split()
            if len(wline) != fan_out * fan_in or len(bline) != fan_out:
                raise SchemaError(f"{path}: layer {l} tensor length mismatch")
            weights.append(
                np.array([float(v) for v in wline]).reshape(fan_out, fan_in)
            )
            biases.append(np.array([float(v) for v in bline]))
    return Network(weights, biases, acts)
