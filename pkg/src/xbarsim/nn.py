"""Minimal perceptron / multilayer-perceptron engine.

Dense layers store one bias row (the constant-1 input) as the last weight
row. Forward passes run either exactly through the reference product or
through programmed crossbars, one per layer. Training is plain mini-batch
SGD with backprop; the two noise-injection modes perturb only the forward
pass (fresh Gaussian weight noise, or a freshly programmed crossbar per
batch with straight-through gradients from the clean weights). Weight
sensitivity is the negative learning-rate-scaled gradient, the importance
proxy used by the mitigation module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import RandomStream, as_matrix, as_vector
from .crossbar import Crossbar, ReadConfig, program, vmm_batch
from .errors import ParameterError, ShapeError, TrainingError

LOGISTIC = "logistic"
RELU = "relu"
SOFTMAX = "softmax"
IDENTITY = "identity"
STEP = "step"

ACTIVATIONS = (LOGISTIC, RELU, SOFTMAX, IDENTITY, STEP)

LOSS_MSE = "mse"
LOSS_CROSS_ENTROPY = "cross_entropy"

NOISE_NONE = "none"
NOISE_AGNOSTIC = "agnostic"
NOISE_AWARE = "aware"


@dataclass
class DenseLayer:
    """Weight matrix of shape (inputs + 1, outputs); the bias row is last."""

    w: np.ndarray
    activation: str = LOGISTIC

    def __post_init__(self):
        self.w = as_matrix(self.w, "layer weights")
        if self.activation not in ACTIVATIONS:
            raise ParameterError(f"unknown activation {self.activation!r}")

    @property
    def n_inputs(self) -> int:
        return self.w.shape[0] - 1

    @property
    def n_outputs(self) -> int:
        return self.w.shape[1]


class Mlp:
    """Stack of dense layers with composable dimensions."""

    def __init__(self, layers: list[DenseLayer]):
        if not layers:
            raise ParameterError("an Mlp needs at least one layer")
        for a, b in zip(layers, layers[1:]):
            if a.n_outputs != b.n_inputs:
                raise ShapeError(
                    f"layer output size {a.n_outputs} does not feed input size {b.n_inputs}"
                )
        self.layers = layers

    @property
    def layer_sizes(self) -> list[int]:
        return [self.layers[0].n_inputs] + [l.n_outputs for l in self.layers]

    def copy(self) -> "Mlp":
        return Mlp([DenseLayer(l.w.copy(), l.activation) for l in self.layers])


def init_mlp(layer_sizes, activations, stream: RandomStream) -> Mlp:
    """Seeded uniform init in +/- sqrt(6 / (rows + cols)), bias row included."""
    if len(activations) != len(layer_sizes) - 1:
        raise ParameterError("need one activation per layer")
    layers = []
    for li, (m, n) in enumerate(zip(layer_sizes, layer_sizes[1:])):
        limit = math.sqrt(6.0 / (m + 1 + n))
        w = stream.substream("init", li).uniform(-limit, limit, size=(m + 1, n))
        layers.append(DenseLayer(w, activations[li]))
    return Mlp(layers)


def perceptron(x, w, b: float) -> int:
    """Threshold unit: 1 if w . x + b > 0 else 0 (strictly greater)."""
    xv = as_vector(x, "x")
    wv = as_vector(w, "w")
    if xv.shape != wv.shape:
        raise ShapeError(f"lengths differ: {xv.shape[0]} vs {wv.shape[0]}")
    return 1 if float(wv @ xv + b) > 0.0 else 0


def _activate(z, kind):
    if kind == LOGISTIC:
        return 1.0 / (1.0 + np.exp(-z))
    if kind == RELU:
        return np.maximum(z, 0.0)
    if kind == IDENTITY:
        return z
    if kind == STEP:
        return (z > 0.0).astype(np.float64)
    if kind == SOFTMAX:
        shifted = z - z.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=-1, keepdims=True)
    raise ParameterError(f"unknown activation {kind!r}")


def _activate_deriv(z, a, kind):
    """Derivative through the activation, given pre-activations z and outputs a."""
    if kind == LOGISTIC:
        return a * (1.0 - a)
    if kind == RELU:
        return (z > 0.0).astype(np.float64)
    if kind == IDENTITY:
        return np.ones_like(z)
    if kind == STEP:
        return np.zeros_like(z)  # zero almost everywhere; upstream learns nothing
    raise ParameterError(f"cannot differentiate through {kind!r} here")


def _append_bias(a):
    ones = np.ones((a.shape[0], 1))
    return np.concatenate([a, ones], axis=1)


class CrossbarMlpBackend:
    """One programmed crossbar per layer plus the shared read config."""

    def __init__(self, crossbars: list[Crossbar], read: ReadConfig):
        self.crossbars = crossbars
        self.read = read

    @classmethod
    def program_network(cls, net: Mlp, config_for_layer, read: ReadConfig):
        """config_for_layer(layer_index, weights) -> CrossbarConfig."""
        xbars = [
            program(layer.w, config_for_layer(li, layer.w))
            for li, layer in enumerate(net.layers)
        ]
        return cls(xbars, read)

    def layer_product(self, li: int, a_biased: np.ndarray, call_index: int = 0):
        return vmm_batch(self.crossbars[li], a_biased, self.read, call_index=call_index)


def _forward_batch(net: Mlp, x_batch, backend=None, weights=None, call_index=0):
    """Activations for a batch; returns (pre-activations, activations) per layer.

    weights overrides the stored layer matrices (used for noise injection);
    backend routes the product through crossbars instead.
    """
    a = as_matrix(x_batch, "x batch")
    if a.shape[1] != net.layers[0].n_inputs:
        raise ShapeError(
            f"input size {a.shape[1]} does not match first layer ({net.layers[0].n_inputs})"
        )
    zs, acts = [], [a]
    for li, layer in enumerate(net.layers):
        a_biased = _append_bias(a)
        if backend is not None:
            z = backend.layer_product(li, a_biased, call_index=call_index)
        else:
            w = layer.w if weights is None else weights[li]
            z = a_biased @ w
        a = _activate(z, layer.activation)
        zs.append(z)
        acts.append(a)
    return zs, acts


def forward(net: Mlp, x, backend=None, call_index: int = 0) -> np.ndarray:
    """Network output for one input vector (exact or crossbar-backed)."""
    xv = as_vector(x, "x")
    _, acts = _forward_batch(net, xv[None, :], backend=backend, call_index=call_index)
    return acts[-1][0]


def _loss_value(outputs, targets, loss):
    # Overflow to inf is the divergence signal train_sgd reports on.
    with np.errstate(over="ignore"):
        if loss == LOSS_MSE:
            return float(0.5 * np.sum((outputs - targets) ** 2) / outputs.shape[0])
        if loss == LOSS_CROSS_ENTROPY:
            eps = 1e-12
            return float(-np.sum(targets * np.log(outputs + eps)) / outputs.shape[0])
    raise ParameterError(f"unknown loss {loss!r}")


def _output_delta(z_out, a_out, targets, activation, loss):
    batch = a_out.shape[0]
    if loss == LOSS_CROSS_ENTROPY:
        if activation != SOFTMAX:
            raise TrainingError("cross_entropy expects a softmax output layer")
        return (a_out - targets) / batch
    # Mean-squared error through the output activation.
    if activation == SOFTMAX:
        raise TrainingError("mse with a softmax output layer is not supported")
    return (a_out - targets) * _activate_deriv(z_out, a_out, activation) / batch


def _backprop(net: Mlp, zs, acts, targets, loss, backward_weights=None):
    """Gradients of the batch-mean loss for every layer's weight matrix."""
    grads = [None] * len(net.layers)
    delta = _output_delta(zs[-1], acts[-1], targets, net.layers[-1].activation, loss)
    for li in range(len(net.layers) - 1, -1, -1):
        a_in = _append_bias(acts[li])
        grads[li] = a_in.T @ delta
        if li > 0:
            w = net.layers[li].w if backward_weights is None else backward_weights[li]
            upstream = delta @ w[:-1, :].T  # bias row does not propagate
            layer_below = net.layers[li - 1]
            # acts[li] is layer li-1's output (acts[0] is the network input).
            delta = upstream * _activate_deriv(zs[li - 1], acts[li], layer_below.activation)
    return grads


def gradients(net: Mlp, x_batch, targets, loss) -> list[np.ndarray]:
    """Backprop gradients of the batch-mean loss at the current weights."""
    targets = as_matrix(targets, "targets")
    zs, acts = _forward_batch(net, x_batch)
    return _backprop(net, zs, acts, targets, loss)


def one_hot(labels, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.shape[0], n_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


@dataclass(frozen=True)
class TrainConfig:
    """Mini-batch SGD settings, including the noise-injection mode.

    sigma_w is relative: the injected std is sigma_w times the layer's
    current max |w|, matching how conductance-level perturbations scale when
    the mapping uses the full window (k_G proportional to 1 / max |w|).
    """

    eta: float
    epochs: int
    batch_size: int = 32
    loss: str = LOSS_CROSS_ENTROPY
    noise_mode: str = NOISE_NONE
    sigma_w: float = 0.0
    seed: int = 0
    aware_config_for_layer: object = None  # (layer, weights, batch_stream_ids) -> CrossbarConfig
    aware_read: ReadConfig | None = None

    def __post_init__(self):
        if not self.eta >= 0.0:
            raise ParameterError(f"eta must be >= 0, got {self.eta}")
        if self.epochs < 1:
            raise ParameterError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ParameterError("batch_size must be >= 1")
        if self.loss not in (LOSS_MSE, LOSS_CROSS_ENTROPY):
            raise ParameterError(f"unknown loss {self.loss!r}")
        if self.noise_mode not in (NOISE_NONE, NOISE_AGNOSTIC, NOISE_AWARE):
            raise ParameterError(f"unknown noise mode {self.noise_mode!r}")
        if self.noise_mode == NOISE_AGNOSTIC and not self.sigma_w > 0.0:
            raise ParameterError("agnostic noise needs sigma_w > 0")
        if self.noise_mode == NOISE_AWARE and self.aware_config_for_layer is None:
            raise ParameterError("aware noise needs a crossbar config factory")


def train_sgd(net: Mlp, data, cfg: TrainConfig):
    """Mini-batch SGD with backprop; returns (trained copy, per-epoch loss history).

    Agnostic noise adds fresh zero-mean Gaussian weight noise on each forward
    pass only; aware noise reads each batch through freshly programmed
    crossbars with gradients taken at the clean weights (straight-through).
    The loss history records the clean full-dataset loss after each epoch.
    """
    x, labels = data
    x = as_matrix(x, "training inputs")
    if x.shape[0] == 0:
        raise ParameterError("training dataset is empty")
    n_out = net.layers[-1].n_outputs
    targets = one_hot(labels, n_out) if np.asarray(labels).ndim == 1 else as_matrix(labels)
    if targets.shape != (x.shape[0], n_out):
        raise ShapeError(
            f"targets shape {targets.shape} does not match ({x.shape[0]}, {n_out})"
        )

    trained = net.copy()
    stream = RandomStream(cfg.seed, "train")
    history = []
    n = x.shape[0]
    n_batches = (n + cfg.batch_size - 1) // cfg.batch_size
    for epoch in range(cfg.epochs):
        order = stream.substream("shuffle", epoch).permutation(n)
        for b in range(n_batches):
            idx = order[b * cfg.batch_size : (b + 1) * cfg.batch_size]
            xb, tb = x[idx], targets[idx]
            if cfg.noise_mode == NOISE_AGNOSTIC:
                noisy = [
                    layer.w
                    + cfg.sigma_w
                    * np.abs(layer.w).max()
                    * stream.substream("noise", epoch, b, li).normal(size=layer.w.shape)
                    for li, layer in enumerate(trained.layers)
                ]
                zs, acts = _forward_batch(trained, xb, weights=noisy)
                grads = _backprop(trained, zs, acts, tb, cfg.loss, backward_weights=noisy)
            elif cfg.noise_mode == NOISE_AWARE:
                backend = CrossbarMlpBackend(
                    [
                        program(
                            layer.w,
                            cfg.aware_config_for_layer(li, layer.w, (epoch, b)),
                        )
                        for li, layer in enumerate(trained.layers)
                    ],
                    cfg.aware_read or ReadConfig(),
                )
                zs, acts = _forward_batch(trained, xb, backend=backend)
                grads = _backprop(trained, zs, acts, tb, cfg.loss)
            else:
                zs, acts = _forward_batch(trained, xb)
                grads = _backprop(trained, zs, acts, tb, cfg.loss)
            for layer, grad in zip(trained.layers, grads):
                layer.w -= cfg.eta * grad
        _, acts = _forward_batch(trained, x)
        epoch_loss = _loss_value(acts[-1], targets, cfg.loss)
        if not np.isfinite(epoch_loss):
            raise TrainingError(f"loss diverged to {epoch_loss} at epoch {epoch}")
        history.append(epoch_loss)
    return trained, history


def sensitivity(net: Mlp, batch, eta: float, loss: str | None = None):
    """Per-weight sensitivity: -eta times the backprop gradient of the batch-mean loss.

    The loss defaults to cross-entropy for softmax outputs and mse otherwise.
    """
    x, labels = batch
    x = as_matrix(x, "batch inputs")
    if x.shape[0] == 0:
        raise ParameterError("sensitivity batch is empty")
    if loss is None:
        loss = (
            LOSS_CROSS_ENTROPY if net.layers[-1].activation == SOFTMAX else LOSS_MSE
        )
    n_out = net.layers[-1].n_outputs
    targets = one_hot(labels, n_out) if np.asarray(labels).ndim == 1 else as_matrix(labels)
    grads = gradients(net, x, targets, loss)
    return [-eta * g for g in grads]


def ensemble_predict(members, x) -> np.ndarray:
    """Arithmetic mean of member outputs; members are (net, backend) pairs."""
    outputs = []
    for mi, (net, backend) in enumerate(members):
        out = forward(net, x, backend=backend, call_index=mi)
        if outputs and out.shape != outputs[0].shape:
            raise ShapeError("ensemble members disagree on the output dimension")
        outputs.append(out)
    return np.stack(outputs).mean(axis=0)


def evaluate(net: Mlp, x, labels, backend=None):
    """(accuracy, outputs) on a labeled batch, exact or crossbar-backed."""
    x = as_matrix(x, "inputs")
    _, acts = _forward_batch(net, x, backend=backend)
    outputs = acts[-1]
    predicted = outputs.argmax(axis=1)
    accuracy = float((predicted == np.asarray(labels)).mean())
    return accuracy, outputs
