"""Compact CNN for single-frame patch classification, trained from scratch.

Architecture: two 3x3 same-padding convolutions growing the channel
depth 1 -> 32 -> 64, ReLU after each, max pooling per the patch-size
preset, dropout after the conv block, one hidden fully connected ReLU
layer, dropout again, then the class logits.  Loss is softmax
cross-entropy; the optimizer is Adam with a reduce-on-plateau learning
rate schedule.

Everything runs in float64 through the `_kernels` backend (compiled or
numpy), which keeps training deterministic for a fixed seed and makes
the finite-difference gradient check meaningful.

Inputs are scaled by a fixed 1/800 (the device saturation bound), not
per-sample statistics, so absolute magnitude stays informative.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .._kernels import (
    conv2d_backward,
    conv2d_forward,
    maxpool2_backward,
    maxpool2_forward,
)

INPUT_SCALE = 1.0 / 800.0


@dataclass(frozen=True)
class CnnConfig:
    input_size: int = 8
    conv_channels: tuple = (32, 64)
    kernel_size: int = 3
    pools: tuple = (True, True)  # max-pool after each conv layer?
    dropout_conv: float = 0.25
    dropout_hidden: float = 0.5
    hidden_width: int = 128

    def __post_init__(self):
        if len(self.pools) != len(self.conv_channels):
            raise ValueError("pools must have one flag per conv layer")
        if self.hidden_width < 1 or any(c < 1 for c in self.conv_channels):
            raise ValueError("layer widths must be >= 1")
        for rate in (self.dropout_conv, self.dropout_hidden):
            if not 0.0 <= rate < 1.0:
                raise ValueError("dropout rates must be in [0, 1)")

    @classmethod
    def for_patch_size(cls, size: int) -> "CnnConfig":
        """Pooling presets by input size; 1x1 inputs get a plain MLP."""
        if size < 1:
            raise ValueError("patch size must be >= 1")
        if size == 1:
            return cls(input_size=1, conv_channels=(), pools=())
        if size <= 3:
            pools = (False, False)
        elif size <= 6:
            pools = (True, False)
        else:
            pools = (True, True)
        return cls(input_size=size, pools=pools)

    def flat_features(self) -> int:
        side = self.input_size
        for pool in self.pools:
            if pool:
                side //= 2
        channels = self.conv_channels[-1] if self.conv_channels else 1
        if side < 1:
            raise ValueError("too much pooling for this input size")
        return side * side * channels


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 16
    learning_rate: float = 1e-3
    scheduler_factor: float = 0.5
    scheduler_patience: int = 5
    folds: int = 5
    frames_per_region: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.folds < 1:
            raise ValueError("epochs, batch size and folds must be >= 1")
        if not 0 < self.scheduler_factor <= 1:
            raise ValueError("scheduler factor must be in (0, 1]")


class Conv2D:
    def __init__(self, in_ch, out_ch, kernel, rng):
        fan_in = in_ch * kernel * kernel
        self.w = rng.normal(0.0, np.sqrt(2.0 / fan_in), (out_ch, in_ch, kernel, kernel))
        self.b = np.zeros(out_ch)
        self.pad = kernel // 2
        self._x = None
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)

    def forward(self, x, train, rng):
        self._x = x
        return conv2d_forward(x, self.w, self.b, self.pad)

    def backward(self, dy):
        dx, self.dw, self.db = conv2d_backward(self._x, self.w, dy, self.pad)
        return dx

    def params(self):
        return [(self.w, self.dw, "w"), (self.b, self.db, "b")]

    def set_param(self, name, value):
        setattr(self, name, value)


class Dense:
    def __init__(self, n_in, n_out, rng):
        self.w = rng.normal(0.0, np.sqrt(2.0 / n_in), (n_in, n_out))
        self.b = np.zeros(n_out)
        self._x = None
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)

    def forward(self, x, train, rng):
        self._x = x
        return x @ self.w + self.b

    def backward(self, dy):
        self.dw = self._x.T @ dy
        self.db = dy.sum(axis=0)
        return dy @ self.w.T

    def params(self):
        return [(self.w, self.dw, "w"), (self.b, self.db, "b")]

    def set_param(self, name, value):
        setattr(self, name, value)


class ReLU:
    def forward(self, x, train, rng):
        self._mask = x > 0
        return x * self._mask

    def backward(self, dy):
        return dy * self._mask

    def params(self):
        return []


class MaxPool2:
    def forward(self, x, train, rng):
        self._shape = x.shape
        y, self._idx = maxpool2_forward(x)
        return y

    def backward(self, dy):
        return maxpool2_backward(dy, self._idx, self._shape[2], self._shape[3])

    def params(self):
        return []


class Dropout:
    """Inverted dropout; identity when evaluating or when rate is 0."""

    def __init__(self, rate):
        self.rate = rate
        self._mask = None

    def forward(self, x, train, rng):
        if not train or self.rate == 0.0:
            self._mask = None
            return x
        keep = 1.0 - self.rate
        self._mask = (rng.random(x.shape) < keep) / keep
        return x * self._mask

    def backward(self, dy):
        return dy if self._mask is None else dy * self._mask

    def params(self):
        return []


class Flatten:
    def forward(self, x, train, rng):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy):
        return dy.reshape(self._shape)

    def params(self):
        return []


def softmax_cross_entropy(logits, labels):
    """Mean loss over the batch and its gradient w.r.t. the logits."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    expd = np.exp(shifted)
    probs = expd / expd.sum(axis=1, keepdims=True)
    n = logits.shape[0]
    loss = -np.log(probs[np.arange(n), labels] + 1e-300).mean()
    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    return loss, dlogits / n


class CnnModel:
    """Layer stack with the bookkeeping train/predict/gradcheck need."""

    def __init__(self, config: CnnConfig, classes, seed: int = 0):
        self.config = config
        self.classes = tuple(classes)
        if len(self.classes) < 2:
            raise ValueError("need at least 2 classes")
        rng = np.random.default_rng(seed)
        self.layers = []
        in_ch = 1
        for channels, pool in zip(config.conv_channels, config.pools):
            self.layers.append(Conv2D(in_ch, channels, config.kernel_size, rng))
            self.layers.append(ReLU())
            if pool:
                self.layers.append(MaxPool2())
            in_ch = channels
        if config.conv_channels:
            self.layers.append(Dropout(config.dropout_conv))
        self.layers.append(Flatten())
        self.layers.append(Dense(config.flat_features(), config.hidden_width, rng))
        self.layers.append(ReLU())
        self.layers.append(Dropout(config.dropout_hidden))
        self.layers.append(Dense(config.hidden_width, len(self.classes), rng))
        self.history = {"epoch_loss": [], "lr": []}

    def forward(self, x, train=False, rng=None):
        out = np.ascontiguousarray(x, dtype=np.float64) * INPUT_SCALE
        for layer in self.layers:
            out = layer.forward(out, train, rng)
        return out

    def backward(self, dlogits):
        grad = dlogits
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def loss_on(self, x, labels, train=False, rng=None):
        logits = self.forward(x, train=train, rng=rng)
        loss, dlogits = softmax_cross_entropy(logits, labels)
        return loss, dlogits

    def predict_logits(self, x, batch: int = 256):
        parts = [self.forward(x[i : i + batch]) for i in range(0, len(x), batch)]
        return np.concatenate(parts) if parts else np.zeros((0, len(self.classes)))

    def predict(self, x):
        return self.predict_logits(x).argmax(axis=1)

    def predict_labels(self, x):
        return [self.classes[i] for i in self.predict(x)]

    def parameters(self):
        """[(layer, attr name, array), ...] for every trainable tensor."""
        out = []
        for layer in self.layers:
            for value, _, name in layer.params():
                out.append((layer, name, value))
        return out

    def gradients(self):
        out = []
        for layer in self.layers:
            for _, grad, name in layer.params():
                out.append(grad)
        return out


class Adam:
    def __init__(self, model: CnnModel, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.model = model
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p) for _, _, p in model.parameters()]
        self.v = [np.zeros_like(p) for _, _, p in model.parameters()]

    def step(self):
        self.t += 1
        params = self.model.parameters()
        grads = self.model.gradients()
        for i, ((layer, name, value), grad) in enumerate(zip(params, grads)):
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * grad
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * grad**2
            mhat = self.m[i] / (1 - self.beta1**self.t)
            vhat = self.v[i] / (1 - self.beta2**self.t)
            layer.set_param(name, value - self.lr * mhat / (np.sqrt(vhat) + self.eps))


class ReduceLROnPlateau:
    """Halve (by `factor`) the learning rate after `patience` stale epochs."""

    def __init__(self, optimizer: Adam, factor: float, patience: int):
        self.optimizer = optimizer
        self.factor = factor
        self.patience = patience
        self.best = np.inf
        self.stale = 0

    def update(self, monitored_loss: float):
        if monitored_loss < self.best - 1e-8:
            self.best = monitored_loss
            self.stale = 0
        else:
            self.stale += 1
            if self.stale > self.patience:
                self.optimizer.lr *= self.factor
                self.stale = 0


def train_cnn(x, labels, classes, cnn_config: CnnConfig, train_config: TrainConfig,
              validation=None) -> CnnModel:
    """Train on (x, integer labels); returns the fitted model.

    x has shape (N, 1, S, S) in raw device units.  The plateau
    scheduler monitors validation loss when a (x_val, y_val) pair is
    given, training loss otherwise.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(x) != len(labels) or len(x) < train_config.batch_size:
        raise ValueError("need at least one full batch of samples")
    if len(np.unique(labels)) < 2:
        raise ValueError("degenerate dataset: fewer than 2 classes present")
    model = CnnModel(cnn_config, classes, seed=train_config.seed)
    rng = np.random.default_rng(train_config.seed + 1)
    optimizer = Adam(model, train_config.learning_rate)
    scheduler = ReduceLROnPlateau(
        optimizer, train_config.scheduler_factor, train_config.scheduler_patience
    )
    n = len(x)
    for _ in range(train_config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        batches = 0
        for start in range(0, n, train_config.batch_size):
            idx = order[start : start + train_config.batch_size]
            loss, dlogits = model.loss_on(x[idx], labels[idx], train=True, rng=rng)
            model.backward(dlogits)
            optimizer.step()
            epoch_loss += loss
            batches += 1
        epoch_loss /= batches
        if validation is not None:
            x_val, y_val = validation
            monitored, _ = model.loss_on(x_val, np.asarray(y_val, dtype=np.int64))
        else:
            monitored = epoch_loss
        scheduler.update(monitored)
        model.history["epoch_loss"].append(epoch_loss)
        model.history["lr"].append(optimizer.lr)
    return model


def _selection_signature(model: CnnModel) -> tuple:
    """Hash of the ReLU masks and pool argmaxes from the last forward."""
    sig = []
    for layer in model.layers:
        if isinstance(layer, ReLU):
            sig.append(layer._mask.tobytes())
        elif isinstance(layer, MaxPool2):
            sig.append(layer._idx.tobytes())
    return tuple(sig)


def gradient_check(model: CnnModel, x, labels, n_params: int = 120, seed: int = 0):
    """Max relative error between analytic and central-difference gradients.

    Dropout is bypassed (eval-mode loss) so the loss is a deterministic
    function of the parameters.  Parameters are sampled from every
    trainable tensor.  The loss is piecewise smooth: where the +-h
    probes land on different ReLU/pool selections the true function has
    a kink and central differences estimate nothing, so those draws are
    skipped and replaced (standard practice for checking ReLU nets).
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    _, dlogits = model.loss_on(x, labels)
    model.backward(dlogits)
    params = model.parameters()
    grads = model.gradients()
    rng = np.random.default_rng(seed)

    candidates = []
    for tensor_index, (_, _, value) in enumerate(params):
        take = min(3 * max(1, n_params // len(params)), value.size)
        for j in rng.choice(value.size, size=take, replace=False):
            candidates.append((tensor_index, int(j)))
    rng.shuffle(candidates)

    worst = 0.0
    checked = 0
    for tensor_index, j in candidates:
        if checked >= n_params:
            break
        _, _, value = params[tensor_index]
        flat = value.ravel()
        gflat = grads[tensor_index].ravel()
        theta = flat[j]
        h = 1e-4 * max(1.0, abs(theta))
        losses = {}
        signatures = set()
        for mult in (1, -1, 2, -2):
            flat[j] = theta + mult * h
            losses[mult], _ = model.loss_on(x, labels)
            signatures.add(_selection_signature(model))
        flat[j] = theta
        if len(signatures) > 1:
            continue
        # fourth-order central difference: truncation and roundoff both
        # stay far below the gradients being checked
        fd = (8 * (losses[1] - losses[-1]) - (losses[2] - losses[-2])) / (12 * h)
        rel = abs(fd - gflat[j]) / max(abs(fd), abs(gflat[j]), 1e-7)
        worst = max(worst, rel)
        checked += 1
    if checked < n_params:
        raise ValueError(f"only {checked}/{n_params} parameters were smoothly checkable")
    return worst


MODEL_FORMAT_VERSION = 1


def save_model(model: CnnModel, path) -> None:
    """Parameter dump with a JSON architecture header (npz container)."""
    header = {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": "cnn",
        "classes": list(model.classes),
        "config": {
            "input_size": model.config.input_size,
            "conv_channels": list(model.config.conv_channels),
            "kernel_size": model.config.kernel_size,
            "pools": list(model.config.pools),
            "dropout_conv": model.config.dropout_conv,
            "dropout_hidden": model.config.dropout_hidden,
            "hidden_width": model.config.hidden_width,
        },
    }
    arrays = {"header": np.array(json.dumps(header, sort_keys=True))}
    for i, (_, name, value) in enumerate(model.parameters()):
        arrays[f"param_{i}_{name}"] = value
    np.savez(path, **arrays)


def load_model(path) -> CnnModel:
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        if header.get("format_version") != MODEL_FORMAT_VERSION or header.get("kind") != "cnn":
            raise ValueError(f"{path}: not a version-{MODEL_FORMAT_VERSION} cnn model file")
        cfg = header["config"]
        config = CnnConfig(
            input_size=cfg["input_size"],
            conv_channels=tuple(cfg["conv_channels"]),
            kernel_size=cfg["kernel_size"],
            pools=tuple(cfg["pools"]),
            dropout_conv=cfg["dropout_conv"],
            dropout_hidden=cfg["dropout_hidden"],
            hidden_width=cfg["hidden_width"],
        )
        model = CnnModel(config, header["classes"])
        for i, (layer, name, value) in enumerate(model.parameters()):
            stored = data[f"param_{i}_{name}"]
            if stored.shape != value.shape:
                raise ValueError(f"{path}: parameter {i} shape mismatch")
            layer.set_param(name, stored)
    return model
