"""Stacked random-feature layers with a linear readout: losses and full backprop.

The readout produces one logit column per class (one-vs-all margin targets for
the squared-hinge loss, one-hot targets for the squared loss, softmax for cross
entropy). A manually built network may instead carry a single score column for
binary margin classification; predict then thresholds at zero.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParameterError, ShapeError
from .numerics import Rng, as_matrix, gaussian_matrix
from .rff_layer import BatchNormState, LayerCache, LayerGrads, RffLayer, backward, forward, init_layer

LOSS_KINDS = ("squared", "squared_hinge", "cross_entropy")


@dataclass
class Network:
    layers: list[RffLayer]
    readout_w: np.ndarray  # (out_dim, 2 * D_last)
    readout_b: np.ndarray  # (out_dim,)
    loss_kind: str
    class_count: int

    @property
    def out_dim(self) -> int:
        return self.readout_w.shape[0]

    @property
    def d_in(self) -> int:
        return self.layers[0].d_in


@dataclass
class ForwardTrace:
    caches: list[LayerCache]
    logits: np.ndarray


@dataclass
class LossReport:
    data_loss: float
    reg_loss: float
    total: float
    correct_count: int


@dataclass
class Gradients:
    layers: list[LayerGrads]
    readout_w: np.ndarray
    readout_b: np.ndarray


def default_layer_count(n_samples: int) -> int:
    """Suggested depth for a training set of n samples: ceil(n/1000) + 1."""
    if n_samples < 1:
        raise ParameterError(f"n_samples must be >= 1, got {n_samples}")
    return math.ceil(n_samples / 1000) + 1


def build_network(
    d_in: int,
    n_classes: int,
    layer_count: int,
    D_per_layer: list[int],
    loss_kind: str,
    rng: Rng,
    batch_norm: bool = False,
    omega_stddev: float = 0.1,
    readout_stddev: float = 0.1,
    bn_momentum: float = 0.1,
    bn_epsilon: float = 1e-5,
) -> Network:
    """Chain layer_count layers (widths from D_per_layer) plus a linear readout."""
    if loss_kind not in LOSS_KINDS:
        raise ParameterError(f"unknown loss kind {loss_kind!r}, expected one of {LOSS_KINDS}")
    if layer_count < 1:
        raise ParameterError(f"layer_count must be >= 1, got {layer_count}")
    if len(D_per_layer) != layer_count:
        raise ParameterError(f"expected {layer_count} layer widths, got {len(D_per_layer)}")
    if n_classes < 2:
        raise ParameterError(f"need at least 2 classes, got {n_classes}")
    layers = []
    dim = d_in
    for D in D_per_layer:
        layers.append(init_layer(dim, D, omega_stddev, rng, batchnorm=batch_norm,
                                 bn_momentum=bn_momentum, bn_epsilon=bn_epsilon))
        dim = 2 * D
    readout_w = gaussian_matrix(n_classes, dim, 0.0, readout_stddev, rng)
    readout_b = np.zeros(n_classes)
    return Network(layers=layers, readout_w=readout_w, readout_b=readout_b,
                   loss_kind=loss_kind, class_count=n_classes)


def forward_full(net: Network, X, training: bool = False) -> ForwardTrace:
    """Run every layer and the readout; caches all layer intermediates."""
    h = as_matrix(X, "network input")
    caches = []
    for layer in net.layers:
        h, cache = forward(layer, h, training=training)
        caches.append(cache)
    logits = h @ net.readout_w.T + net.readout_b
    return ForwardTrace(caches=caches, logits=logits)


def parameters(net: Network) -> list[np.ndarray]:
    """All trainable arrays in declared order: per layer omega (+ gamma, beta), then readout."""
    params = []
    for layer in net.layers:
        params.append(layer.omega)
        if layer.batchnorm is not None:
            params.append(layer.batchnorm.gamma)
            params.append(layer.batchnorm.beta)
    params.append(net.readout_w)
    params.append(net.readout_b)
    return params


def gradient_list(net: Network, grads: Gradients) -> list[np.ndarray]:
    """Gradient arrays in the same order as parameters(net)."""
    out = []
    for layer, g in zip(net.layers, grads.layers):
        out.append(g.omega)
        if layer.batchnorm is not None:
            out.append(g.gamma)
            out.append(g.beta)
    out.append(grads.readout_w)
    out.append(grads.readout_b)
    return out


def _validate_labels(y, n: int, class_count: int) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (n,):
        raise ShapeError(f"labels must have shape ({n},), got {y.shape}")
    if not np.issubdtype(y.dtype, np.integer):
        raise DataError(f"labels must be integers, got dtype {y.dtype}")
    if y.size and (y.min() < 0 or y.max() >= class_count):
        raise DataError(f"labels must lie in [0, {class_count}), got range [{y.min()}, {y.max()}]")
    return y.astype(np.int64)


def predict_from_logits(logits: np.ndarray) -> np.ndarray:
    """Argmax per row (ties to the lowest index); sign rule for a single score column."""
    if logits.shape[1] == 1:
        return (logits[:, 0] > 0).astype(np.int64)
    return np.argmax(logits, axis=1).astype(np.int64)


def compute_loss(net: Network, logits, y, lam: float):
    """Mean data loss, L2 penalty over all trainable parameters, and d(data_loss)/d(logits)."""
    logits = as_matrix(logits, "logits")
    n = logits.shape[0]
    y = _validate_labels(y, n, net.class_count)
    if net.loss_kind == "squared":
        targets = _targets(net, y, n)
        diff = logits - targets
        data_loss = float(np.sum(diff * diff)) / n
        grad_logits = 2.0 * diff / n
    elif net.loss_kind == "squared_hinge":
        targets = _targets(net, y, n)  # +1/-1 margins
        slack = np.maximum(0.0, 1.0 - targets * logits)
        data_loss = float(np.sum(slack * slack)) / n
        grad_logits = -2.0 * targets * slack / n
    elif net.loss_kind == "cross_entropy":
        if logits.shape[1] < 2:
            raise ParameterError("cross entropy needs one logit column per class")
        shifted = logits - logits.max(axis=1, keepdims=True)
        expd = np.exp(shifted)
        probs = expd / expd.sum(axis=1, keepdims=True)
        data_loss = float(-np.mean(np.log(probs[np.arange(n), y] + 1e-300)))
        grad_logits = probs.copy()
        grad_logits[np.arange(n), y] -= 1.0
        grad_logits /= n
    else:
        raise ParameterError(f"unknown loss kind {net.loss_kind!r}")
    reg_loss = 0.5 * lam * sum(float(np.sum(p * p)) for p in parameters(net))
    correct = int(np.sum(predict_from_logits(logits) == y))
    report = LossReport(data_loss=data_loss, reg_loss=reg_loss,
                        total=data_loss + reg_loss, correct_count=correct)
    return report, grad_logits


def _targets(net: Network, y: np.ndarray, n: int) -> np.ndarray:
    """One-hot targets (squared) or +1/-1 margins (squared hinge), matching out_dim."""
    if net.out_dim == 1:
        if net.class_count != 2:
            raise ParameterError("single-column readout requires exactly 2 classes")
        t = np.where(y == 1, 1.0, -1.0)[:, None]
        return t
    if net.out_dim != net.class_count:
        raise ShapeError(f"readout has {net.out_dim} outputs for {net.class_count} classes")
    onehot = np.zeros((n, net.class_count))
    onehot[np.arange(n), y] = 1.0
    if net.loss_kind == "squared_hinge":
        return 2.0 * onehot - 1.0
    return onehot


def backward_full(net: Network, trace: ForwardTrace, grad_logits, lam: float) -> Gradients:
    """Chain rule through readout and every layer; adds lam * p to each gradient."""
    grad_logits = as_matrix(grad_logits, "grad_logits")
    if grad_logits.shape != trace.logits.shape:
        raise ShapeError(f"grad_logits shape {grad_logits.shape} != logits shape {trace.logits.shape}")
    if len(trace.caches) != len(net.layers):
        raise ShapeError("trace does not match network depth")
    s_last = trace.caches[-1].output
    grad_w = grad_logits.T @ s_last + lam * net.readout_w
    grad_b = grad_logits.sum(axis=0) + lam * net.readout_b
    g = grad_logits @ net.readout_w
    layer_grads: list[LayerGrads] = [None] * len(net.layers)
    for i in range(len(net.layers) - 1, -1, -1):
        lg, g = backward(net.layers[i], trace.caches[i], g)
        lg.omega += lam * net.layers[i].omega
        if net.layers[i].batchnorm is not None:
            lg.gamma += lam * net.layers[i].batchnorm.gamma
            lg.beta += lam * net.layers[i].batchnorm.beta
        layer_grads[i] = lg
    return Gradients(layers=layer_grads, readout_w=grad_w, readout_b=grad_b)


def predict(net: Network, X) -> np.ndarray:
    """Class labels for a batch, inference mode."""
    return predict_from_logits(forward_full(net, X, training=False).logits)


def accuracy(net: Network, X, y) -> float:
    y = np.asarray(y)
    return float(np.mean(predict(net, X) == y))


# --- serialization ---------------------------------------------------------
#
# Flat binary snapshot: a magic line, a JSON header line describing shapes in
# declared order, then raw little-endian float64 blobs. Round-trips are
# bit-exact. An optional preprocessing section stores per-column (shift, div)
# stages so a snapshot can be evaluated directly on raw data.

_MAGIC = b"RFFNET1\n"


def save_network(net: Network, path, preprocess=None, label_names=None) -> None:
    layers_meta = []
    blobs: list[np.ndarray] = []
    for layer in net.layers:
        meta = {"d_in": layer.d_in, "D": layer.D, "batchnorm": None}
        blobs.append(layer.omega)
        if layer.batchnorm is not None:
            bn = layer.batchnorm
            meta["batchnorm"] = {"momentum": bn.momentum, "epsilon": bn.epsilon}
            blobs.extend([bn.gamma, bn.beta, bn.running_mean, bn.running_var])
        layers_meta.append(meta)
    blobs.extend([net.readout_w, net.readout_b])
    header = {
        "loss_kind": net.loss_kind,
        "class_count": net.class_count,
        "out_dim": net.out_dim,
        "layers": layers_meta,
        "preprocess_dim": None,
        "preprocess_stages": 0,
        "label_names": list(label_names) if label_names is not None else None,
    }
    if preprocess:
        header["preprocess_stages"] = len(preprocess)
        header["preprocess_dim"] = int(np.asarray(preprocess[0][0]).shape[0])
        for shift, div in preprocess:
            blobs.extend([np.asarray(shift, dtype=np.float64), np.asarray(div, dtype=np.float64)])
    payload = _MAGIC + json.dumps(header, sort_keys=True).encode() + b"\n"
    payload += b"".join(np.ascontiguousarray(b, dtype="<f8").tobytes() for b in blobs)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def load_network(path):
    """Returns (net, preprocess_stages, label_names); inverse of save_network."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(_MAGIC):
        raise DataError(f"{path} is not a network snapshot")
    header_end = blob.index(b"\n", len(_MAGIC))
    header = json.loads(blob[len(_MAGIC):header_end])
    data = np.frombuffer(blob[header_end + 1:], dtype="<f8")
    pos = 0

    def take(*shape):
        nonlocal pos
        count = int(np.prod(shape))
        arr = data[pos:pos + count].reshape(shape).copy()
        if arr.size != count:
            raise DataError(f"{path}: snapshot truncated")
        pos += count
        return arr

    layers = []
    for meta in header["layers"]:
        omega = take(meta["D"], meta["d_in"])
        bn = None
        if meta["batchnorm"] is not None:
            width = 2 * meta["D"]
            bn = BatchNormState(
                gamma=take(width), beta=take(width),
                running_mean=take(width), running_var=take(width),
                momentum=meta["batchnorm"]["momentum"],
                epsilon=meta["batchnorm"]["epsilon"],
            )
        layers.append(RffLayer(omega=omega, batchnorm=bn))
    out_dim = header["out_dim"]
    readout_w = take(out_dim, 2 * header["layers"][-1]["D"])
    readout_b = take(out_dim)
    stages = []
    for _ in range(header["preprocess_stages"]):
        d = header["preprocess_dim"]
        stages.append((take(d), take(d)))
    net = Network(layers=layers, readout_w=readout_w, readout_b=readout_b,
                  loss_kind=header["loss_kind"], class_count=header["class_count"])
    return net, stages, header["label_names"]
