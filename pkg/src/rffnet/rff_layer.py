"""One random-feature layer: frequency matrix, cos/sin map, optional batch norm.

A layer maps a batch (n x d_in) to (n x 2D): pre-activations f = x @ omega^T are
pushed through cos and sin and concatenated as [cos(f) | sin(f)], scaled by
sqrt(1/D) so every raw feature row has unit norm. Batch normalization, when
enabled, is applied after the trig map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ShapeError
from .numerics import Rng, as_matrix, gaussian_matrix


@dataclass
class BatchNormState:
    """Per-feature affine normalization with running statistics for inference."""

    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1
    epsilon: float = 1e-5

    @classmethod
    def identity(cls, width: int, momentum: float = 0.1, epsilon: float = 1e-5) -> "BatchNormState":
        return cls(
            gamma=np.ones(width),
            beta=np.zeros(width),
            running_mean=np.zeros(width),
            running_var=np.ones(width),
            momentum=momentum,
            epsilon=epsilon,
        )

    @property
    def width(self) -> int:
        return self.gamma.shape[0]


@dataclass
class BatchNormCache:
    x: np.ndarray
    x_hat: np.ndarray
    inv_std: np.ndarray
    training: bool


@dataclass
class RffLayer:
    """Frequency matrix omega of shape (D, d_in) plus optional batch-norm state."""

    omega: np.ndarray
    batchnorm: BatchNormState | None = None

    @property
    def D(self) -> int:
        return self.omega.shape[0]

    @property
    def d_in(self) -> int:
        return self.omega.shape[1]

    @property
    def d_out(self) -> int:
        return 2 * self.omega.shape[0]


@dataclass
class LayerCache:
    """Intermediates of one forward call, consumed by backward."""

    x: np.ndarray            # (batch, d_in)
    pre_activation: np.ndarray  # f = x @ omega^T, (batch, D)
    features: np.ndarray     # sqrt(1/D) [cos f | sin f], before batch norm
    output: np.ndarray       # after batch norm (== features when disabled)
    bn: BatchNormCache | None = None


@dataclass
class LayerGrads:
    omega: np.ndarray
    gamma: np.ndarray | None = None
    beta: np.ndarray | None = None


def init_layer(
    d_in: int,
    D: int,
    stddev: float,
    rng: Rng,
    batchnorm: bool = False,
    bn_momentum: float = 0.1,
    bn_epsilon: float = 1e-5,
) -> RffLayer:
    """Fresh layer with omega ~ N(0, stddev^2), i.e. an RBF-like spectral density."""
    if d_in < 1 or D < 1:
        raise ParameterError(f"layer dimensions must be positive, got d_in={d_in}, D={D}")
    if stddev <= 0:
        raise ParameterError(f"init stddev must be positive, got {stddev}")
    omega = gaussian_matrix(D, d_in, 0.0, stddev, rng)
    bn = BatchNormState.identity(2 * D, bn_momentum, bn_epsilon) if batchnorm else None
    return RffLayer(omega=omega, batchnorm=bn)


def batchnorm_forward(bn: BatchNormState, x: np.ndarray, training: bool):
    """Normalize per feature; training mode uses batch stats and updates the
    running averages in place, inference mode uses the running stats."""
    if x.shape[1] != bn.width:
        raise ShapeError(f"batch norm expects width {bn.width}, got {x.shape[1]}")
    if training:
        if x.shape[0] < 2:
            raise ParameterError("batch norm in training mode needs a batch of at least 2")
        mean = x.mean(axis=0)
        centered = x - mean
        var = np.mean(centered * centered, axis=0)
        inv_std = 1.0 / np.sqrt(var + bn.epsilon)
        x_hat = centered * inv_std
        bn.running_mean = (1.0 - bn.momentum) * bn.running_mean + bn.momentum * mean
        bn.running_var = (1.0 - bn.momentum) * bn.running_var + bn.momentum * var
    else:
        inv_std = 1.0 / np.sqrt(bn.running_var + bn.epsilon)
        x_hat = (x - bn.running_mean) * inv_std
    y = bn.gamma * x_hat + bn.beta
    return y, BatchNormCache(x=x, x_hat=x_hat, inv_std=inv_std, training=training)


def batchnorm_backward(bn: BatchNormState, cache: BatchNormCache, grad_y: np.ndarray):
    """Gradients w.r.t. input, gamma, beta for one batch-norm forward."""
    if grad_y.shape != cache.x.shape:
        raise ShapeError(f"batch norm grad shape {grad_y.shape} != input shape {cache.x.shape}")
    grad_gamma = np.sum(grad_y * cache.x_hat, axis=0)
    grad_beta = np.sum(grad_y, axis=0)
    grad_xhat = grad_y * bn.gamma
    if cache.training:
        n = cache.x.shape[0]
        grad_x = (
            cache.inv_std
            / n
            * (n * grad_xhat - np.sum(grad_xhat, axis=0) - cache.x_hat * np.sum(grad_xhat * cache.x_hat, axis=0))
        )
    else:
        grad_x = grad_xhat * cache.inv_std
    return grad_x, grad_gamma, grad_beta


def forward(layer: RffLayer, X, training: bool = False):
    """Apply the layer to a batch; returns (output, cache).

    Output rows are sqrt(1/D) [cos(f_1)..cos(f_D), sin(f_1)..sin(f_D)]; the
    cos-then-sin order pairs feature m with m+D and is relied on by backward.
    """
    X = as_matrix(X, "layer input")
    if X.shape[1] != layer.d_in:
        raise ShapeError(f"layer expects {layer.d_in} input columns, got {X.shape[1]}")
    f = X @ layer.omega.T
    D = layer.D
    features = np.empty((X.shape[0], 2 * D))
    np.cos(f, out=features[:, :D])
    np.sin(f, out=features[:, D:])
    features *= np.sqrt(1.0 / D)
    if layer.batchnorm is not None:
        output, bn_cache = batchnorm_forward(layer.batchnorm, features, training)
    else:
        output, bn_cache = features, None
    return output, LayerCache(x=X, pre_activation=f, features=features, output=output, bn=bn_cache)


def backward(layer: RffLayer, cache: LayerCache, grad_output):
    """Backpropagate through the layer; returns (LayerGrads, grad_input).

    grad_omega is summed over the batch. Derivatives of the trig pair are
    -sin(f) x for the cos branch and cos(f) x for the sin branch, carrying the
    same sqrt(1/D) scale as the forward map.
    """
    grad_output = as_matrix(grad_output, "grad_output")
    if grad_output.shape != cache.output.shape:
        raise ShapeError(f"grad_output shape {grad_output.shape} != layer output shape {cache.output.shape}")
    grad_gamma = grad_beta = None
    if layer.batchnorm is not None:
        grad_feats, grad_gamma, grad_beta = batchnorm_backward(layer.batchnorm, cache.bn, grad_output)
    else:
        grad_feats = grad_output
    D = layer.D
    gc = grad_feats[:, :D]
    gs = grad_feats[:, D:]
    # scale*sin(f) and scale*cos(f) are already in the cached features
    dF = gs * cache.features[:, :D] - gc * cache.features[:, D:]
    grad_omega = dF.T @ cache.x
    grad_input = dF @ layer.omega
    return LayerGrads(omega=grad_omega, gamma=grad_gamma, beta=grad_beta), grad_input
