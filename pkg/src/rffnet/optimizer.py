"""Adam / SGD updates and the minibatch training loop."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, NumericError, ParameterError, ShapeError
from .network import (
    Network,
    backward_full,
    compute_loss,
    forward_full,
    gradient_list,
    parameters,
    predict_from_logits,
)
from .numerics import Rng


@dataclass
class AdamState:
    """First/second moment accumulators, one pair per parameter array."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params, lr: float = 1e-3, beta1: float = 0.9,
                   beta2: float = 0.999, epsilon: float = 1e-8) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params],
                   lr=lr, beta1=beta1, beta2=beta2, epsilon=epsilon)


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState) -> None:
    """One bias-corrected Adam update, applied to the parameter arrays in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError(f"parameter/gradient/state counts differ: {len(params)}/{len(grads)}/{len(state.m)}")
    state.step += 1
    t = state.step
    # theta -= lr * (m / bc1) / (sqrt(v / bc2) + eps), with scalars hoisted
    alpha = state.lr / (1.0 - state.beta1**t)
    root_bc2 = 1.0 / np.sqrt(1.0 - state.beta2**t)
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= alpha * m / (np.sqrt(v) * root_bc2 + state.epsilon)


def sgd_step(params: list[np.ndarray], grads: list[np.ndarray], lr: float) -> None:
    """Plain gradient descent step, in place."""
    if len(params) != len(grads):
        raise ShapeError(f"parameter/gradient counts differ: {len(params)}/{len(grads)}")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        p -= lr * g


@dataclass
class TrainConfig:
    epochs: int = 300
    batch_size: int | None = None  # None = full batch
    reg_lambda: float = 1e-4
    seed: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    lr_schedule: tuple = ()  # ((epoch, lr), ...) applied from that epoch on
    shuffle: bool = True
    optimizer: str = "adam"  # or "sgd"


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    loss: float
    reg_loss: float
    train_acc: float
    val_acc: float | None = None


@dataclass
class TrainingLog:
    records: list[EpochRecord] = field(default_factory=list)

    def to_csv_text(self) -> str:
        lines = ["epoch,lr,loss,reg_loss,train_acc,val_acc"]
        for r in self.records:
            val = "" if r.val_acc is None else repr(r.val_acc)
            lines.append(f"{r.epoch},{r.lr!r},{r.loss!r},{r.reg_loss!r},{r.train_acc!r},{val}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv_text(cls, text: str) -> "TrainingLog":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        records = []
        for ln in lines[1:]:
            epoch, lr, loss, reg, tacc, vacc = ln.split(",")
            records.append(EpochRecord(int(epoch), float(lr), float(loss), float(reg),
                                       float(tacc), float(vacc) if vacc else None))
        return cls(records=records)


def _epoch_lr(config: TrainConfig, epoch: int) -> float:
    lr = config.lr
    for ep, val in sorted(config.lr_schedule):
        if epoch >= ep:
            lr = val
    return lr


def _batch_slices(n: int, batch_size: int, merge_singleton: bool):
    starts = list(range(0, n, batch_size))
    slices = [(s, min(s + batch_size, n)) for s in starts]
    # a trailing batch of one sample breaks batch-norm statistics; fold it back
    if merge_singleton and len(slices) > 1 and slices[-1][1] - slices[-1][0] == 1:
        last = slices.pop()
        prev = slices.pop()
        slices.append((prev[0], last[1]))
    return slices


def _evaluate(net: Network, X, y, lam: float):
    trace = forward_full(net, X, training=False)
    report, _ = compute_loss(net, trace.logits, y, lam)
    acc = float(np.mean(predict_from_logits(trace.logits) == np.asarray(y)))
    return report, acc


def fit(net: Network, X, y, config: TrainConfig, X_val=None, y_val=None) -> TrainingLog:
    """Train with shuffled minibatches; logs post-epoch loss and accuracies.

    Shuffling for epoch e depends only on (config.seed, e), so two runs with the
    same seed and data produce bit-identical logs and final parameters.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    n = X.shape[0]
    if n == 0:
        raise DataError("cannot fit on an empty dataset")
    has_bn = any(layer.batchnorm is not None for layer in net.layers)
    batch_size = config.batch_size if config.batch_size is not None else n
    if batch_size < 1:
        raise ParameterError(f"batch_size must be >= 1, got {batch_size}")
    if has_bn and min(batch_size, n) < 2:
        raise ParameterError("batch norm requires batches of at least 2 samples")
    if config.optimizer not in ("adam", "sgd"):
        raise ParameterError(f"unknown optimizer {config.optimizer!r}")
    params = parameters(net)
    state = AdamState.for_params(params, lr=config.lr, beta1=config.beta1,
                                 beta2=config.beta2, epsilon=config.epsilon)
    log = TrainingLog()
    base_rng = Rng(config.seed)
    for epoch in range(config.epochs):
        lr = _epoch_lr(config, epoch)
        state.lr = lr
        if config.shuffle:
            order = base_rng.derive("shuffle", epoch).permutation(n)
        else:
            order = np.arange(n)
        for lo, hi in _batch_slices(n, batch_size, merge_singleton=has_bn):
            idx = order[lo:hi]
            trace = forward_full(net, X[idx], training=True)
            _, grad_logits = compute_loss(net, trace.logits, y[idx], config.reg_lambda)
            grads = backward_full(net, trace, grad_logits, config.reg_lambda)
            if config.optimizer == "adam":
                adam_step(params, gradient_list(net, grads), state)
            else:
                sgd_step(params, gradient_list(net, grads), lr)
        for p in params:
            if not np.all(np.isfinite(p)):
                raise NumericError(f"non-finite parameter after epoch {epoch}")
        report, train_acc = _evaluate(net, X, y, config.reg_lambda)
        val_acc = None
        if X_val is not None:
            _, val_acc = _evaluate(net, X_val, y_val, config.reg_lambda)
        log.records.append(EpochRecord(epoch=epoch, lr=lr, loss=report.total,
                                       reg_loss=report.reg_loss, train_acc=train_acc,
                                       val_acc=val_acc))
    return log
