"""Adam training over the packed real view of the parameters.

Every parameter array, complex included, is updated through a float view of
its memory, so the optimizer itself is oblivious to the complex structure:
a complex weight is simply two real numbers that happen to produce packed
gradients. Weight decay is the coupled L2 form, adding 2*lambda*w to the
gradient of every block.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..rng import keyed_rng
from . import layers as L
from .network import NetworkParams, NetworkSpec, backward, forward, init_params


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 100
    learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    shuffle: bool = True
    verbose: bool = False

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if not (self.learning_rate > 0):
            raise ValueError("learning_rate must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")


def _real_view(v: np.ndarray) -> np.ndarray:
    if v.dtype == np.complex64:
        return v.view(np.float32)
    if v.dtype == np.complex128:
        return v.view(np.float64)
    return v


@dataclass
class AdamState:
    m: list[dict[str, np.ndarray]]
    v: list[dict[str, np.ndarray]]
    t: int = 0

    @classmethod
    def for_params(cls, params: NetworkParams) -> "AdamState":
        m = [{k: np.zeros_like(_real_view(p)) for k, p in block.items()} for block in params]
        v = [{k: np.zeros_like(_real_view(p)) for k, p in block.items()} for block in params]
        return cls(m=m, v=v)


def adam_step(
    params: NetworkParams,
    grads: list[dict[str, np.ndarray]],
    state: AdamState,
    config: TrainConfig,
) -> None:
    """One in-place Adam update with bias correction.

    Weight decay is not applied here; it reaches the parameters through the
    loss gradient that loss_and_grads produces.
    """
    state.t += 1
    c1 = 1.0 - config.beta1**state.t
    c2 = 1.0 - config.beta2**state.t
    for block, gblock, mblock, vblock in zip(params, grads, state.m, state.v):
        for name, w in block.items():
            wv = _real_view(w)
            g = _real_view(gblock[name]).astype(wv.dtype, copy=False)
            m, v = mblock[name], vblock[name]
            m *= config.beta1
            m += (1.0 - config.beta1) * g
            v *= config.beta2
            v += (1.0 - config.beta2) * g * g
            wv -= config.learning_rate * (m / c1) / (np.sqrt(v / c2) + config.eps)


def _decay_term(params: NetworkParams, weight_decay: float) -> float:
    if not weight_decay:
        return 0.0
    total = 0.0
    for block in params:
        for w in block.values():
            wv = _real_view(w)
            total += float(np.sum(wv.astype(np.float64) ** 2))
    return weight_decay * total


def loss_and_grads(
    spec: NetworkSpec,
    params: NetworkParams,
    x: np.ndarray,
    y: np.ndarray,
    weight_decay: float = 0.0,
    dropout_rng: np.random.Generator | None = None,
):
    """Forward to the logits, fused softmax cross entropy, full backward.

    Returns (data_loss, objective, probs, grads). The objective adds the
    coupled L2 term lambda * sum(w^2) over every parameter block and the
    returned gradients include its 2*lambda*w contribution, so they are the
    exact gradient of the objective.
    """
    n_layers = len(spec.layers)
    until = n_layers - 1 if isinstance(spec.layers[-1], L.Softmax) else n_layers
    logits, caches = forward(spec, params, x, train=True, dropout_rng=dropout_rng, until=until)
    probs, data_loss, dlogits = L.softmax_xent(logits, np.asarray(y))
    grads = backward(spec, params, caches, dlogits, until=until)
    if weight_decay:
        for block, gblock in zip(params, grads):
            for name, w in block.items():
                gblock[name] = gblock[name] + 2.0 * weight_decay * w
    return data_loss, data_loss + _decay_term(params, weight_decay), probs, grads


def train(
    spec: NetworkSpec,
    x: np.ndarray,
    y: np.ndarray,
    config: TrainConfig,
    x_val: np.ndarray | None = None,
    y_val: np.ndarray | None = None,
    dtype: str = "float32",
    params: NetworkParams | None = None,
) -> tuple[NetworkParams, list[dict]]:
    """Run the full loop and return (params, per-epoch history rows).

    Initialization, shuffling and dropout each draw from their own stream
    keyed by config.seed, so (spec, data, config) fixes the result bit for
    bit in single-threaded execution.
    """
    y = np.asarray(y)
    n = x.shape[0]
    if y.shape != (n,):
        raise ValueError("one label per input required")
    if params is None:
        params = init_params(spec, config.seed, dtype=dtype)
    state = AdamState.for_params(params)
    shuffle_rng = keyed_rng(config.seed, "train-shuffle")
    dropout_rng = keyed_rng(config.seed, "dropout")
    history: list[dict] = []
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n) if config.shuffle else np.arange(n)
        loss_sum = 0.0
        hit_sum = 0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            xb, yb = x[idx], y[idx]
            data_loss, _, probs, grads = loss_and_grads(
                spec, params, xb, yb, config.weight_decay, dropout_rng
            )
            adam_step(params, grads, state, config)
            loss_sum += data_loss * len(idx)
            hit_sum += int(np.sum(np.argmax(probs, axis=1) == yb))
        row = {"epoch": epoch, "loss": loss_sum / n, "train_acc": hit_sum / n}
        if x_val is not None and y_val is not None:
            val_loss, val_acc = evaluate(spec, params, x_val, y_val, config.batch_size)
            row["val_loss"] = val_loss
            row["val_acc"] = val_acc
        history.append(row)
        if config.verbose:
            msg = f"epoch {epoch:3d}  loss {row['loss']:.4f}  acc {row['train_acc']:.4f}"
            if "val_acc" in row:
                msg += f"  val_acc {row['val_acc']:.4f}"
            print(msg, flush=True)
    return params, history


def predict_proba(
    spec: NetworkSpec, params: NetworkParams, x: np.ndarray, batch_size: int = 200
) -> np.ndarray:
    """Class probabilities in eval mode (dropout off)."""
    out = []
    for start in range(0, x.shape[0], batch_size):
        probs, _ = forward(spec, params, x[start : start + batch_size], train=False)
        out.append(probs)
    return np.concatenate(out, axis=0)


def evaluate(
    spec: NetworkSpec, params: NetworkParams, x: np.ndarray, y: np.ndarray, batch_size: int = 200
) -> tuple[float, float]:
    """(mean cross entropy, accuracy) on a labeled set."""
    y = np.asarray(y)
    probs = predict_proba(spec, params, x, batch_size)
    picked = np.maximum(probs[np.arange(len(y)), y], np.finfo(np.float64).tiny)
    loss = float(-np.mean(np.log(picked)))
    acc = float(np.mean(np.argmax(probs, axis=1) == y))
    return loss, acc
