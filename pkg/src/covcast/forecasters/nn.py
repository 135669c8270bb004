"""LSTM substrate shared by the forecasting backends.

A stack of LSTM layers is stored as a flat dict of named float64 arrays:
``l{k}.W`` (hidden x 4*hidden recurrent weights), ``l{k}.U`` (input x
4*hidden input weights) and ``l{k}.b`` (4*hidden biases), with the four
gates fused along the last axis in the order forget / input / output /
candidate; ``gate_views`` exposes the per-gate blocks (W_f, U_f, b_f, ...)
as writable slices. Model heads add their own ``head.*`` entries.

The cell update is the standard ``c_t = f_t * c_{t-1} + i1_t * i2_t`` with
``h_t = tanh(c_t) * o_t`` and zero initial state. Everything is plain
numpy: forward, full backpropagation through time, ADAM, and a
deterministic mini-batch training loop. Gradients are exact (finite
differences agree to float precision) and identical seeds reproduce
bitwise-identical weights.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import expit as sigmoid

from ..errors import InsufficientHistoryError, TrainingDivergedError

GATES = ("f", "i", "o", "g")  # order of the fused blocks


def gate_views(
    weights: dict[str, np.ndarray], layer: int, gate: str
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Writable (W, U, b) views of one gate's block in the fused arrays."""
    pos = GATES.index(gate)
    h = weights[f"l{layer}.W"].shape[0]
    sel = slice(pos * h, (pos + 1) * h)
    return (
        weights[f"l{layer}.W"][:, sel],
        weights[f"l{layer}.U"][:, sel],
        weights[f"l{layer}.b"][sel],
    )


def init_stack_weights(
    rng: np.random.Generator, input_dim: int, layers: tuple[int, ...]
) -> dict[str, np.ndarray]:
    """Gate weights uniform within +-1/sqrt(fan_in); biases zero.

    Draw order is fixed (layers outward, recurrent before input weights)
    so a given seed always produces the same network.
    """
    weights: dict[str, np.ndarray] = {}
    d_in = input_dim
    for k, h in enumerate(layers):
        weights[f"l{k}.W"] = rng.uniform(-1, 1, size=(h, 4 * h)) / np.sqrt(h)
        weights[f"l{k}.U"] = rng.uniform(-1, 1, size=(d_in, 4 * h)) / np.sqrt(d_in)
        weights[f"l{k}.b"] = np.zeros(4 * h)
        d_in = h
    return weights


def linear_head_weights(
    rng: np.random.Generator, in_dim: int, out_dim: int
) -> tuple[np.ndarray, np.ndarray]:
    """A dense output map with the same +-1/sqrt(fan_in) convention."""
    return rng.uniform(-1, 1, size=(in_dim, out_dim)) / np.sqrt(in_dim), np.zeros(out_dim)


def stack_forward(
    weights: dict[str, np.ndarray],
    layers: tuple[int, ...],
    x: np.ndarray,
    need_cache: bool = False,
):
    """Run the stack over ``x`` of shape (batch, steps, input_dim).

    Returns the final hidden state of the top layer, shape (batch, H_top),
    plus the per-layer activation cache when requested by the backward pass.
    """
    b, t, _ = x.shape
    cache = []
    inputs = x
    for k, h in enumerate(layers):
        w, u, bias = weights[f"l{k}.W"], weights[f"l{k}.U"], weights[f"l{k}.b"]
        # Input contributions for every step in one matmul; only the
        # recurrent part stays inside the sequential loop.
        pre_x = inputs.reshape(b * t, -1) @ u + bias
        pre_x = pre_x.reshape(b, t, 4 * h)
        gates = np.empty((b, t, 4 * h))
        c_s = np.empty((b, t, h))
        tc_s = np.empty((b, t, h))
        h_s = np.empty((b, t, h))
        h_prev = np.zeros((b, h))
        c_prev = np.zeros((b, h))
        for step in range(t):
            pre = pre_x[:, step] + h_prev @ w
            act = gates[:, step]
            act[:, : 3 * h] = sigmoid(pre[:, : 3 * h])
            act[:, 3 * h :] = np.tanh(pre[:, 3 * h :])
            f, i1, o, i2 = (
                act[:, :h], act[:, h : 2 * h], act[:, 2 * h : 3 * h], act[:, 3 * h :]
            )
            c_prev = f * c_prev + i1 * i2
            tc = np.tanh(c_prev)
            h_prev = tc * o
            c_s[:, step] = c_prev
            tc_s[:, step] = tc
            h_s[:, step] = h_prev
        if need_cache:
            cache.append({"x": inputs, "gates": gates, "c": c_s, "tc": tc_s, "h": h_s})
        inputs = h_s
    h_last = inputs[:, -1]
    return (h_last, cache) if need_cache else (h_last, None)


def _layer_backward(
    weights: dict[str, np.ndarray],
    k: int,
    cache: dict[str, np.ndarray],
    d_h_ext: np.ndarray,
    grads: dict[str, np.ndarray],
) -> np.ndarray:
    """BPTT through one layer; returns gradients w.r.t. its inputs."""
    x, gates, c_s, tc_s, h_s = (
        cache["x"], cache["gates"], cache["c"], cache["tc"], cache["h"]
    )
    b, t, h = h_s.shape
    w, u = weights[f"l{k}.W"], weights[f"l{k}.U"]
    d_pre = np.empty((b, t, 4 * h))
    d_h_carry = np.zeros((b, h))
    d_c_carry = np.zeros((b, h))
    for step in range(t - 1, -1, -1):
        act = gates[:, step]
        f, i1, o, i2 = (
            act[:, :h], act[:, h : 2 * h], act[:, 2 * h : 3 * h], act[:, 3 * h :]
        )
        tc = tc_s[:, step]
        d_h = d_h_ext[:, step] + d_h_carry
        d_c = d_c_carry + d_h * o * (1.0 - tc * tc)
        c_prev = c_s[:, step - 1] if step > 0 else 0.0
        dp = d_pre[:, step]
        dp[:, :h] = d_c * c_prev * f * (1.0 - f)
        dp[:, h : 2 * h] = d_c * i2 * i1 * (1.0 - i1)
        dp[:, 2 * h : 3 * h] = d_h * tc * o * (1.0 - o)
        dp[:, 3 * h :] = d_c * i1 * (1.0 - i2 * i2)
        d_c_carry = d_c * f
        d_h_carry = dp @ w.T
    # Weight gradients batch over steps: pair each step's d_pre with the
    # previous hidden state (zero at step 0) and the step's input.
    h_shift = np.concatenate([np.zeros((b, 1, h)), h_s[:, :-1]], axis=1)
    flat_dp = d_pre.reshape(b * t, 4 * h)
    grads[f"l{k}.W"] += h_shift.reshape(b * t, h).T @ flat_dp
    grads[f"l{k}.U"] += x.reshape(b * t, -1).T @ flat_dp
    grads[f"l{k}.b"] += flat_dp.sum(axis=0)
    return (flat_dp @ u.T).reshape(b, t, -1)


def stack_backward(
    weights: dict[str, np.ndarray],
    layers: tuple[int, ...],
    cache: list[dict[str, np.ndarray]],
    d_h_last: np.ndarray,
) -> dict[str, np.ndarray]:
    """Gradients of every gate weight given the loss gradient at h_T."""
    grads = {
        name: np.zeros_like(arr)
        for name, arr in weights.items()
        if name.startswith("l")
    }
    top = len(layers) - 1
    d_h_ext = np.zeros_like(cache[top]["h"])
    d_h_ext[:, -1] = d_h_last
    for k in range(top, -1, -1):
        d_x = _layer_backward(weights, k, cache[k], d_h_ext, grads)
        if k > 0:
            d_h_ext = d_x
    return grads


@dataclass
class Adam:
    """Standard ADAM with bias correction, keyed by parameter name."""

    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    _m: dict = field(default_factory=dict)
    _v: dict = field(default_factory=dict)
    _t: int = 0

    def step(self, weights: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self._t += 1
        for name, g in grads.items():
            m = self._m.setdefault(name, np.zeros_like(g))
            v = self._v.setdefault(name, np.zeros_like(g))
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            m_hat = m / (1.0 - self.beta1**self._t)
            v_hat = v / (1.0 - self.beta2**self._t)
            weights[name] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass(frozen=True)
class TrainConfig:
    """Shared training knobs for the neural backends.

    ``validation_len`` targets at the end of the series are held out and
    scored once per epoch; backtests set it to twice the covariance window.
    """

    epochs: int = 150
    learning_rate: float = 0.01
    batch_size: int = 8
    seq_len: int = 15
    hidden: tuple[int, ...] = (20,)
    seed: int = 0
    validation_len: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.seq_len < 1 or self.batch_size < 1:
            raise ValueError("epochs, seq_len and batch_size must be >= 1")
        if not self.hidden or any(h < 1 for h in self.hidden):
            raise ValueError("hidden layer sizes must be >= 1")


@dataclass(frozen=True)
class ProbConfig:
    """Extra knobs for the probabilistic backends.

    ``scaling`` divides each series by (1 + mean |value|) over the training
    range; ``copula`` and ``low_rank``/``rank`` only apply to the
    copula-process model. Forecasts are medians over ``mc_samples`` draws.
    """

    scaling: bool = True
    copula: bool = True
    low_rank: bool = True
    rank: int = 2
    mc_samples: int = 100

    def __post_init__(self):
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be >= 1")
        if self.rank < 0:
            raise ValueError("rank must be >= 0")


def sliding_windows(values: np.ndarray, seq_len: int) -> tuple[np.ndarray, np.ndarray]:
    """All (input window, next row) pairs of a series, oldest first."""
    v = np.asarray(values, dtype=float)
    n = v.shape[0] - seq_len
    if n < 1:
        raise InsufficientHistoryError(
            f"series of {v.shape[0]} rows is too short for seq_len {seq_len}"
        )
    x = np.stack([v[i : i + seq_len] for i in range(n)])
    return x, v[seq_len:]


def fit_network(
    weights: dict[str, np.ndarray],
    layers: tuple[int, ...],
    inputs: np.ndarray,
    targets: np.ndarray,
    cfg: TrainConfig,
    rng: np.random.Generator,
    loss_fn: Callable,
    prepare: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> tuple[list[float], list[float]]:
    """Mini-batch ADAM training of the stack plus a model-specific head.

    ``loss_fn(weights, h_last, y, want_grads)`` returns the mean per-window
    loss and, when asked, the gradient at ``h_last`` together with head
    gradients. ``prepare`` reshapes a window batch before it enters the
    stack (the copula-process model flattens series into the batch axis).
    Returns per-epoch training and validation loss curves.
    """
    n = inputs.shape[0]
    n_train = n - cfg.validation_len
    if n_train < 1:
        raise InsufficientHistoryError(
            f"{n} windows cannot hold out {cfg.validation_len} for validation"
        )
    x_train, y_train = inputs[:n_train], targets[:n_train]
    x_val, y_val = inputs[n_train:], targets[n_train:]
    prepare = prepare if prepare is not None else (lambda a: a)

    adam = Adam(lr=cfg.learning_rate)
    train_curve: list[float] = []
    val_curve: list[float] = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n_train)
        total = 0.0
        for start in range(0, n_train, cfg.batch_size):
            pick = order[start : start + cfg.batch_size]
            h_last, cache = stack_forward(weights, layers, prepare(x_train[pick]), True)
            loss, d_h_last, head_grads = loss_fn(weights, h_last, y_train[pick], True)
            if not np.isfinite(loss):
                raise TrainingDivergedError("training loss became non-finite")
            grads = stack_backward(weights, layers, cache, d_h_last)
            grads.update(head_grads)
            adam.step(weights, grads)
            total += loss * len(pick)
        train_curve.append(total / n_train)
        if len(x_val):
            h_last, _ = stack_forward(weights, layers, prepare(x_val))
            val_loss, _, _ = loss_fn(weights, h_last, y_val, False)
            if not np.isfinite(val_loss):
                raise TrainingDivergedError("validation loss became non-finite")
            val_curve.append(float(val_loss))
    return train_curve, val_curve


def save_weights(path, weights: dict[str, np.ndarray]) -> None:
    """Dump trained parameters keyed by name (numpy .npz archive)."""
    np.savez(path, **weights)


def load_weights(path) -> dict[str, np.ndarray]:
    with np.load(path) as archive:
        return {name: archive[name] for name in archive.files}
