"""Loss, reverse-mode gradients, Adam and the training loop."""

from __future__ import annotations

import math
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Optional

import numpy as np

from . import checkpoint
from .cells import TENSOR_NAMES, ErnnParams, activation_grad, forward_sequence
from .data import SequenceDataset
from .linalg import DimensionError


class DivergenceError(ArithmeticError):
    """Raised when a loss or gradient becomes non-finite."""


def softmax_cross_entropy(logits, label: int):
    """Return ``(loss, dlogits)`` for one sample, stabilized by max-subtraction."""
    logits = np.asarray(logits, dtype=np.float64)
    if not 0 <= label < logits.shape[-1]:
        raise ValueError(f"label {label} out of range for {logits.shape[-1]} classes")
    z = logits - logits.max()
    log_norm = math.log(np.exp(z).sum())
    p = np.exp(z - log_norm)
    grad = p.copy()
    grad[label] -= 1.0
    return float(log_norm - z[label]), grad


def batch_softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Per-sample losses ``(B,)`` and their logit gradients ``(B, C)``."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= logits.shape[1]):
        raise ValueError("label out of range")
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(logits.shape[0])
    losses = log_norm - z[rows, labels]
    grad = np.exp(z - log_norm[:, None])
    grad[rows, labels] -= 1.0
    return losses, grad


@dataclass
class GradientSet:
    U: np.ndarray
    V: np.ndarray
    W: np.ndarray
    b: np.ndarray
    eta: np.ndarray
    cw: np.ndarray
    cb: np.ndarray

    @classmethod
    def zeros_like(cls, params: ErnnParams) -> "GradientSet":
        return cls(**{name: np.zeros_like(getattr(params, name)) for name in TENSOR_NAMES})

    def items(self):
        return [(name, getattr(self, name)) for name in TENSOR_NAMES]

    def global_norm(self) -> float:
        return math.sqrt(sum(float(np.sum(g * g)) for _, g in self.items()))

    def scaled(self, factor: float) -> "GradientSet":
        return GradientSet(**{name: g * factor for name, g in self.items()})

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(g)) for _, g in self.items())


def backward(params: ErnnParams, tape, dlogits) -> GradientSet:
    """Reverse accumulation through the classifier and all T*K inner steps.

    ``dlogits`` has the same batch layout as the forward call that produced
    ``tape``; gradients are summed over the batch. Tensors a cell does not
    read get zero gradients.
    """
    dlogits = np.asarray(dlogits, dtype=np.float64)
    if dlogits.ndim == 1:
        dlogits = dlogits[None]
    T, K = tape.shape
    B = tape.x.shape[0]
    if (T, K) != params.eta.shape or tape.inner.shape[-1] != params.n:
        raise DimensionError(
            f"tape shape {(T, K)} x n={tape.inner.shape[-1]} does not match params "
            f"{params.eta.shape} x n={params.n}"
        )
    if dlogits.shape != (B, params.C):
        raise DimensionError(f"dlogits has shape {dlogits.shape}, expected {(B, params.C)}")

    grads = GradientSet.zeros_like(params)
    kind = params.cell_kind
    act = params.activation
    U, V = params.U, params.V
    x = tape.x

    h_T = tape.inner[T - 1, K]
    grads.cw = dlogits.T @ h_T
    grads.cb = dlogits.sum(axis=0)
    dh = dlogits @ params.cw

    for t in range(T - 1, -1, -1):
        x_t = x[:, t]
        h_prev = tape.inner[t, 0]
        if kind == "vanilla_rnn":
            dg = dh * activation_grad(act, tape.pre[t, 0], tape.act[t, 0])
            grads.V += dg.T @ h_prev
            grads.W += dg.T @ x_t
            grads.b += dg.sum(axis=0)
            dh = dg @ V
            continue

        dc = np.zeros_like(dh) if kind == "ernn_toy" else None
        for k in range(K - 1, -1, -1):
            eta = params.eta[t, k]
            h_in = tape.inner[t, k]
            s = tape.act[t, k]
            grads.eta[t, k] = np.sum(dh * (s - h_in))
            dg = (eta * dh) * activation_grad(act, tape.pre[t, k], s)
            if kind == "ernn_toy":
                dc += dg
                dh = (1.0 - eta) * dh + dg
            else:
                a = tape.aff[t, k]
                if kind == "ernn_exemplar":
                    grads.U += dg.T @ a
                    da = dg + dg @ U
                else:
                    da = dg
                grads.V += da.T @ h_in
                grads.W += da.T @ x_t
                grads.b += da.sum(axis=0)
                dh = (1.0 - eta) * dh + da @ V
        if kind == "ernn_toy":
            grads.V += dc.T @ h_prev
            grads.W += dc.T @ x_t
            grads.b += dc.sum(axis=0)
            dh = dh + dc @ V
    return grads


def loss_and_grad(params: ErnnParams, X, y):
    """Mean cross-entropy over the batch and its gradient."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    _, logits, tape = forward_sequence(params, X)
    losses, dlogits = batch_softmax_cross_entropy(logits, y)
    B = X.shape[0]
    grads = backward(params, tape, dlogits / B)
    return float(losses.mean()), grads


def sample_loss(params: ErnnParams, x_seq, label: int) -> float:
    _, logits, _ = forward_sequence(params, x_seq)
    return softmax_cross_entropy(logits, label)[0]


def finite_diff_gradcheck(params: ErnnParams, sample, eps: float = 1e-5) -> float:
    """Largest relative disagreement between :func:`backward` and central differences.

    Every coordinate of every tensor the cell reads is perturbed. The error
    per coordinate is ``|a - f| / max(1e-8, |a| + |f|)``.
    """
    if not 1e-7 <= eps <= 1e-4:
        raise ValueError("eps must lie in [1e-7, 1e-4]")
    x_seq, label = sample
    _, logits, tape = forward_sequence(params, x_seq)
    _, dlogits = softmax_cross_entropy(logits, label)
    analytic = backward(params, tape, dlogits)

    worst = 0.0
    for name in params.used_tensors:
        base = getattr(params, name)
        a_grad = getattr(analytic, name)
        for idx in np.ndindex(base.shape):
            plus = base.copy()
            minus = base.copy()
            plus[idx] += eps
            minus[idx] -= eps
            lp = sample_loss(params.replace(**{name: plus}), x_seq, label)
            lm = sample_loss(params.replace(**{name: minus}), x_seq, label)
            f = (lp - lm) / (2.0 * eps)
            a = float(a_grad[idx])
            err = abs(a - f) / max(1e-8, abs(a) + abs(f))
            worst = max(worst, err)
    return worst


@dataclass
class AdamState:
    m: dict
    v: dict
    step: int = 0

    @classmethod
    def zeros_like(cls, params: ErnnParams) -> "AdamState":
        return cls(
            m={name: np.zeros_like(getattr(params, name)) for name in TENSOR_NAMES},
            v={name: np.zeros_like(getattr(params, name)) for name in TENSOR_NAMES},
        )


def adam_step(
    params: ErnnParams,
    grads: GradientSet,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> ErnnParams:
    """Bias-corrected Adam update; returns new params and advances ``state`` in place.

    Only tensors the cell reads are updated, so a FastRNN's ``U`` stays 0.
    """
    if not grads.is_finite():
        raise DivergenceError(f"non-finite gradient at Adam step {state.step + 1}")
    state.step += 1
    t = state.step
    updated = {}
    for name in params.used_tensors:
        g = getattr(grads, name)
        m = state.m[name] = beta1 * state.m[name] + (1.0 - beta1) * g
        v = state.v[name] = beta2 * state.v[name] + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        new = getattr(params, name) - lr * m_hat / (np.sqrt(v_hat) + eps)
        if not np.all(np.isfinite(new)):
            raise DivergenceError(f"non-finite {name} after Adam step {t}")
        updated[name] = new
    return params.replace(**updated)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-2
    batch_size: int = 128
    epochs: int = 100
    lr_half_period: int = 50
    seed: int = 0
    K: int = 1
    hidden_dim: int = 10
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    clip_norm: Optional[float] = None
    checkpoint_cap: int = 300
    checkpoint_dir: Optional[str] = None

    def __post_init__(self):
        for name in ("learning_rate", "batch_size", "lr_half_period", "K", "hidden_dim"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive")

    def lr_at(self, epoch: int) -> float:
        return self.learning_rate * 0.5 ** (epoch // self.lr_half_period)

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> list:
        return [f.name for f in fields(cls)]


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float
    test_acc: float
    wall_ms: float


class CheckpointStore:
    """Per-epoch parameter snapshots, keeping at most ``cap`` in memory.

    Older snapshots are written to ``spill_dir`` (a fresh temporary directory
    when not given) and reloaded on access.
    """

    def __init__(self, cap: int = 300, spill_dir: Optional[str] = None):
        self.cap = cap
        self.spill_dir = spill_dir
        self._items: list = []

    def append(self, params: ErnnParams) -> None:
        self._items.append(params)
        in_memory = [i for i, item in enumerate(self._items) if isinstance(item, ErnnParams)]
        if len(in_memory) > self.cap:
            oldest = in_memory[0]
            if self.spill_dir is None:
                self.spill_dir = tempfile.mkdtemp(prefix="ernn-ckpt-")
            os.makedirs(self.spill_dir, exist_ok=True)
            path = os.path.join(self.spill_dir, f"epoch_{oldest:05d}.ckpt")
            checkpoint.save(self._items[oldest], path)
            self._items[oldest] = path

    def __len__(self) -> int:
        return len(self._items)

    def __getitem__(self, i: int) -> ErnnParams:
        item = self._items[i]
        return item if isinstance(item, ErnnParams) else checkpoint.load(item)

    def __iter__(self):
        return (self[i] for i in range(len(self)))


@dataclass
class TrainResult:
    params: ErnnParams
    records: list = field(default_factory=list)
    checkpoints: CheckpointStore = field(default_factory=CheckpointStore)
    diverged_epoch: Optional[int] = None

    @property
    def loss_trace(self) -> list:
        return [r.train_loss for r in self.records]


def train(
    params: ErnnParams,
    dataset: SequenceDataset,
    config: TrainConfig,
    eval_dataset: Optional[SequenceDataset] = None,
    on_epoch: Optional[Callable[[EpochRecord], None]] = None,
) -> TrainResult:
    """Mini-batch Adam on mean cross-entropy with periodic LR halving.

    Epoch ``e`` (0-based) uses ``lr0 * 2**-(e // lr_half_period)``. Samples
    are reshuffled every epoch from ``config.seed``. A non-finite loss or
    gradient stops training; ``diverged_epoch`` then names the epoch and the
    returned params are those from before the failing step.
    """
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    if dataset.seq_len != params.T or dataset.feature_dim != params.d:
        raise DimensionError(
            f"dataset (T={dataset.seq_len}, d={dataset.feature_dim}) does not match "
            f"model (T={params.T}, d={params.d})"
        )
    if dataset.class_count > params.C:
        raise DimensionError(f"dataset has {dataset.class_count} classes, model {params.C}")

    rng = np.random.default_rng(config.seed)
    state = AdamState.zeros_like(params)
    result = TrainResult(
        params, checkpoints=CheckpointStore(config.checkpoint_cap, config.checkpoint_dir)
    )
    X, y = dataset.sequences, dataset.labels
    N = len(dataset)

    for epoch in range(config.epochs):
        start = time.perf_counter()
        lr = config.lr_at(epoch)
        order = rng.permutation(N)
        total = 0.0
        try:
            for lo in range(0, N, config.batch_size):
                idx = order[lo : lo + config.batch_size]
                loss, grads = loss_and_grad(params, X[idx], y[idx])
                if not math.isfinite(loss):
                    raise DivergenceError(f"non-finite loss in epoch {epoch}")
                if config.clip_norm is not None:
                    norm = grads.global_norm()
                    if norm > config.clip_norm:
                        grads = grads.scaled(config.clip_norm / norm)
                params = adam_step(
                    params, grads, state, lr,
                    config.adam_beta1, config.adam_beta2, config.adam_eps,
                )
                total += loss * idx.size
        except DivergenceError:
            result.params = params
            result.diverged_epoch = epoch
            return result
        acc = evaluate(params, eval_dataset) if eval_dataset is not None else float("nan")
        record = EpochRecord(
            epoch, lr, total / N, acc, (time.perf_counter() - start) * 1000.0
        )
        result.records.append(record)
        result.checkpoints.append(params)
        result.params = params
        if on_epoch is not None:
            on_epoch(record)
    return result


def predict_logits(params: ErnnParams, X, chunk: int = 1024) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    out = [forward_sequence(params, X[lo : lo + chunk])[1] for lo in range(0, X.shape[0], chunk)]
    return np.concatenate(out) if out else np.zeros((0, params.C))


def evaluate(params: ErnnParams, dataset: SequenceDataset) -> float:
    """Fraction of samples whose argmax logit (lowest index on ties) equals the label."""
    if len(dataset) == 0:
        return float("nan")
    logits = predict_logits(params, dataset.sequences)
    return float(np.mean(np.argmax(logits, axis=1) == dataset.labels))
