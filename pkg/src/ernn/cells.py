"""Recurrent cells: vanilla RNN, toy ERNN, exemplar ERNN and FastRNN.

All state arrays use a row-vector convention with an optional leading batch
axis: a hidden state is ``(n,)`` for one sample or ``(B, n)`` for a batch,
and ``V h`` is computed as ``h @ V.T``. The same kernels serve both shapes.

Inner steps follow the residual blend

    h^(k) = (1 - eta_t^(k)) h^(k-1) + eta_t^(k) phi(h^(k-1)),   h^(0) = h_{t-1}

where ``phi`` is

* ``ernn_toy``:      tanh(h^(k-1) + V h_{t-1} + W x_t + b)
* ``ernn_exemplar``: act((I + U)(V h^(k-1) + W x_t + b))
* ``fastrnn``:       the exemplar with U fixed at 0 and K = 1.

``vanilla_rnn`` ignores ``eta`` and computes act(V h_{t-1} + W x_t + b).
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .linalg import DimensionError

CELL_KINDS = ("vanilla_rnn", "ernn_toy", "ernn_exemplar", "fastrnn")
ACTIVATIONS = ("tanh", "relu")
TENSOR_NAMES = ("U", "V", "W", "b", "eta", "cw", "cb")

DEFAULT_ACTIVATION = {
    "vanilla_rnn": "tanh",
    "ernn_toy": "tanh",
    "ernn_exemplar": "relu",
    "fastrnn": "relu",
}

# Tensors each cell reads; the rest stay at their initial value.
USED_TENSORS = {
    "vanilla_rnn": ("V", "W", "b", "cw", "cb"),
    "ernn_toy": ("V", "W", "b", "eta", "cw", "cb"),
    "ernn_exemplar": ("U", "V", "W", "b", "eta", "cw", "cb"),
    "fastrnn": ("V", "W", "b", "eta", "cw", "cb"),
}


def activate(kind: str, g: np.ndarray) -> np.ndarray:
    if kind == "tanh":
        return np.tanh(g)
    if kind == "relu":
        return np.maximum(g, 0.0)
    raise ValueError(f"unknown activation {kind!r}")


def activation_grad(kind: str, g: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Derivative of the activation at ``g`` given its output ``s``."""
    if kind == "tanh":
        return 1.0 - s * s
    if kind == "relu":
        return (g > 0.0).astype(np.float64)
    raise ValueError(f"unknown activation {kind!r}")


@dataclass(frozen=True)
class ErnnParams:
    U: np.ndarray
    V: np.ndarray
    W: np.ndarray
    b: np.ndarray
    eta: np.ndarray
    cw: np.ndarray
    cb: np.ndarray
    activation: str = "tanh"
    cell_kind: str = "ernn_toy"

    def __post_init__(self):
        for name in TENSOR_NAMES:
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        if self.cell_kind not in CELL_KINDS:
            raise ValueError(f"unknown cell kind {self.cell_kind!r}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        n = self.b.shape[0] if self.b.ndim == 1 else -1
        expected = {
            "U": (n, n),
            "V": (n, n),
            "W": (n, self.W.shape[-1] if self.W.ndim == 2 else -1),
            "b": (n,),
            "cb": (self.cb.shape[0] if self.cb.ndim == 1 else -1,),
        }
        expected["cw"] = (expected["cb"][0], n)
        for name, shape in expected.items():
            arr = getattr(self, name)
            if arr.shape != shape or min(shape) < 0:
                raise DimensionError(f"{name} has shape {arr.shape}, expected {shape}")
        if self.eta.ndim != 2 or min(self.eta.shape) < 1:
            raise DimensionError(f"eta must be a (T, K) matrix, got {self.eta.shape}")
        for name in TENSOR_NAMES:
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite entries")
        if self.cell_kind == "fastrnn":
            if self.K != 1:
                raise ValueError(f"fastrnn requires K == 1, got K = {self.K}")
            if np.any(self.U != 0.0):
                raise ValueError("fastrnn requires U == 0")
        if self.cell_kind == "vanilla_rnn" and self.K != 1:
            raise ValueError(f"vanilla_rnn has no inner steps; K must be 1, got {self.K}")

    @property
    def n(self) -> int:
        return self.b.shape[0]

    @property
    def d(self) -> int:
        return self.W.shape[1]

    @property
    def T(self) -> int:
        return self.eta.shape[0]

    @property
    def K(self) -> int:
        return self.eta.shape[1]

    @property
    def C(self) -> int:
        return self.cb.shape[0]

    def tensors(self) -> dict:
        return {name: getattr(self, name) for name in TENSOR_NAMES}

    @property
    def used_tensors(self) -> tuple:
        return USED_TENSORS[self.cell_kind]

    def parameter_count(self, include_eta: bool = True) -> int:
        return sum(
            getattr(self, name).size
            for name in self.used_tensors
            if include_eta or name != "eta"
        )

    def replace(self, **changes) -> "ErnnParams":
        kwargs = {f.name: getattr(self, f.name) for f in fields(self)}
        kwargs.update(changes)
        return ErnnParams(**kwargs)

    def copy(self) -> "ErnnParams":
        return self.replace(**{name: getattr(self, name).copy() for name in TENSOR_NAMES})


def init_params(
    cell_kind: str,
    n: int,
    d: int,
    T: int,
    K: int = 1,
    C: int = 2,
    activation: Optional[str] = None,
    seed: int = 0,
    eta0: float = 1e-2,
) -> ErnnParams:
    """Fan-in uniform init in ``[-1/sqrt(n), 1/sqrt(n)]``; zero biases; ``eta = eta0``.

    ``U`` is drawn only for ``ernn_exemplar`` and is zero otherwise.
    """
    if cell_kind not in CELL_KINDS:
        raise ValueError(f"unknown cell kind {cell_kind!r}")
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(n)
    U = rng.uniform(-bound, bound, (n, n))
    V = rng.uniform(-bound, bound, (n, n))
    W = rng.uniform(-bound, bound, (n, d))
    cw = rng.uniform(-bound, bound, (C, n))
    if cell_kind != "ernn_exemplar":
        U = np.zeros((n, n))
    return ErnnParams(
        U=U,
        V=V,
        W=W,
        b=np.zeros(n),
        eta=np.full((T, K), float(eta0)),
        cw=cw,
        cb=np.zeros(C),
        activation=activation or DEFAULT_ACTIVATION[cell_kind],
        cell_kind=cell_kind,
    )


@dataclass
class StepRecord:
    """Intermediates of one timestep.

    ``inner`` stacks h^(0..K); ``pre`` and ``act`` stack g^(k) and act(g^(k))
    for k = 1..K; ``aff`` holds the affine drive feeding each inner step
    (the ``(I+U)`` input for the exemplar, the constant offset for the toy).
    """

    inner: np.ndarray
    pre: np.ndarray
    act: np.ndarray
    aff: np.ndarray


def _check_step_inputs(params: ErnnParams, h_prev, x):
    h_prev = np.asarray(h_prev, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if h_prev.shape[-1] != params.n:
        raise DimensionError(f"h_prev has {h_prev.shape[-1]} entries, expected {params.n}")
    if x.shape[-1] != params.d:
        raise DimensionError(f"x has {x.shape[-1]} entries, expected {params.d}")
    if h_prev.shape[:-1] != x.shape[:-1]:
        raise DimensionError(f"batch shapes differ: {h_prev.shape} vs {x.shape}")
    return h_prev, x


def _check_k(params: ErnnParams, k_steps: Optional[int]) -> None:
    if k_steps is not None and k_steps != params.K:
        raise ValueError(f"k_steps={k_steps} does not match params K={params.K}")


def _drive(params: ErnnParams, x: np.ndarray) -> np.ndarray:
    return x @ params.W.T + params.b


def _rnn_kernel(params, h_prev, drive):
    g = h_prev @ params.V.T + drive
    s = activate(params.activation, g)
    return s, StepRecord(np.stack([h_prev, s]), g[None], s[None], g[None])


def _toy_kernel(params, h_prev, drive, t):
    c = h_prev @ params.V.T + drive
    inner, pre, act = [h_prev], [], []
    h = h_prev
    for k in range(params.K):
        eta = params.eta[t, k]
        g = h + c
        s = activate(params.activation, g)
        h = (1.0 - eta) * h + eta * s
        inner.append(h)
        pre.append(g)
        act.append(s)
    return h, StepRecord(np.stack(inner), np.stack(pre), np.stack(act), c[None])


def _exemplar_kernel(params, h_prev, drive, t):
    inner, pre, act, aff = [h_prev], [], [], []
    h = h_prev
    for k in range(params.K):
        eta = params.eta[t, k]
        a = h @ params.V.T + drive
        g = a + a @ params.U.T
        s = activate(params.activation, g)
        h = (1.0 - eta) * h + eta * s
        inner.append(h)
        pre.append(g)
        act.append(s)
        aff.append(a)
    return h, StepRecord(np.stack(inner), np.stack(pre), np.stack(act), np.stack(aff))


def rnn_step(params: ErnnParams, h_prev, x) -> np.ndarray:
    """One vanilla step ``act(V h_prev + W x + b)``."""
    h_prev, x = _check_step_inputs(params, h_prev, x)
    return _rnn_kernel(params, h_prev, _drive(params, x))[0]


def ernn_toy_step(params: ErnnParams, h_prev, x, t: int = 0, k_steps: Optional[int] = None):
    """K residual steps towards the fixed point of ``h = tanh(h + V h_prev + W x + b)``.

    Returns ``(h^(K), StepRecord)``; ``t`` selects the row of ``eta``.
    """
    _check_k(params, k_steps)
    h_prev, x = _check_step_inputs(params, h_prev, x)
    return _toy_kernel(params, h_prev, _drive(params, x), t)


def ernn_exemplar_step(
    params: ErnnParams, h_prev, x, t: int = 0, k_steps: Optional[int] = None
):
    """K residual steps with ``phi(h) = act((I + U)(V h + W x + b))``.

    Returns ``(h^(K), StepRecord)``.
    """
    _check_k(params, k_steps)
    h_prev, x = _check_step_inputs(params, h_prev, x)
    return _exemplar_kernel(params, h_prev, _drive(params, x), t)


def fastrnn_step(params: ErnnParams, h_prev, x, t: int = 0) -> np.ndarray:
    """``(1 - eta) h_prev + eta act(V h_prev + W x + b)``: the exemplar with U = 0, K = 1."""
    if params.cell_kind != "fastrnn":
        raise ValueError(f"fastrnn_step needs a fastrnn cell, got {params.cell_kind}")
    return ernn_exemplar_step(params, h_prev, x, t)[0]


@dataclass
class ForwardTape:
    """Everything the backward pass needs.

    Shapes carry a batch axis ``B`` (1 for a single sequence):
    ``x`` (B, T, d); ``inner`` (T, K+1, B, n) with ``inner[t, 0]`` the state
    entering step t; ``pre``/``act``/``aff`` (T, K, B, n) (``aff`` is
    (T, 1, B, n) for the toy and vanilla cells).
    """

    x: np.ndarray
    inner: np.ndarray
    pre: np.ndarray
    act: np.ndarray
    aff: np.ndarray

    @property
    def states(self) -> np.ndarray:
        """Hidden states h_1..h_T, shape (T, B, n)."""
        return self.inner[:, -1]

    @property
    def shape(self) -> tuple:
        return self.pre.shape[:2]


def forward_sequence(params: ErnnParams, x_seq):
    """Run the configured cell over a sequence from ``h_0 = 0``.

    ``x_seq`` is ``(T, d)`` for one sequence or ``(B, T, d)`` for a batch.
    Returns ``(h_T, logits, tape)``; the first two drop the batch axis when a
    single sequence was given.
    """
    x = np.asarray(x_seq, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.ndim != 3:
        raise DimensionError(f"x_seq must be (T, d) or (B, T, d), got {x.shape}")
    B, T, d = x.shape
    if T != params.T:
        raise DimensionError(f"sequence length {T} does not match eta rows {params.T}")
    if d != params.d:
        raise DimensionError(f"feature dim {d} does not match W columns {params.d}")

    drive = x @ params.W.T + params.b
    h = np.zeros((B, params.n))
    records = []
    kind = params.cell_kind
    for t in range(T):
        if kind == "vanilla_rnn":
            h, rec = _rnn_kernel(params, h, drive[:, t])
        elif kind == "ernn_toy":
            h, rec = _toy_kernel(params, h, drive[:, t], t)
        else:
            h, rec = _exemplar_kernel(params, h, drive[:, t], t)
        records.append(rec)

    tape = ForwardTape(
        x=x,
        inner=np.stack([r.inner for r in records]),
        pre=np.stack([r.pre for r in records]),
        act=np.stack([r.act for r in records]),
        aff=np.stack([r.aff for r in records]),
    )
    logits = h @ params.cw.T + params.cb
    if single:
        return h[0], logits[0], tape
    return h, logits, tape
