"""Toy-task comparison protocol shared by the acceptance suite.

For one seed: generate the two-class random-walk data, split it in half,
pick each model's learning rate by validation accuracy on an 80/20 split of
the training half (every model uses the same global-norm gradient clip),
retrain on the full training half with that rate, and
report test accuracy, training loss and the H1/H2 summaries.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .cells import init_params
from .data import gen_random_walks, split
from .diagnostics import discriminability_trace, model_distance_trace
from .train import TrainConfig, evaluate, train

log = logging.getLogger(__name__)

TOY_MODELS = (
    ("rnn", "vanilla_rnn", 1),
    ("ernn_k1", "ernn_toy", 1),
    ("ernn_k2", "ernn_toy", 2),
)
LR_GRID = (1e-2, 3e-3, 1e-3)


@dataclass
class ToyProtocol:
    n_per_class: int = 10_000
    T: int = 100
    sigma0: float = 0.1
    sigma1: float = 1.0
    hidden: int = 10
    epochs: int = 20
    lr_half_period: int = 10
    batch_size: int = 128
    clip_norm: float | None = 5.0
    lr_grid: tuple = LR_GRID
    models: tuple = TOY_MODELS


@dataclass
class ToyRun:
    name: str
    seed: int
    lr: float
    val_acc: dict
    test_acc: float
    loss_trace: list
    h1_tail_mean: float
    h2_final: float
    diverged: bool = False

    @property
    def final_loss(self) -> float:
        return self.loss_trace[-1] if self.loss_trace else float("nan")


@dataclass
class SeedResult:
    seed: int
    runs: dict = field(default_factory=dict)


def _fit(cell, K, lr, train_ds, proto, seed, eval_ds=None):
    params = init_params(cell, proto.hidden, train_ds.feature_dim, train_ds.seq_len, K, 2, seed=seed)
    config = TrainConfig(
        learning_rate=lr, batch_size=proto.batch_size, epochs=proto.epochs,
        lr_half_period=proto.lr_half_period, seed=seed, K=K, hidden_dim=proto.hidden,
        clip_norm=proto.clip_norm,
    )
    return train(params, train_ds, config, eval_dataset=eval_ds)


def run_seed(seed: int, proto: ToyProtocol = ToyProtocol()) -> SeedResult:
    ds = gen_random_walks(proto.n_per_class, proto.T, proto.sigma0, proto.sigma1, seed=seed)
    train_ds, test_ds = split(ds, 0.5, seed=seed)
    fit_ds, val_ds = split(train_ds, 0.8, seed=seed + 1000)
    out = SeedResult(seed)
    for name, cell, K in proto.models:
        val_acc = {}
        for lr in proto.lr_grid:
            res = _fit(cell, K, lr, fit_ds, proto, seed)
            val_acc[lr] = -1.0 if res.diverged_epoch is not None else evaluate(res.params, val_ds)
            log.info("seed %d %s lr %g val %.4f", seed, name, lr, val_acc[lr])
        best = max(proto.lr_grid, key=lambda lr: (val_acc[lr], lr))
        res = _fit(cell, K, best, train_ds, proto, seed)
        trace = model_distance_trace(res.checkpoints) if len(res.checkpoints) >= 2 else [0.0]
        tail = trace[-max(1, len(trace) // 4):]
        run = ToyRun(
            name, seed, best, val_acc, evaluate(res.params, test_ds), res.loss_trace,
            float(np.mean(tail)), discriminability_trace(res.params, test_ds)[-1],
            res.diverged_epoch is not None,
        )
        log.info("seed %d %s lr %g test %.4f loss %.4f", seed, name, best, run.test_acc, run.final_loss)
        out.runs[name] = run
    return out
