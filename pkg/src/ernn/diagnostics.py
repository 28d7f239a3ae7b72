"""Training-stability and feature-discriminability diagnostics.

* :func:`model_distance_trace`: distance of every epoch's parameters to the
  final ones.
* :func:`discriminability_trace`: per-timestep ratio of mean intra-class
  spread to mean inter-centroid distance (lower is more discriminative).
* :func:`eta_report`: learned step sizes with a least-squares line per k.
* :func:`contraction_report`: statistics of ``||I + eta J||_2`` on the tape.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .cells import TENSOR_NAMES, ErnnParams, activation_grad, forward_sequence
from .data import SequenceDataset
from .linalg import DimensionError, frobenius_distance, spectral_norm


def model_distance_trace(checkpoints) -> list:
    checkpoints = list(checkpoints)
    if len(checkpoints) < 2:
        raise ValueError("need at least two checkpoints")
    final = checkpoints[-1]
    trace = []
    for e, ckpt in enumerate(checkpoints):
        total = 0.0
        for name in TENSOR_NAMES:
            a, b = getattr(ckpt, name), getattr(final, name)
            if a.shape != b.shape:
                raise DimensionError(f"checkpoint {e}: {name} shape {a.shape} != {b.shape}")
            total += frobenius_distance(a, b) ** 2
        trace.append(math.sqrt(total))
    return trace


def hidden_states(params: ErnnParams, dataset: SequenceDataset, chunk: int = 1024) -> np.ndarray:
    """Hidden states h_1..h_T for every sample, shape (T, N, n)."""
    X = dataset.sequences
    parts = [forward_sequence(params, X[lo : lo + chunk])[2].states for lo in range(0, len(X), chunk)]
    return np.concatenate(parts, axis=1)


def discriminability_ratio(H: np.ndarray, labels: np.ndarray) -> float:
    """Intra/inter distance ratio for one timestep of states ``H`` (N, n)."""
    classes = np.unique(labels)
    if classes.size < 2:
        raise ValueError("discriminability needs at least two classes")
    centroids = np.stack([H[labels == c].mean(axis=0) for c in classes])
    intra = np.mean(
        [np.linalg.norm(H[labels == c] - centroids[i], axis=1).mean() for i, c in enumerate(classes)]
    )
    i, j = np.triu_indices(classes.size, k=1)
    inter = np.linalg.norm(centroids[i] - centroids[j], axis=1).mean()
    if inter == 0.0:
        return math.nan if intra == 0.0 else math.inf
    return float(intra / inter)


def discriminability_from_states(states: np.ndarray, labels) -> list:
    labels = np.asarray(labels)
    return [discriminability_ratio(states[t], labels) for t in range(states.shape[0])]


def discriminability_trace(params: ErnnParams, dataset: SequenceDataset) -> list:
    return discriminability_from_states(hidden_states(params, dataset), dataset.labels)


@dataclass
class EtaFit:
    k: int
    slope: float
    intercept: float
    residuals: np.ndarray


@dataclass
class EtaReport:
    rows: list
    fits: list


def eta_report(params: ErnnParams) -> EtaReport:
    """All (t, k, eta) triples (1-based t and k) plus a line fit of eta against t per k."""
    T, K = params.eta.shape
    t = np.arange(1, T + 1, dtype=np.float64)
    A = np.column_stack([np.ones(T), t])
    rows = [(ti + 1, k + 1, float(params.eta[ti, k])) for ti in range(T) for k in range(K)]
    fits = []
    for k in range(K):
        y = params.eta[:, k]
        (intercept, slope), *_ = np.linalg.lstsq(A, y, rcond=None)
        fits.append(EtaFit(k + 1, float(slope), float(intercept), y - A @ np.array([intercept, slope])))
    return EtaReport(rows, fits)


def inner_jacobian(params: ErnnParams, h_in: np.ndarray, pre: np.ndarray, act: np.ndarray) -> np.ndarray:
    """Jacobian of ``phi(h) - h`` at one inner step of one sample."""
    n = params.n
    sp = activation_grad(params.activation, pre, act)
    if params.cell_kind == "ernn_toy":
        return np.diag(sp) - np.eye(n)
    if params.cell_kind in ("ernn_exemplar", "fastrnn"):
        return sp[:, None] * ((np.eye(n) + params.U) @ params.V) - np.eye(n)
    raise ValueError(f"{params.cell_kind} has no inner fixed-point iteration")


@dataclass
class ContractionStats:
    t: int
    k: int
    min: float
    mean: float
    max: float
    frac_lt_1: float


def contraction_report(
    params: ErnnParams, dataset: SequenceDataset, sample_count: int = 16, seed: int = 0
) -> list:
    """``||I + eta_t^(k) J||_2`` over sampled sequences, summarized per (t, k)."""
    if params.cell_kind == "vanilla_rnn":
        raise ValueError("vanilla_rnn has no inner fixed-point iteration")
    rng = np.random.default_rng(seed)
    count = min(sample_count, len(dataset))
    idx = np.sort(rng.choice(len(dataset), size=count, replace=False))
    _, _, tape = forward_sequence(params, dataset.sequences[idx])
    T, K = tape.shape
    n = params.n
    out = []
    for t in range(T):
        for k in range(K):
            eta = params.eta[t, k]
            norms = np.array([
                spectral_norm(
                    np.eye(n)
                    + eta * inner_jacobian(params, tape.inner[t, k, i], tape.pre[t, k, i], tape.act[t, k, i])
                )
                for i in range(count)
            ])
            out.append(ContractionStats(
                t + 1, k + 1, float(norms.min()), float(norms.mean()), float(norms.max()),
                float(np.mean(norms < 1.0)),
            ))
    return out


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format(v, ".17g") if isinstance(v, float) else v for v in row])


def write_h1_csv(path, trace) -> None:
    _write_csv(path, ["epoch", "distance"], [(e, float(d)) for e, d in enumerate(trace)])


def write_h2_csv(path, trace) -> None:
    _write_csv(path, ["t", "ratio"], [(t, float(r)) for t, r in enumerate(trace, start=1)])


def write_eta_csv(path, report: EtaReport) -> None:
    _write_csv(path, ["t", "k", "eta"], report.rows)


def write_contraction_csv(path, stats) -> None:
    _write_csv(
        path,
        ["t", "k", "min", "mean", "max", "frac_lt_1"],
        [(s.t, s.k, s.min, s.mean, s.max, s.frac_lt_1) for s in stats],
    )
