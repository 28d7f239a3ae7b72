"""Sequence datasets: the 2-D random-walk toy task, CSV I/O, splits, scaling.

Randomness comes from numpy's PCG64 generator (``np.random.default_rng``),
so a seed fully determines every dataset and split.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np


class DataFormatError(ValueError):
    pass


@dataclass(frozen=True)
class SequenceDataset:
    sequences: np.ndarray
    labels: np.ndarray
    class_count: int

    def __post_init__(self):
        X = np.asarray(self.sequences, dtype=np.float64)
        y = np.asarray(self.labels)
        if X.ndim != 3:
            raise DataFormatError(f"sequences must be (N, T, d), got {X.shape}")
        if y.shape != (X.shape[0],):
            raise DataFormatError(f"labels shape {y.shape} does not match N={X.shape[0]}")
        if y.size and not np.issubdtype(y.dtype, np.integer):
            raise DataFormatError("labels must be integers")
        y = y.astype(np.int64)
        if y.size and (y.min() < 0 or y.max() >= self.class_count):
            raise DataFormatError(f"labels must lie in [0, {self.class_count})")
        if not np.all(np.isfinite(X)):
            raise DataFormatError("sequences contain non-finite values")
        object.__setattr__(self, "sequences", X)
        object.__setattr__(self, "labels", y)

    def __len__(self) -> int:
        return self.sequences.shape[0]

    @property
    def seq_len(self) -> int:
        return self.sequences.shape[1]

    @property
    def feature_dim(self) -> int:
        return self.sequences.shape[2]

    def subset(self, idx) -> "SequenceDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return SequenceDataset(self.sequences[idx], self.labels[idx], self.class_count)


def gen_random_walks(
    n_per_class: int,
    T: int,
    sigma0: float = 0.1,
    sigma1: float = 1.0,
    seed: int = 0,
    sigma_kind: str = "variance",
) -> SequenceDataset:
    """Two classes of 2-D Gaussian random walks started at the origin.

    Sample ``i`` of class ``c`` has positions ``X_1..X_T`` with
    ``X_t ~ N(X_{t-1}, sigma_c I)``. With ``sigma_kind="variance"`` (the
    default) ``sigma_c`` is the per-coordinate step variance, so
    ``E||X_t - X_{t-1}||^2 = 2 sigma_c``; with ``sigma_kind="std"`` it is the
    step standard deviation and the expectation is ``2 sigma_c^2``. Class 0
    samples come first.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if sigma0 <= 0 or sigma1 <= 0:
        raise ValueError("sigmas must be positive")
    if sigma_kind == "variance":
        scales = np.sqrt([sigma0, sigma1])
    elif sigma_kind == "std":
        scales = np.array([sigma0, sigma1], dtype=np.float64)
    else:
        raise ValueError(f"sigma_kind must be 'variance' or 'std', got {sigma_kind!r}")
    rng = np.random.default_rng(seed)
    steps = rng.standard_normal((2 * n_per_class, T, 2))
    scale = np.repeat(scales, n_per_class)
    walks = np.cumsum(steps * scale[:, None, None], axis=1)
    labels = np.repeat(np.arange(2, dtype=np.int64), n_per_class)
    return SequenceDataset(walks, labels, 2)


def split(ds: SequenceDataset, train_frac: float, seed: int = 0):
    """Stratified, seeded split into ``(train, test)``.

    Each class contributes ``round(train_frac * n_c)`` samples to train (at
    least one to each side). Both halves come out shuffled.
    """
    if not 0.0 < train_frac < 1.0:
        raise ValueError("train_frac must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for c in range(ds.class_count):
        members = np.flatnonzero(ds.labels == c)
        if members.size == 0:
            continue
        if members.size < 2:
            raise ValueError(f"class {c} has fewer than 2 samples; cannot split")
        members = rng.permutation(members)
        n_train = min(max(int(round(train_frac * members.size)), 1), members.size - 1)
        train_idx.append(members[:n_train])
        test_idx.append(members[n_train:])
    train_idx = rng.permutation(np.concatenate(train_idx))
    test_idx = rng.permutation(np.concatenate(test_idx))
    return ds.subset(train_idx), ds.subset(test_idx)


def write_csv_sequences(ds: SequenceDataset, path) -> None:
    """Write ``sample_id,t,label,f0,...`` rows; floats use 17 significant digits."""
    d = ds.feature_dim
    with open(path, "w", newline="") as fh:
        fh.write(",".join(["sample_id", "t", "label"] + [f"f{j}" for j in range(d)]) + "\n")
        for i in range(len(ds)):
            label = int(ds.labels[i])
            rows = []
            for t, feats in enumerate(ds.sequences[i], start=1):
                vals = ",".join(format(float(v), ".17g") for v in feats)
                rows.append(f"{i},{t},{label},{vals}\n")
            fh.write("".join(rows))


def load_csv_sequences(
    path, class_count: Optional[int] = None, feature_dim: Optional[int] = None
) -> SequenceDataset:
    """Parse a sequence CSV, validating it against the schema.

    Rows must be grouped by ``sample_id`` with ``t`` running 1..T inside each
    sample and a constant label. Every violation raises
    :class:`DataFormatError` naming the line. ``class_count`` (if given)
    bounds the allowed labels; otherwise it is ``max(label) + 1``.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataFormatError(f"{path}: empty file")
        if header[:3] != ["sample_id", "t", "label"]:
            raise DataFormatError(f"{path}: line 1: header must start with sample_id,t,label")
        feats = header[3:]
        if not feats or feats != [f"f{j}" for j in range(len(feats))]:
            raise DataFormatError(f"{path}: line 1: feature columns must be f0..f{{d-1}}")
        d = len(feats)
        if feature_dim is not None and d != feature_dim:
            raise DataFormatError(f"{path}: line 1: expected {feature_dim} features, found {d}")

        sequences, labels = [], []
        current_id = None
        current_rows: list = []
        current_label = None
        T = None
        seen_ids = set()

        last_line = 1

        def finish():
            nonlocal T
            if current_id is None:
                return
            if T is None:
                T = len(current_rows)
            elif len(current_rows) != T:
                raise DataFormatError(
                    f"{path}: line {last_line}: sample {current_id} has {len(current_rows)} "
                    f"timesteps, expected {T} (ragged sequence)"
                )
            sequences.append(current_rows)
            labels.append(current_label)

        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 3:
                raise DataFormatError(
                    f"{path}: line {lineno}: expected {d + 3} fields, found {len(row)}"
                )
            try:
                sid = int(row[0])
                t = int(row[1])
                label = int(row[2])
            except ValueError:
                raise DataFormatError(
                    f"{path}: line {lineno}: sample_id, t and label must be integers"
                ) from None
            try:
                values = [float(v) for v in row[3:]]
            except ValueError:
                raise DataFormatError(f"{path}: line {lineno}: non-numeric feature value") from None
            if not all(np.isfinite(values)):
                raise DataFormatError(f"{path}: line {lineno}: non-finite feature value")
            if label < 0 or (class_count is not None and label >= class_count):
                raise DataFormatError(f"{path}: line {lineno}: unknown label {label}")

            if sid != current_id:
                finish()
                if sid in seen_ids:
                    raise DataFormatError(
                        f"{path}: line {lineno}: rows of sample {sid} are not contiguous"
                    )
                seen_ids.add(sid)
                current_id, current_rows, current_label = sid, [], label
            if t != len(current_rows) + 1:
                raise DataFormatError(
                    f"{path}: line {lineno}: sample {sid} expected t={len(current_rows) + 1}, found {t}"
                )
            if label != current_label:
                raise DataFormatError(
                    f"{path}: line {lineno}: label changes within sample {sid}"
                )
            current_rows.append(values)
            last_line = lineno
        finish()

    if not sequences:
        raise DataFormatError(f"{path}: no data rows")
    y = np.array(labels, dtype=np.int64)
    C = class_count if class_count is not None else int(y.max()) + 1
    return SequenceDataset(np.array(sequences, dtype=np.float64), y, C)


class Standardized(NamedTuple):
    train: SequenceDataset
    test: SequenceDataset
    mean: np.ndarray
    std: np.ndarray
    unscaled: np.ndarray


def standardize(train: SequenceDataset, test: SequenceDataset) -> Standardized:
    """Per-feature centering and scaling with statistics from ``train`` only.

    Features with zero spread are centered but not scaled; ``unscaled`` flags
    them.
    """
    flat = train.sequences.reshape(-1, train.feature_dim)
    mean = flat.mean(axis=0)
    std = flat.std(axis=0)
    unscaled = ~(std > 0)
    divisor = np.where(unscaled, 1.0, std)

    def apply(ds):
        X = (ds.sequences - mean) / divisor
        return SequenceDataset(X, ds.labels, ds.class_count)

    return Standardized(apply(train), apply(test), mean, std, unscaled)
