"""Versioned plain-text model checkpoints.

Layout::

    ernn-ckpt v1
    <cell_kind> <n> <d> <T> <K> <C> <activation>
    U <rows> <cols>
    <row 0 values>
    ...
    b <len>
    <values>
    ...

Blocks appear in the order U, V, W, b, eta, cw, cb. Values are written with
17 significant digits, which round-trips float64 exactly.
"""

from __future__ import annotations

import os

import numpy as np

from .cells import TENSOR_NAMES, ErnnParams

MAGIC = "ernn-ckpt v1"


class CheckpointFormatError(ValueError):
    pass


def _fmt(values) -> str:
    return " ".join(format(float(v), ".17g") for v in values)


def dumps(params: ErnnParams) -> str:
    p = params
    lines = [MAGIC, f"{p.cell_kind} {p.n} {p.d} {p.T} {p.K} {p.C} {p.activation}"]
    for name in TENSOR_NAMES:
        arr = getattr(p, name)
        if arr.ndim == 1:
            lines.append(f"{name} {arr.shape[0]}")
            lines.append(_fmt(arr))
        else:
            lines.append(f"{name} {arr.shape[0]} {arr.shape[1]}")
            lines.extend(_fmt(row) for row in arr)
    return "\n".join(lines) + "\n"


def save(params: ErnnParams, path) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(dumps(params))
    os.replace(tmp, path)


def _parse_floats(line: str, count: int, where: str) -> np.ndarray:
    parts = line.split()
    if len(parts) != count:
        raise CheckpointFormatError(f"{where}: expected {count} values, found {len(parts)}")
    try:
        return np.array([float(v) for v in parts])
    except ValueError as exc:
        raise CheckpointFormatError(f"{where}: {exc}") from None


def loads(text: str) -> ErnnParams:
    lines = text.splitlines()
    if not lines or lines[0].strip() != MAGIC:
        found = lines[0].strip() if lines else "<empty>"
        raise CheckpointFormatError(f"not an {MAGIC!r} checkpoint (header {found!r})")
    if len(lines) < 2:
        raise CheckpointFormatError("missing model header line")
    head = lines[1].split()
    if len(head) != 7:
        raise CheckpointFormatError(f"line 2: expected 7 fields, found {len(head)}")
    cell_kind, activation = head[0], head[6]
    try:
        n, d, T, K, C = (int(v) for v in head[1:6])
    except ValueError:
        raise CheckpointFormatError("line 2: dimensions must be integers") from None
    expected = {
        "U": (n, n),
        "V": (n, n),
        "W": (n, d),
        "b": (n,),
        "eta": (T, K),
        "cw": (C, n),
        "cb": (C,),
    }

    tensors = {}
    pos = 2
    for name in TENSOR_NAMES:
        if pos >= len(lines):
            raise CheckpointFormatError(f"truncated checkpoint: block {name} missing")
        label = lines[pos].split()
        if not label or label[0] != name:
            raise CheckpointFormatError(f"line {pos + 1}: expected block {name!r}")
        try:
            dims = tuple(int(v) for v in label[1:])
        except ValueError:
            raise CheckpointFormatError(f"line {pos + 1}: bad dimensions") from None
        if dims != expected[name]:
            raise CheckpointFormatError(
                f"line {pos + 1}: block {name} has dims {dims}, expected {expected[name]}"
            )
        pos += 1
        rows = 1 if len(dims) == 1 else dims[0]
        cols = dims[-1]
        if pos + rows > len(lines):
            raise CheckpointFormatError(f"truncated checkpoint inside block {name}")
        data = [_parse_floats(lines[pos + i], cols, f"line {pos + i + 1}") for i in range(rows)]
        pos += rows
        arr = np.vstack(data) if len(dims) == 2 else data[0]
        tensors[name] = arr.reshape(dims)
    try:
        return ErnnParams(**tensors, activation=activation, cell_kind=cell_kind)
    except ValueError as exc:
        raise CheckpointFormatError(f"invalid checkpoint contents: {exc}") from None


def load(path) -> ErnnParams:
    with open(path) as fh:
        return loads(fh.read())
