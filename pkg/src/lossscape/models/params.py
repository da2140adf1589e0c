"""Flat parameter vectors and their layer layout."""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import prod
from pathlib import Path

import numpy as np

from lossscape._io import atomic_write_text, fmt_float


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class Layout:
    """Ordered ``(name, shape)`` segments of a flat parameter vector."""

    segments: tuple

    @property
    def size(self):
        return sum(prod(shape) for _, shape in self.segments)

    def slices(self):
        out, start = [], 0
        for name, shape in self.segments:
            stop = start + prod(shape)
            out.append((name, shape, slice(start, stop)))
            start = stop
        return out

    def unpack(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.size,):
            raise ShapeError(f"theta has shape {theta.shape}, layout expects ({self.size},)")
        return [theta[sl].reshape(shape) for _, shape, sl in self.slices()]

    def to_json(self):
        return [[name, list(shape)] for name, shape in self.segments]

    @classmethod
    def from_json(cls, data):
        return cls(tuple((name, tuple(shape)) for name, shape in data))


def dense_layout(widths):
    """Weights ``W{i}`` of shape (out, in) then biases ``b{i}``, layer by layer."""
    widths = tuple(int(w) for w in widths)
    if len(widths) < 2 or min(widths) < 1:
        raise ShapeError(f"invalid layer widths {widths}")
    segs = []
    for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
        segs.append((f"W{i}", (fan_out, fan_in)))
        segs.append((f"b{i}", (fan_out,)))
    return Layout(tuple(segs))


def init_uniform(widths, seed):
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias."""
    layout = dense_layout(widths)
    rng = np.random.default_rng(seed)
    parts = []
    for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
        bound = 1.0 / np.sqrt(fan_in)
        parts.append(rng.uniform(-bound, bound, size=fan_out * fan_in))
        parts.append(rng.uniform(-bound, bound, size=fan_out))
    theta = np.concatenate(parts)
    assert theta.size == layout.size
    return theta


def save_vectors(path, columns, header):
    """Decimal CSV: one JSON header line prefixed with ``#``, then one row per coordinate."""
    cols = [np.asarray(c, dtype=np.float64).reshape(-1) for c in columns]
    lines = ["# " + json.dumps(header, sort_keys=True)]
    lines.extend(",".join(fmt_float(x) for x in row) for row in zip(*(c.tolist() for c in cols)))
    return atomic_write_text(path, "\n".join(lines) + "\n")


def load_vectors(path):
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("#"):
        raise ShapeError(f"{path}: missing JSON header line")
    header = json.loads(text[0][1:])
    rows = [[float(x) for x in line.split(",")] for line in text[1:] if line.strip()]
    arr = np.array(rows, dtype=np.float64)
    return header, [arr[:, j].copy() for j in range(arr.shape[1])] if arr.size else []


def save_theta(path, theta, layout):
    return save_vectors(path, [theta], {"layout": layout.to_json()})


def load_theta(path):
    header, cols = load_vectors(path)
    layout = Layout.from_json(header["layout"])
    theta = cols[0]
    if theta.size != layout.size:
        raise ShapeError(f"{path}: {theta.size} values for a layout of size {layout.size}")
    if not np.all(np.isfinite(theta)):
        raise ShapeError(f"{path}: non-finite parameter")
    return theta, layout
