"""Conditional-model contract and the trivial uniform baseline.

A conditional model maps a batch of inputs to per-class log2-probabilities.
Anything exposing that surface can be priced by the coding schemes; models
with a flat parameter vector additionally support gradients, two-part codes
and subspace training.
"""

from __future__ import annotations

import hashlib
from typing import Protocol, runtime_checkable

import numpy as np


@runtime_checkable
class ConditionalModel(Protocol):
    n_classes: int

    def log2_probs(self, inputs: np.ndarray) -> np.ndarray:
        """(m, K) array of log2 p(class | input); rows exp-sum to 1."""
        ...

    def fingerprint(self) -> str:
        """Hex digest identifying the model bit-for-bit."""
        ...


def digest(*chunks) -> str:
    h = hashlib.sha256()
    for c in chunks:
        if isinstance(c, str):
            h.update(c.encode("utf-8"))
        elif isinstance(c, np.ndarray):
            h.update(np.ascontiguousarray(c).tobytes())
        else:
            h.update(repr(c).encode("utf-8"))
        h.update(b"\x1f")
    return h.hexdigest()


class UniformModel:
    """Assigns probability 1/K to every class; needs no learning."""

    def __init__(self, n_classes: int):
        self.n_classes = int(n_classes)
        self._row = np.full(self.n_classes, -np.log2(self.n_classes))

    def log2_probs(self, inputs: np.ndarray) -> np.ndarray:
        return np.tile(self._row, (len(inputs), 1))

    def fingerprint(self) -> str:
        return digest("uniform", self.n_classes)

    def __repr__(self):
        return f"UniformModel(n_classes={self.n_classes})"


class TableModel:
    """Fixed per-sample probability table; handy for exact hand-checked tests."""

    def __init__(self, probs: np.ndarray):
        probs = np.asarray(probs, dtype=np.float64)
        self.n_classes = probs.shape[1]
        self._log2p = np.log2(probs)

    def log2_probs(self, inputs: np.ndarray) -> np.ndarray:
        return self._log2p[: len(inputs)]

    def fingerprint(self) -> str:
        return digest("table", self._log2p)
