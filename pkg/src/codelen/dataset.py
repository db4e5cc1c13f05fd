"""Labeled classification datasets.

Inputs are real feature vectors, labels are class indices.  Instances are
immutable: the wrapped arrays are marked read-only so trained models and
datasets can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class LabeledDataset:
    inputs: np.ndarray   # (n, d_x) float64
    labels: np.ndarray   # (n,) int64 in [0, K)
    n_classes: int

    def __post_init__(self):
        inputs = np.ascontiguousarray(self.inputs, dtype=np.float64)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if inputs.ndim != 2:
            raise ConfigError(f"inputs must be 2-D (n, d_x), got shape {inputs.shape}")
        if labels.ndim != 1:
            raise ConfigError(f"labels must be 1-D, got shape {labels.shape}")
        if inputs.shape[0] != labels.shape[0]:
            raise ConfigError(
                f"{inputs.shape[0]} inputs but {labels.shape[0]} labels"
            )
        if inputs.shape[0] < 1:
            raise ConfigError("dataset must contain at least one sample")
        if self.n_classes < 2:
            raise ConfigError(f"n_classes must be >= 2, got {self.n_classes}")
        if not np.all(np.isfinite(inputs)):
            raise ConfigError("inputs contain non-finite values")
        if labels.size and (labels.min() < 0 or labels.max() >= self.n_classes):
            bad = int(np.argmax((labels < 0) | (labels >= self.n_classes)))
            raise ConfigError(
                f"label {int(labels[bad])} at index {bad} outside [0, {self.n_classes})"
            )
        inputs.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def subset(self, start: int, end: int) -> "LabeledDataset":
        if not (0 <= start < end <= self.n):
            raise ConfigError(f"invalid range [{start}, {end}) for n={self.n}")
        return LabeledDataset(self.inputs[start:end], self.labels[start:end], self.n_classes)

    def with_labels(self, labels: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(self.inputs, labels, self.n_classes)


def check_range(data: LabeledDataset, idx_range: tuple[int, int] | None) -> tuple[int, int]:
    """Normalize an [start, end) index interval against a dataset."""
    if idx_range is None:
        return 0, data.n
    start, end = idx_range
    if not (0 <= start <= end <= data.n):
        raise ConfigError(f"range [{start}, {end}) outside [0, {data.n})")
    return int(start), int(end)
