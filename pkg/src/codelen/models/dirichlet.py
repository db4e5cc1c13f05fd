"""Categorical model with a Dirichlet prior.

The posterior predictive after observing counts c under pseudocounts a is
(c_k + a_k) / sum(c + a).  Chaining these predictives over a label sequence
reproduces the exact Bayes mixture of the categorical family in closed form,
which makes this the library's tractable oracle for mixture codelengths.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from .base import digest
from ..errors import ConfigError

LN2 = math.log(2.0)


class DirichletModel:
    """Input-ignoring categorical predictor with conjugate updates."""

    def __init__(self, pseudocounts, counts=None):
        a = np.asarray(pseudocounts, dtype=np.float64)
        if a.ndim != 1 or a.size < 2 or np.any(a <= 0):
            raise ConfigError("pseudocounts must be >= 2 positive reals")
        c = np.zeros_like(a) if counts is None else np.asarray(counts, dtype=np.float64)
        if c.shape != a.shape or np.any(c < 0):
            raise ConfigError("counts must be non-negative and match pseudocounts")
        self.pseudocounts = a
        self.counts = c
        self.n_classes = a.size

    def predict(self) -> np.ndarray:
        """Posterior predictive probabilities over the K classes."""
        post = self.counts + self.pseudocounts
        return post / post.sum()

    def update(self, label: int) -> "DirichletModel":
        if not 0 <= label < self.n_classes:
            raise ConfigError(f"label {label} outside [0, {self.n_classes})")
        counts = self.counts.copy()
        counts[label] += 1
        return DirichletModel(self.pseudocounts, counts)

    def observe_all(self, labels) -> "DirichletModel":
        counts = self.counts + np.bincount(
            np.asarray(labels, dtype=np.int64), minlength=self.n_classes
        )
        return DirichletModel(self.pseudocounts, counts)

    def log2_probs(self, inputs: np.ndarray) -> np.ndarray:
        row = np.log2(self.predict())
        return np.tile(row, (len(inputs), 1))

    def fingerprint(self) -> str:
        return digest("dirichlet", self.pseudocounts, self.counts)

    def __repr__(self):
        return f"DirichletModel(pseudocounts={self.pseudocounts.tolist()}, counts={self.counts.tolist()})"


def sequential_codelength_bits(pseudocounts, labels) -> float:
    """Bits of the label sequence under the chained posterior predictives."""
    model = DirichletModel(pseudocounts)
    total = 0.0
    for y in np.asarray(labels, dtype=np.int64):
        total += -math.log2(model.predict()[y])
        model = model.update(int(y))
    return total


def bayes_marginal_bits(pseudocounts, labels) -> float:
    """Exact -log2 of the Bayes mixture probability of the label sequence.

    Closed form via the Dirichlet normalizer: the marginal is
    B(a + c) / B(a) with B the multivariate beta function and c the label
    counts.
    """
    a = np.asarray(pseudocounts, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= a.size):
        raise ConfigError("labels outside pseudocount range")
    c = np.bincount(labels, minlength=a.size)
    log_marginal = (
        gammaln(a.sum())
        - gammaln(a.sum() + labels.size)
        + (gammaln(a + c) - gammaln(a)).sum()
    )
    return -log_marginal / LN2
