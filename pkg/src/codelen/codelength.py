"""Bit accounting: codelengths, log-loss, and the uniform baseline.

A codelength is the number of bits needed to transmit the labels losslessly
to a receiver who already holds the inputs; it equals the accumulated
-log2 of the predicted probability of each realized label.  The +1 bit of
the underlying prefix-code construction is a once-per-message constant and
is omitted throughout, and codelengths are real-valued (no entropy coder is
ever run), so totals are comparable bounds rather than integer message
lengths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import LabeledDataset, check_range
from .errors import ConfigError, NonFiniteModelOutput, ZeroProbabilityLabel

LOG2_E = math.log2(math.e)

# A realized label costing more than this many bits means the model gave it
# effectively zero probability; transmitting is impossible, so it is an error
# rather than a clamp (see ZeroProbabilityLabel).
MAX_LABEL_BITS = 1e6

_RESUM_RTOL = 1e-6
_PROB_SUM_ATOL = 1e-9


def kahan_sum(values) -> float:
    """Compensated summation; keeps block-additivity identities at 1e-9."""
    total = 0.0
    carry = 0.0
    for v in values:
        y = float(v) - carry
        t = total + y
        carry = (t - total) - y
        total = t
    return total


@dataclass(frozen=True)
class Codelength:
    """A total number of bits plus the per-component audit trail."""

    total_bits: float
    breakdown: tuple[tuple[str, float], ...]

    def __post_init__(self):
        for label, bits in self.breakdown:
            if not np.isfinite(bits) or bits < 0.0:
                raise ConfigError(f"breakdown component {label!r} has invalid bits {bits!r}")
        resum = kahan_sum(b for _, b in self.breakdown)
        tol = _RESUM_RTOL * max(1.0, abs(self.total_bits))
        if abs(resum - self.total_bits) > tol:
            raise ConfigError(
                f"breakdown re-sums to {resum!r}, not total {self.total_bits!r}"
            )
        if self.total_bits < 0.0:
            raise ConfigError(f"total_bits must be non-negative, got {self.total_bits}")

    @classmethod
    def from_breakdown(cls, items) -> "Codelength":
        items = tuple((str(k), float(v)) for k, v in items)
        return cls(kahan_sum(v for _, v in items), items)

    def component(self, label: str) -> float:
        for k, v in self.breakdown:
            if k == label:
                return v
        raise KeyError(label)

    def as_dict(self) -> dict:
        return {"total_bits": self.total_bits, "breakdown": [list(kv) for kv in self.breakdown]}

    @classmethod
    def from_dict(cls, d: dict) -> "Codelength":
        return cls(float(d["total_bits"]), tuple((k, float(v)) for k, v in d["breakdown"]))


def label_bits(model, data: LabeledDataset, idx_range: tuple[int, int] | None = None) -> np.ndarray:
    """Per-sample -log2 p(y_i | x_i) over the range, validated.

    Raises NonFiniteModelOutput / ZeroProbabilityLabel with the absolute
    sample index, and rejects models whose per-row probabilities do not sum
    to 1 within 1e-9.
    """
    start, end = check_range(data, idx_range)
    lp = model.log2_probs(data.inputs[start:end])
    lp = np.asarray(lp, dtype=np.float64)
    if lp.shape != (end - start, data.n_classes):
        raise ConfigError(
            f"model returned log-prob shape {lp.shape}, expected {(end - start, data.n_classes)}"
        )
    finite = np.isfinite(lp)
    if not finite.all():
        bad_row = int(np.nonzero(~finite.all(axis=1))[0][0])
        raise NonFiniteModelOutput(start + bad_row)
    sums = np.exp2(lp).sum(axis=1)
    if not np.allclose(sums, 1.0, rtol=0.0, atol=_PROB_SUM_ATOL):
        bad_row = int(np.argmax(np.abs(sums - 1.0)))
        raise ConfigError(
            f"model probabilities at sample {start + bad_row} sum to {sums[bad_row]!r}, not 1"
        )
    bits = -lp[np.arange(end - start), data.labels[start:end]]
    worst = int(np.argmax(bits))
    if bits[worst] > MAX_LABEL_BITS:
        raise ZeroProbabilityLabel(start + worst, float(bits[worst]))
    return bits


def log_loss_bits(model, data: LabeledDataset, idx_range: tuple[int, int] | None = None) -> float:
    """Codelength in bits of the labels in range under a fixed model."""
    return kahan_sum(label_bits(model, data, idx_range))


def accuracy(model, data: LabeledDataset, idx_range: tuple[int, int] | None = None) -> float:
    """Fraction of argmax predictions matching the labels in range."""
    start, end = check_range(data, idx_range)
    lp = np.asarray(model.log2_probs(data.inputs[start:end]), dtype=np.float64)
    pred = lp.argmax(axis=1)
    return float((pred == data.labels[start:end]).mean())


def uniform_codelength(n: int, n_classes: int) -> float:
    """Bits to send n labels under the uniform code: n * log2(K)."""
    if n < 0:
        raise ConfigError(f"n must be non-negative, got {n}")
    if n_classes < 2:
        raise ConfigError(f"n_classes must be >= 2, got {n_classes}")
    return n * math.log2(n_classes)


def mutual_info_gain(code: Codelength, n: int, n_classes: int) -> float:
    """Per-sample bits saved versus the uniform code.

    This is an empirical lower estimate of the mutual information between
    inputs and labels; it may be negative (the code lost to uniform), which
    is reported rather than clamped.
    """
    return (uniform_codelength(n, n_classes) - code.total_bits) / n
