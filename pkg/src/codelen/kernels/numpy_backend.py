"""Pure-numpy implementations of the training hot kernels.

Matrix products are done by the caller (shared BLAS path for both backends);
these kernels cover the fused elementwise work: bias+activation, activation
backward, log-softmax rows, cross-entropy loss/gradient, optimizer steps.
Each function has a signature-identical compiled twin in ``codelen._fast``.
"""

from __future__ import annotations

import numpy as np

ACT_NONE = 0
ACT_RELU = 1
ACT_TANH = 2

NAME = "numpy"


def add_bias_act(z: np.ndarray, b: np.ndarray, kind: int) -> np.ndarray:
    """In-place z <- act(z + b); returns z."""
    z += b
    if kind == ACT_RELU:
        np.maximum(z, 0.0, out=z)
    elif kind == ACT_TANH:
        np.tanh(z, out=z)
    elif kind != ACT_NONE:
        raise ValueError(f"unknown activation kind {kind}")
    return z


def act_backward(da: np.ndarray, a: np.ndarray, kind: int) -> np.ndarray:
    """In-place da <- da * act'(z) expressed through the activation value a."""
    if kind == ACT_RELU:
        da *= a > 0.0
    elif kind == ACT_TANH:
        da *= 1.0 - a * a
    elif kind != ACT_NONE:
        raise ValueError(f"unknown activation kind {kind}")
    return da


def colsum(m: np.ndarray) -> np.ndarray:
    return m.sum(axis=0)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise log-softmax in nats, numerically stable."""
    zmax = logits.max(axis=1, keepdims=True)
    shifted = logits - zmax
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return shifted - lse


def nll_grad(log_probs: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Summed negative log-likelihood (nats) and its gradient wrt logits.

    The gradient is softmax(logits) minus the one-hot labels.
    """
    m = log_probs.shape[0]
    rows = np.arange(m)
    loss = -float(log_probs[rows, labels].sum())
    dlogits = np.exp(log_probs)
    dlogits[rows, labels] -= 1.0
    return loss, dlogits


def adam_step(
    p: np.ndarray,
    g: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    t: int,
    lr: float,
    beta1: float,
    beta2: float,
    eps: float,
) -> None:
    """One Adam update, in place on p, m, v. t is the 1-based step count."""
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * (g * g)
    mhat = m / (1.0 - beta1**t)
    vhat = v / (1.0 - beta2**t)
    p -= lr * mhat / (np.sqrt(vhat) + eps)


def sgd_step(p: np.ndarray, g: np.ndarray, lr: float) -> None:
    p -= lr * g
