"""Multilayer perceptron with exact analytic gradients and seeded training.

Everything is float64 and deterministic: initialization, per-epoch shuffling
and dropout masks all come from named sub-streams of the given seeds, and
BLAS pools are pinned to one thread while training, so two runs with the
same arguments produce bit-identical parameter vectors regardless of the
host's core count.  That reproducibility is what lets a receiver rebuild the
sender's models from the shared seed.

A model with layer_widths (d_x, K) is a plain linear softmax classifier.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, replace

import numpy as np

from .. import kernels
from ..dataset import LabeledDataset, check_range
from ..errors import ConfigError, TrainingDiverged
from ..rng import derive_rng
from .base import digest

LN2 = math.log(2.0)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

_ACT_KINDS = {"relu": kernels.ACT_RELU, "tanh": kernels.ACT_TANH}

_CHECKPOINT_MAGIC = b"CLMD01\n"


@dataclass(frozen=True)
class MlpSpec:
    """Architecture: (input dim, hidden widths..., class count)."""

    layer_widths: tuple[int, ...]
    activation: str = "relu"
    dropout_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "layer_widths", tuple(int(w) for w in self.layer_widths))
        if len(self.layer_widths) < 2:
            raise ConfigError("layer_widths needs at least (input, output)")
        if any(w < 1 for w in self.layer_widths):
            raise ConfigError(f"layer widths must be positive: {self.layer_widths}")
        if self.activation not in _ACT_KINDS:
            raise ConfigError(f"activation must be one of {sorted(_ACT_KINDS)}")
        if not 0.0 <= self.dropout_prob < 1.0:
            raise ConfigError(f"dropout_prob must be in [0, 1), got {self.dropout_prob}")

    @property
    def n_classes(self) -> int:
        return self.layer_widths[-1]

    @property
    def input_dim(self) -> int:
        return self.layer_widths[0]

    @property
    def n_params(self) -> int:
        return sum(
            fan_in * fan_out + fan_out
            for fan_in, fan_out in zip(self.layer_widths[:-1], self.layer_widths[1:])
        )

    def with_seed(self, seed: int) -> "MlpSpec":
        return replace(self, seed=int(seed))

    def as_dict(self) -> dict:
        return {
            "layer_widths": list(self.layer_widths),
            "activation": self.activation,
            "dropout_prob": self.dropout_prob,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpSpec":
        return cls(
            tuple(d["layer_widths"]),
            activation=d.get("activation", "relu"),
            dropout_prob=float(d.get("dropout_prob", 0.0)),
            seed=int(d.get("seed", 0)),
        )


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "adam"
    learning_rate: float = 0.001
    batch_size: int = 128
    epochs: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"optimizer must be adam or sgd, got {self.optimizer!r}")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")

    def with_seed(self, seed: int) -> "TrainConfig":
        return replace(self, seed=int(seed))

    def with_epochs(self, epochs: int) -> "TrainConfig":
        return replace(self, epochs=int(epochs))

    def as_dict(self) -> dict:
        return {
            "optimizer": self.optimizer,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(
            optimizer=d.get("optimizer", "adam"),
            learning_rate=float(d.get("learning_rate", 0.001)),
            batch_size=int(d.get("batch_size", 128)),
            epochs=int(d.get("epochs", 10)),
            seed=int(d.get("seed", 0)),
        )


def param_views(spec: MlpSpec, flat: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """(W, b) views into the flat parameter vector, layer by layer."""
    views = []
    off = 0
    for fan_in, fan_out in zip(spec.layer_widths[:-1], spec.layer_widths[1:]):
        w = flat[off : off + fan_in * fan_out].reshape(fan_in, fan_out)
        off += fan_in * fan_out
        b = flat[off : off + fan_out]
        off += fan_out
        views.append((w, b))
    return views


def init_params(spec: MlpSpec) -> np.ndarray:
    """Seeded initialization, uniform in +-1/sqrt(fan_in) per layer."""
    rng = derive_rng(spec.seed, "init")
    flat = np.empty(spec.n_params, dtype=np.float64)
    for w, b in param_views(spec, flat):
        bound = 1.0 / math.sqrt(w.shape[0])
        w[...] = rng.uniform(-bound, bound, size=w.shape)
        b[...] = rng.uniform(-bound, bound, size=b.shape)
    return flat


def forward_logits(spec: MlpSpec, flat: np.ndarray, x: np.ndarray) -> np.ndarray:
    act = _ACT_KINDS[spec.activation]
    views = param_views(spec, flat)
    a = np.ascontiguousarray(x, dtype=np.float64)
    for layer, (w, b) in enumerate(views):
        z = np.dot(a, w)
        a = kernels.add_bias_act(z, b, kernels.ACT_NONE if layer == len(views) - 1 else act)
    return a


def loss_and_grad_bits(
    spec: MlpSpec,
    flat: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    *,
    mean: bool = True,
    dropout_rng: np.random.Generator | None = None,
    grad_out: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """Log-loss in bits over the batch and its exact gradient wrt flat params.

    mean=True averages over the batch (the training objective); mean=False
    returns the summed codelength gradient.  Dropout is applied to hidden
    activations only when a generator is supplied, with train-time scaling
    so evaluation needs no rescaling.
    """
    act = _ACT_KINDS[spec.activation]
    views = param_views(spec, flat)
    n_layers = len(views)
    keep = 1.0 - spec.dropout_prob
    use_dropout = dropout_rng is not None and spec.dropout_prob > 0.0

    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    layer_inputs = [x]
    hidden_acts: list[np.ndarray] = []
    masks: list[np.ndarray | None] = []
    a = x
    for layer, (w, b) in enumerate(views):
        z = np.dot(a, w)
        if layer == n_layers - 1:
            logits = kernels.add_bias_act(z, b, kernels.ACT_NONE)
        else:
            h = kernels.add_bias_act(z, b, act)
            hidden_acts.append(h)
            if use_dropout:
                mask = (dropout_rng.random(h.shape) < keep) * (1.0 / keep)
                masks.append(mask)
                a = h * mask
            else:
                masks.append(None)
                a = h
            layer_inputs.append(a)

    log_probs = kernels.log_softmax(logits)
    nll_nats, dlogits = kernels.nll_grad(log_probs, y)
    m = x.shape[0]
    scale = 1.0 / (m * LN2) if mean else 1.0 / LN2
    loss_bits = nll_nats * scale
    dlogits *= scale

    if grad_out is None:
        grad_out = np.empty_like(flat)
    grad_views = param_views(spec, grad_out)
    dz = dlogits
    for layer in range(n_layers - 1, -1, -1):
        w, _ = views[layer]
        gw, gb = grad_views[layer]
        np.matmul(layer_inputs[layer].T, dz, out=gw)
        gb[...] = kernels.colsum(dz)
        if layer > 0:
            da = np.dot(dz, w.T)
            if masks[layer - 1] is not None:
                da *= masks[layer - 1]
            dz = kernels.act_backward(da, hidden_acts[layer - 1], act)
    return loss_bits, grad_out


class MlpModel:
    """Immutable trained network exposing the conditional-model surface."""

    def __init__(self, spec: MlpSpec, params: np.ndarray):
        params = np.ascontiguousarray(params, dtype=np.float64)
        if params.shape != (spec.n_params,):
            raise ConfigError(
                f"parameter vector has shape {params.shape}, spec needs ({spec.n_params},)"
            )
        params.setflags(write=False)
        self.spec = spec
        self.params = params
        self.n_classes = spec.n_classes

    @property
    def dim(self) -> int:
        return self.params.size

    def log2_probs(self, inputs: np.ndarray) -> np.ndarray:
        with kernels.blas_single_thread():
            logits = forward_logits(self.spec, self.params, inputs)
            return kernels.log_softmax(logits) / LN2

    def fingerprint(self) -> str:
        return digest("mlp", json.dumps(self.spec.as_dict(), sort_keys=True), self.params)

    def __repr__(self):
        return f"MlpModel(widths={self.spec.layer_widths}, activation={self.spec.activation})"


def fit_params_snapshots(
    value_grad,
    params: np.ndarray,
    n_samples: int,
    config: TrainConfig,
    rng: np.random.Generator,
) -> list[np.ndarray]:
    """Seeded minibatch loop returning a parameter copy after every epoch.

    value_grad(params, batch_indices, rng) must return (loss_bits, grad) with
    grad shaped like params.  The shuffle order and any dropout masks are
    consumed from the single rng stream, which pins the whole trajectory to
    the seed; the snapshot after epoch j is bit-identical to a fresh run with
    epochs=j.
    """
    params = params.copy()
    snapshots: list[np.ndarray] = []
    if config.epochs == 0 or params.size == 0:
        return snapshots
    adam_m = np.zeros_like(params)
    adam_v = np.zeros_like(params)
    step = 0
    with kernels.blas_single_thread():
        for epoch in range(config.epochs):
            order = rng.permutation(n_samples)
            for batch_no, lo in enumerate(range(0, n_samples, config.batch_size)):
                idx = order[lo : lo + config.batch_size]
                loss, grad = value_grad(params, idx, rng)
                if not np.isfinite(loss):
                    raise TrainingDiverged(epoch, batch_no)
                step += 1
                if config.optimizer == "adam":
                    kernels.adam_step(
                        params, grad, adam_m, adam_v, step,
                        config.learning_rate, ADAM_BETA1, ADAM_BETA2, ADAM_EPS,
                    )
                else:
                    kernels.sgd_step(params, grad, config.learning_rate)
            snapshots.append(params.copy())
    return snapshots


def fit_params(
    value_grad,
    params: np.ndarray,
    n_samples: int,
    config: TrainConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Generic seeded minibatch loop shared by full-space and subspace training."""
    snapshots = fit_params_snapshots(value_grad, params, n_samples, config, rng)
    return snapshots[-1] if snapshots else params.copy()


def train(
    spec: MlpSpec,
    config: TrainConfig,
    data: LabeledDataset,
    idx_range: tuple[int, int] | None = None,
    *,
    init: np.ndarray | None = None,
) -> MlpModel:
    """Deterministic seeded training on data[range); epochs=0 returns the init.

    `init` overrides the seeded initial parameters (resuming, or starting
    from a prescribed point); by default the spec's seeded init is used.
    """
    start, end = check_range(data, idx_range)
    if end - start < 1:
        raise ConfigError("training range is empty")
    if spec.input_dim != data.dim:
        raise ConfigError(f"spec expects input dim {spec.input_dim}, data has {data.dim}")
    if spec.n_classes != data.n_classes:
        raise ConfigError(f"spec has {spec.n_classes} classes, data has {data.n_classes}")
    x = data.inputs[start:end]
    y = data.labels[start:end]
    grad_buf = np.empty(spec.n_params, dtype=np.float64)

    def value_grad(params, idx, rng):
        return loss_and_grad_bits(
            spec, params, x[idx], y[idx],
            mean=True, dropout_rng=rng if spec.dropout_prob > 0 else None,
            grad_out=grad_buf,
        )

    params0 = init_params(spec) if init is None else np.asarray(init, dtype=np.float64)
    if params0.shape != (spec.n_params,):
        raise ConfigError(f"init has shape {params0.shape}, spec needs ({spec.n_params},)")
    rng = derive_rng(config.seed, "train")
    params = fit_params(value_grad, params0, end - start, config, rng)
    return MlpModel(spec, params)


def gradient(
    model: MlpModel,
    data: LabeledDataset,
    idx_range: tuple[int, int] | None = None,
) -> np.ndarray:
    """Exact gradient of the summed codelength (bits) wrt the parameters."""
    start, end = check_range(data, idx_range)
    with kernels.blas_single_thread():
        _, grad = loss_and_grad_bits(
            model.spec, model.params,
            data.inputs[start:end], data.labels[start:end],
            mean=False,
        )
    return grad


def train_log_loss_per_sample(model: MlpModel, data: LabeledDataset,
                              idx_range: tuple[int, int] | None = None) -> float:
    from ..codelength import log_loss_bits

    start, end = check_range(data, idx_range)
    return log_loss_bits(model, data, (start, end)) / (end - start)


def save_model(path, model: MlpModel) -> None:
    """Self-describing checkpoint: magic, JSON spec header, float64 params."""
    header = json.dumps(model.spec.as_dict(), sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        f.write(model.params.astype("<f8").tobytes())


def load_model(path) -> MlpModel:
    with open(path, "rb") as f:
        magic = f.read(len(_CHECKPOINT_MAGIC))
        if magic != _CHECKPOINT_MAGIC:
            raise ConfigError(f"{path}: not a model checkpoint (bad magic {magic!r})")
        (hlen,) = struct.unpack("<I", f.read(4))
        spec = MlpSpec.from_dict(json.loads(f.read(hlen).decode("utf-8")))
        raw = f.read(spec.n_params * 8)
        if len(raw) != spec.n_params * 8:
            raise ConfigError(f"{path}: truncated parameter block")
        params = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    return MlpModel(spec, params)


def linear_spec(input_dim: int, n_classes: int, seed: int = 0) -> MlpSpec:
    """Linear softmax classifier as the no-hidden-layer special case."""
    return MlpSpec((input_dim, n_classes), activation="relu", dropout_prob=0.0, seed=seed)
