"""Prequential (online) coding: encode a block, retrain on the prefix, repeat.

The first t1 labels are always sent with the uniform code; block s is then
encoded with a model trained on samples [0, t_s) only, so sender and
receiver — who shares the protocol seed omega — can rebuild the exact same
model before decoding each block.  Total bits:

    t1*log2(K) + sum_s  -log2 p_{model_s}(block s)

Retraining is from scratch with a fresh seeded init per block (warm-start is
available as an option); the per-block seeds are derived from omega and the
block index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .codelength import Codelength, accuracy, kahan_sum, log_loss_bits, uniform_codelength
from .dataset import LabeledDataset
from .errors import ConfigError, VerificationError
from .models import DirichletModel, MlpModel, MlpSpec, TrainConfig, UniformModel
from .models.mlp import fit_params, init_params, loss_and_grad_bits
from .rng import derive_rng, derive_seed


@dataclass(frozen=True)
class Schedule:
    """Strictly increasing retraining timesteps, ending at the sample count."""

    timesteps: tuple[int, ...]

    def __post_init__(self):
        ts = tuple(int(t) for t in self.timesteps)
        if len(ts) < 1:
            raise ConfigError("schedule needs at least one timestep")
        if ts[0] < 1:
            raise ConfigError(f"first timestep must be >= 1, got {ts[0]}")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ConfigError(f"timesteps must be strictly increasing: {ts}")
        object.__setattr__(self, "timesteps", ts)

    @property
    def n(self) -> int:
        return self.timesteps[-1]

    @property
    def n_blocks(self) -> int:
        """Number of encoded blocks including the uniform prefix."""
        return len(self.timesteps)

    def block_interval(self, s: int) -> tuple[int, int]:
        """[start, end) of block s; block 0 is the uniform prefix."""
        if s == 0:
            return 0, self.timesteps[0]
        return self.timesteps[s - 1], self.timesteps[s]

    def validate_for(self, n: int) -> None:
        if self.n != n:
            raise ConfigError(f"schedule ends at {self.n} but the dataset has {n} samples")


def default_schedule(n: int, start: int = 8, growth: float = 2.0) -> Schedule:
    """Geometric schedule from `start`, capped and terminated at n."""
    if start < 1:
        raise ConfigError(f"start must be >= 1, got {start}")
    if growth <= 1.0:
        raise ConfigError(f"growth must be > 1, got {growth}")
    if start >= n:
        raise ConfigError(
            f"start={start} >= n={n}: nothing would be left to encode after the uniform prefix"
        )
    steps = [start]
    t = start
    while True:
        t = max(t + 1, int(math.floor(t * growth)))
        if t >= n:
            break
        steps.append(t)
    steps.append(n)
    return Schedule(tuple(steps))


@dataclass(frozen=True)
class BlockResult:
    """Accounting for one encoded block (block 0 is the uniform prefix)."""

    index: int
    start: int
    end: int
    bits: float
    next_block_accuracy: float
    model_fingerprint: str

    @property
    def per_sample_bits(self) -> float:
        return self.bits / (self.end - self.start)

    def as_dict(self) -> dict:
        return {
            "index": self.index,
            "start": self.start,
            "end": self.end,
            "bits": self.bits,
            "per_sample_bits": self.per_sample_bits,
            "next_block_accuracy": self.next_block_accuracy,
            "model_fingerprint": self.model_fingerprint,
        }


class PredictionStrategy(Protocol):
    """Anything that can produce a model from the first n_seen samples.

    begin() is called once per encoding pass with the protocol seed; fit()
    must be deterministic given (data, n_seen, block_index) and the seed, as
    the receiver reruns the identical calls to decode.
    """

    def begin(self, data: LabeledDataset, omega: int) -> None: ...

    def fit(self, data: LabeledDataset, n_seen: int, block_index: int): ...

    def describe(self) -> dict: ...


class UniformStrategy:
    def begin(self, data: LabeledDataset, omega: int) -> None:
        self._k = data.n_classes

    def fit(self, data: LabeledDataset, n_seen: int, block_index: int) -> UniformModel:
        return UniformModel(data.n_classes)

    def describe(self) -> dict:
        return {"kind": "uniform"}


class DirichletStrategy:
    """Conjugate categorical predictor; symmetric pseudocounts by default."""

    def __init__(self, alpha: float = 1.0):
        if alpha <= 0:
            raise ConfigError("alpha must be positive")
        self.alpha = float(alpha)

    def begin(self, data: LabeledDataset, omega: int) -> None:
        pass

    def fit(self, data: LabeledDataset, n_seen: int, block_index: int) -> DirichletModel:
        prior = DirichletModel(np.full(data.n_classes, self.alpha))
        return prior.observe_all(data.labels[:n_seen])

    def describe(self) -> dict:
        return {"kind": "dirichlet", "alpha": self.alpha}


class MlpStrategy:
    """Seeded from-scratch (or warm-started) network retraining per block."""

    def __init__(self, spec: MlpSpec, config: TrainConfig, warm_start: bool = False):
        self.spec = spec
        self.config = config
        self.warm_start = warm_start
        self._omega = 0
        self._params: np.ndarray | None = None

    def begin(self, data: LabeledDataset, omega: int) -> None:
        if self.spec.input_dim != data.dim or self.spec.n_classes != data.n_classes:
            raise ConfigError(
                f"strategy expects ({self.spec.input_dim} dims, {self.spec.n_classes} classes), "
                f"data has ({data.dim}, {data.n_classes})"
            )
        self._omega = omega
        self._params = None

    def fit(self, data: LabeledDataset, n_seen: int, block_index: int) -> MlpModel:
        spec = self.spec.with_seed(derive_seed(self._omega, "init", block_index))
        if self.warm_start and self._params is not None:
            params0 = self._params
        else:
            params0 = init_params(spec)
        x = data.inputs[:n_seen]
        y = data.labels[:n_seen]
        grad_buf = np.empty(spec.n_params, dtype=np.float64)

        def value_grad(params, idx, rng):
            return loss_and_grad_bits(
                spec, params, x[idx], y[idx], mean=True,
                dropout_rng=rng if spec.dropout_prob > 0 else None, grad_out=grad_buf,
            )

        rng = derive_rng(derive_seed(self._omega, "sgd", block_index), "train")
        params = fit_params(value_grad, params0, n_seen, self.config, rng)
        self._params = params
        return MlpModel(spec, params)

    def describe(self) -> dict:
        return {
            "kind": "mlp",
            "spec": self.spec.as_dict(),
            "train": self.config.as_dict(),
            "warm_start": self.warm_start,
        }


@dataclass
class PrequentialResult:
    codelength: Codelength
    blocks: list[BlockResult]
    schedule: Schedule
    omega: int
    strategy: dict
    n_classes: int
    final_model: object | None = None
    final_train_bits: float | None = None
    final_model_fingerprint: str | None = None

    @property
    def info_in_parameters_bits(self) -> float | None:
        """Prequential bits minus the final model's log-loss on all samples.

        The difference is the information the trained parameters carry about
        the labels: the codelength without knowing the parameters minus the
        codelength knowing them.
        """
        if self.final_train_bits is None:
            return None
        return self.codelength.total_bits - self.final_train_bits

    def as_dict(self) -> dict:
        return {
            "codelength": self.codelength.as_dict(),
            "blocks": [b.as_dict() for b in self.blocks],
            "schedule": list(self.schedule.timesteps),
            "omega": self.omega,
            "strategy": self.strategy,
            "n_classes": self.n_classes,
            "final_train_bits": self.final_train_bits,
            "final_model_fingerprint": self.final_model_fingerprint,
            "info_in_parameters_bits": self.info_in_parameters_bits,
        }


def prequential_encode(
    strategy: PredictionStrategy,
    data: LabeledDataset,
    schedule: Schedule,
    omega: int,
    *,
    train_final: bool = True,
) -> PrequentialResult:
    """Run the sender's pass: uniform prefix, then encode-and-retrain blocks.

    With train_final=True a last model is fitted on all n samples (it encodes
    nothing, but its log-loss gives the information-in-parameters report and
    its predictions the test accuracy).
    """
    schedule.validate_for(data.n)
    k = data.n_classes
    t1 = schedule.timesteps[0]
    prefix_bits = uniform_codelength(t1, k)
    uniform = UniformModel(k)
    strategy.begin(data, omega)
    blocks = [
        BlockResult(0, 0, t1, prefix_bits, 1.0 / k, uniform.fingerprint())
    ]
    items: list[tuple[str, float]] = [("uniform_prefix", prefix_bits)]
    for s in range(1, schedule.n_blocks):
        lo, hi = schedule.block_interval(s)
        model = strategy.fit(data, lo, s)
        bits = log_loss_bits(model, data, (lo, hi))
        acc = accuracy(model, data, (lo, hi))
        blocks.append(BlockResult(s, lo, hi, bits, acc, model.fingerprint()))
        items.append((f"block_{s}", bits))
    code = Codelength.from_breakdown(items)
    result = PrequentialResult(
        codelength=code,
        blocks=blocks,
        schedule=schedule,
        omega=omega,
        strategy=strategy.describe(),
        n_classes=k,
    )
    if train_final:
        final = strategy.fit(data, data.n, schedule.n_blocks)
        result.final_model = final
        result.final_train_bits = log_loss_bits(final, data)
        result.final_model_fingerprint = final.fingerprint()
    return result


def cumulative_curves(result: PrequentialResult) -> list[dict]:
    """Per-block rows of the cumulative accounting identities.

    Columns: block end t, per-sample bits of the block, accuracy on the block
    before training on it, cumulative bits through t, cumulative minus the
    uniform code on t labels, and their ratio.
    """
    log2k = uniform_codelength(1, result.n_classes)
    rows = []
    seen = []
    for b in result.blocks:
        seen.append(b.bits)
        cumulative = kahan_sum(seen)
        uniform = b.end * log2k
        rows.append(
            {
                "t": b.end,
                "block_bits_per_sample": b.per_sample_bits,
                "next_block_accuracy": b.next_block_accuracy,
                "cumulative_bits": cumulative,
                "cumulative_minus_uniform": cumulative - uniform,
                "ratio": cumulative / uniform,
            }
        )
    return rows


def receiver_verify(
    strategy: PredictionStrategy,
    data: LabeledDataset,
    schedule: Schedule,
    omega: int,
    expected: dict,
) -> None:
    """Receiver simulation: rebuild every block model from omega and compare.

    `expected` is the sender's serialized result (PrequentialResult.as_dict).
    Raises VerificationError listing every mismatch; success proves the
    sender's and receiver's models coincide bit-for-bit.
    """
    verify_final = expected.get("final_model_fingerprint") is not None
    decoded = prequential_encode(strategy, data, schedule, omega, train_final=verify_final)
    mismatches = list(_diff_results(expected, decoded.as_dict()))
    if mismatches:
        raise VerificationError(mismatches)


def _diff_results(expected: dict, actual: dict):
    exp_blocks = expected["blocks"]
    act_blocks = actual["blocks"]
    if len(exp_blocks) != len(act_blocks):
        yield f"block count {len(act_blocks)} != expected {len(exp_blocks)}"
        return
    for eb, ab in zip(exp_blocks, act_blocks):
        s = eb["index"]
        if eb["model_fingerprint"] != ab["model_fingerprint"]:
            yield f"block {s}: model fingerprint mismatch"
        if eb["bits"] != ab["bits"]:
            yield f"block {s}: bits {ab['bits']!r} != expected {eb['bits']!r}"
    if expected["codelength"]["total_bits"] != actual["codelength"]["total_bits"]:
        yield (
            f"total {actual['codelength']['total_bits']!r} != "
            f"expected {expected['codelength']['total_bits']!r}"
        )
    if expected.get("final_model_fingerprint") is not None:
        if expected["final_model_fingerprint"] != actual["final_model_fingerprint"]:
            yield "final model fingerprint mismatch"
