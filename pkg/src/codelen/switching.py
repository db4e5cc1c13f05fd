"""Switch codes: let the active model change at block boundaries.

A switch sequence assigns one model from a pool to each contiguous run of
schedule blocks; the code first pays for the sequence under an explicit
prefix-free prior, then pays each block's bits under its assigned model.
The prior used here (segment count via an Elias-gamma-style length code,
switch points and model indices uniform) is Kraft-valid by construction and
negligible next to the data terms.

`optimal_switch` finds the exact minimizer by dynamic programming; the
brute-force enumerator is kept alongside as its oracle.  Both accumulate
block bits right-to-left so their totals agree bit-for-bit, and both break
ties toward fewer segments, then the lexicographically smallest
(start, model) sequence.

Self-switch restricts the pool to one architecture at different numbers of
training epochs: at each block the sender picks the best epoch count for the
next block and pays log2(max_epochs+1) bits to transmit the choice.  Epoch
count 0 stands for the untrained default and is priced as the exactly
uniform model, which caps every block at block_size*log2(K) plus the choice
cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

from .codelength import Codelength, accuracy, log_loss_bits, uniform_codelength
from .dataset import LabeledDataset
from .errors import ConfigError, VerificationError
from .models import MlpModel, MlpSpec, TrainConfig, UniformModel
from .models.mlp import fit_params_snapshots, init_params, loss_and_grad_bits
from .prequential import BlockResult, PrequentialResult, Schedule
from .rng import derive_rng, derive_seed


def elias_gamma_bits(value: int) -> float:
    """Prefix-free codelength for a positive integer: 2*floor(log2 v) + 1."""
    if value < 1:
        raise ConfigError(f"Elias gamma codes positive integers, got {value}")
    return 2.0 * math.floor(math.log2(value)) + 1.0


@dataclass(frozen=True)
class SwitchPrior:
    """Costs (in bits) of the three parts of a switch-sequence encoding."""

    bits_per_switch_point: float
    bits_per_model_index: float

    def __post_init__(self):
        if self.bits_per_switch_point < 0 or self.bits_per_model_index < 0:
            raise ConfigError("prior component costs must be non-negative")

    @classmethod
    def for_pool(cls, n_blocks: int, n_models: int) -> "SwitchPrior":
        if n_blocks < 1 or n_models < 1:
            raise ConfigError("need at least one block and one model")
        return cls(math.log2(n_blocks), math.log2(n_models))

    def segment_count_bits(self, n_segments: int) -> float:
        return elias_gamma_bits(n_segments)

    def sequence_bits(self, n_segments: int) -> float:
        return (
            self.segment_count_bits(n_segments)
            + (n_segments - 1) * self.bits_per_switch_point
            + n_segments * self.bits_per_model_index
        )


@dataclass(frozen=True)
class SwitchSequence:
    """((start_block, model_index), ...); first start is always block 0."""

    segments: tuple[tuple[int, int], ...]

    def __post_init__(self):
        segs = tuple((int(s), int(m)) for s, m in self.segments)
        if not segs:
            raise ConfigError("switch sequence needs at least one segment")
        if segs[0][0] != 0:
            raise ConfigError(f"first segment must start at block 0, got {segs[0][0]}")
        starts = [s for s, _ in segs]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ConfigError(f"segment starts must be strictly increasing: {starts}")
        if any(m < 0 for _, m in segs):
            raise ConfigError("model indices must be non-negative")
        object.__setattr__(self, "segments", segs)

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    def model_per_block(self, n_blocks: int) -> np.ndarray:
        if self.segments[-1][0] >= n_blocks:
            raise ConfigError(
                f"segment starts at block {self.segments[-1][0]} but there are {n_blocks} blocks"
            )
        out = np.empty(n_blocks, dtype=np.int64)
        bounds = [s for s, _ in self.segments] + [n_blocks]
        for (start, model), end in zip(self.segments, bounds[1:]):
            out[start:end] = model
        return out

    def as_list(self) -> list[list[int]]:
        return [list(seg) for seg in self.segments]


def _check_matrix(per_block_bits) -> np.ndarray:
    m = np.asarray(per_block_bits, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ConfigError(f"per-block bits must be (models, blocks), got shape {m.shape}")
    if not np.all(np.isfinite(m)) or np.any(m < 0):
        raise ConfigError("per-block bits must be finite and non-negative")
    return m


def _data_bits(matrix: np.ndarray, assignment: np.ndarray) -> float:
    # Right-to-left fold; the DP accumulates suffix costs in the same order,
    # so optimal totals match the enumeration oracle bit-for-bit.
    acc = 0.0
    for b in range(matrix.shape[1] - 1, -1, -1):
        acc = matrix[assignment[b], b] + acc
    return acc


def switch_codelength(
    per_block_bits, seq: SwitchSequence, prior: SwitchPrior
) -> Codelength:
    """Sequence cost under the prior plus the assigned models' block bits."""
    matrix = _check_matrix(per_block_bits)
    n_models, n_blocks = matrix.shape
    assignment = seq.model_per_block(n_blocks)
    if assignment.max() >= n_models:
        raise ConfigError(f"sequence uses model {assignment.max()}, pool has {n_models}")
    return Codelength.from_breakdown(
        [
            ("switch_sequence", prior.sequence_bits(seq.n_segments)),
            ("data", _data_bits(matrix, assignment)),
        ]
    )


def optimal_switch(
    per_block_bits, prior: SwitchPrior | None = None
) -> tuple[SwitchSequence, Codelength]:
    """Exact minimizer of the switch codelength by dynamic programming.

    Ties are broken toward fewer segments, then the lexicographically
    smallest (start, model) sequence; the result is deterministic.
    """
    matrix = _check_matrix(per_block_bits)
    n_models, n_blocks = matrix.shape
    if prior is None:
        prior = SwitchPrior.for_pool(n_blocks, n_models)

    # suffix[l][b][m]: min data bits of blocks b.. with exactly l segments
    # remaining, the current one (model m) having started at or before b.
    max_l = n_blocks
    suffix = np.full((max_l + 1, n_blocks + 1, n_models), math.inf)
    suffix[0, n_blocks, :] = 0.0
    for b in range(n_blocks - 1, -1, -1):
        for l in range(1, max_l + 1):
            for m in range(n_models):
                cont = suffix[l, b + 1, m]
                best_next = cont
                if l >= 2:
                    sw = suffix[l - 1, b + 1, :].min()
                    if sw < best_next:
                        best_next = sw
                if np.isfinite(best_next):
                    suffix[l, b, m] = matrix[m, b] + best_next

    best_total, best_l, best_m0 = None, None, None
    for l in range(1, max_l + 1):
        data = suffix[l, 0, :].min()
        if not np.isfinite(data):
            continue
        total = prior.sequence_bits(l) + data
        if best_total is None or total < best_total:
            best_total = total
            best_l = l
            best_m0 = int(np.argmin(suffix[l, 0, :]))
    assert best_total is not None

    # Lex-smallest reconstruction: at each boundary prefer switching as early
    # as possible to the smallest model index that still attains the optimum.
    segments = [(0, best_m0)]
    m, l = best_m0, best_l
    value = suffix[best_l, 0, best_m0]
    for b in range(n_blocks - 1):
        switched_to = None
        if l >= 2:
            for m2 in range(n_models):
                if matrix[m, b] + suffix[l - 1, b + 1, m2] == value:
                    switched_to = m2
                    break
        if switched_to is not None:
            segments.append((b + 1, switched_to))
            value = suffix[l - 1, b + 1, switched_to]
            m, l = switched_to, l - 1
        else:
            assert matrix[m, b] + suffix[l, b + 1, m] == value, (
                "DP reconstruction lost the optimal path"
            )
            value = suffix[l, b + 1, m]
    seq = SwitchSequence(tuple(segments))
    return seq, switch_codelength(matrix, seq, prior)


def enumerate_sequences(n_blocks: int, n_models: int):
    """All switch sequences in the canonical tie-break order."""
    for n_segments in range(1, n_blocks + 1):
        for starts in combinations(range(1, n_blocks), n_segments - 1):
            for models in product(range(n_models), repeat=n_segments):
                yield SwitchSequence(tuple(zip((0,) + starts, models)))


def brute_force_switch(
    per_block_bits, prior: SwitchPrior | None = None
) -> tuple[SwitchSequence, Codelength]:
    """Exhaustive oracle for optimal_switch (small instances only)."""
    matrix = _check_matrix(per_block_bits)
    n_models, n_blocks = matrix.shape
    if prior is None:
        prior = SwitchPrior.for_pool(n_blocks, n_models)
    best = None
    for seq in sorted(
        enumerate_sequences(n_blocks, n_models), key=lambda s: (s.n_segments, s.segments)
    ):
        assignment = seq.model_per_block(n_blocks)
        total = prior.sequence_bits(seq.n_segments) + _data_bits(matrix, assignment)
        if best is None or total < best[0]:
            best = (total, seq)
    seq = best[1]
    return seq, switch_codelength(matrix, seq, prior)


def prior_kraft_sum(prior: SwitchPrior, n_blocks: int, n_models: int) -> float:
    """Sum of 2^-bits over every sequence; <= 1 certifies a valid prior."""
    return sum(
        2.0 ** -(prior.sequence_bits(seq.n_segments))
        for seq in enumerate_sequences(n_blocks, n_models)
    )


def block_bits_matrix(results: list[PrequentialResult]) -> np.ndarray:
    """Stack per-block bits from prequential passes sharing one schedule."""
    if not results:
        raise ConfigError("need at least one prequential result")
    schedule = results[0].schedule
    for r in results[1:]:
        if r.schedule.timesteps != schedule.timesteps:
            raise ConfigError("all pool members must share the same schedule")
    return np.array([[b.bits for b in r.blocks] for r in results], dtype=np.float64)


@dataclass
class SelfSwitchResult:
    codelength: Codelength
    blocks: list[BlockResult]
    chosen_epochs: list[int]
    per_epoch_bits: list[list[float]]
    schedule: Schedule
    omega: int
    max_epochs: int
    n_classes: int
    spec: MlpSpec
    config: TrainConfig

    def as_dict(self) -> dict:
        return {
            "codelength": self.codelength.as_dict(),
            "blocks": [b.as_dict() for b in self.blocks],
            "chosen_epochs": list(self.chosen_epochs),
            "per_epoch_bits": [list(v) for v in self.per_epoch_bits],
            "schedule": list(self.schedule.timesteps),
            "omega": self.omega,
            "max_epochs": self.max_epochs,
            "n_classes": self.n_classes,
            "spec": self.spec.as_dict(),
            "train": self.config.as_dict(),
        }


def self_switch_encode(
    spec: MlpSpec,
    config: TrainConfig,
    data: LabeledDataset,
    schedule: Schedule,
    max_epochs: int,
    omega: int,
) -> SelfSwitchResult:
    """Prequential encoding that also transmits, per block, the best epoch count.

    For each block the sender trains on the prefix, snapshots the parameters
    after every epoch j in 1..max_epochs, prices the block under each
    snapshot and under the exactly uniform model (j=0), transmits the argmin
    j for log2(max_epochs+1) bits, then the block under that choice.
    """
    if max_epochs < 0:
        raise ConfigError("max_epochs must be >= 0")
    schedule.validate_for(data.n)
    k = data.n_classes
    t1 = schedule.timesteps[0]
    uniform = UniformModel(k)
    choice_bits = math.log2(max_epochs + 1)

    prefix_bits = uniform_codelength(t1, k)
    blocks = [BlockResult(0, 0, t1, prefix_bits, 1.0 / k, uniform.fingerprint())]
    items: list[tuple[str, float]] = [("uniform_prefix", prefix_bits)]
    chosen_epochs: list[int] = []
    per_epoch_bits: list[list[float]] = []

    for s in range(1, schedule.n_blocks):
        lo, hi = schedule.block_interval(s)
        block_spec = spec.with_seed(derive_seed(omega, "init", s))
        x, y = data.inputs[:lo], data.labels[:lo]
        grad_buf = np.empty(block_spec.n_params, dtype=np.float64)

        def value_grad(params, idx, rng):
            return loss_and_grad_bits(
                block_spec, params, x[idx], y[idx], mean=True,
                dropout_rng=rng if block_spec.dropout_prob > 0 else None,
                grad_out=grad_buf,
            )

        rng = derive_rng(derive_seed(omega, "sgd", s), "train")
        snapshots = fit_params_snapshots(
            value_grad, init_params(block_spec), lo, config.with_epochs(max_epochs), rng
        )
        options: list[tuple[float, object]] = [
            (uniform_codelength(hi - lo, k), uniform)
        ]
        for params in snapshots:
            model = MlpModel(block_spec, params)
            options.append((log_loss_bits(model, data, (lo, hi)), model))
        bits_per_epoch = [bits for bits, _ in options]
        best_j = min(range(len(options)), key=lambda j: (options[j][0], j))
        best_bits, best_model = options[best_j]

        chosen_epochs.append(best_j)
        per_epoch_bits.append(bits_per_epoch)
        acc = accuracy(best_model, data, (lo, hi)) if best_j > 0 else 1.0 / k
        blocks.append(BlockResult(s, lo, hi, best_bits, acc, best_model.fingerprint()))
        items.append((f"epoch_choice_{s}", choice_bits))
        items.append((f"block_{s}", best_bits))

    return SelfSwitchResult(
        codelength=Codelength.from_breakdown(items),
        blocks=blocks,
        chosen_epochs=chosen_epochs,
        per_epoch_bits=per_epoch_bits,
        schedule=schedule,
        omega=omega,
        max_epochs=max_epochs,
        n_classes=k,
        spec=spec,
        config=config,
    )


def self_switch_verify(
    spec: MlpSpec,
    config: TrainConfig,
    data: LabeledDataset,
    schedule: Schedule,
    max_epochs: int,
    omega: int,
    expected: dict,
) -> None:
    """Receiver simulation for the self-switch code."""
    decoded = self_switch_encode(spec, config, data, schedule, max_epochs, omega)
    actual = decoded.as_dict()
    mismatches = []
    if actual["chosen_epochs"] != list(expected["chosen_epochs"]):
        mismatches.append(
            f"chosen epochs {actual['chosen_epochs']} != expected {expected['chosen_epochs']}"
        )
    for eb, ab in zip(expected["blocks"], actual["blocks"]):
        if eb["model_fingerprint"] != ab["model_fingerprint"]:
            mismatches.append(f"block {eb['index']}: model fingerprint mismatch")
        if eb["bits"] != ab["bits"]:
            mismatches.append(f"block {eb['index']}: bits mismatch")
    if expected["codelength"]["total_bits"] != actual["codelength"]["total_bits"]:
        mismatches.append("total bits mismatch")
    if mismatches:
        raise VerificationError(mismatches)
