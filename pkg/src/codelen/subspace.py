"""Two-part codes: raw parameter encoding and the random-affine-subspace code.

The plain two-part code pays bits_per_param * dim(theta) up front and then
the data bits under the decoded model.  The subspace code instead trains
only k coordinates phi inside a seeded random affine subspace
theta0 + W.phi of the full parameter space; since the receiver can rebuild
theta0 and W from the shared seed, the parameter part shrinks to k*b bits
for a b-bit uniform grid over [-R, R] per coordinate.  The data term is
always evaluated at the quantized phi — that is the model the receiver
actually decodes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .codelength import Codelength, accuracy, log_loss_bits
from .dataset import LabeledDataset, check_range
from .errors import ConfigError
from .models import MlpModel, MlpSpec, TrainConfig
from .models.mlp import fit_params, init_params, loss_and_grad_bits
from .rng import derive_rng, derive_seed


@dataclass(frozen=True)
class AffineSubspace:
    """theta(phi) = theta0 + W.phi with unit-norm columns of W; W is d x k."""

    theta0: np.ndarray
    w: np.ndarray
    seed: int

    def __post_init__(self):
        theta0 = np.ascontiguousarray(self.theta0, dtype=np.float64)
        w = np.ascontiguousarray(self.w, dtype=np.float64)
        if theta0.ndim != 1 or w.ndim != 2 or w.shape[0] != theta0.size:
            raise ConfigError(
                f"need theta0 (d,) and w (d, k); got {theta0.shape} and {w.shape}"
            )
        if w.shape[1] > 0:
            norms = np.sqrt((w * w).sum(axis=0))
            if not np.allclose(norms, 1.0, rtol=0.0, atol=1e-9):
                raise ConfigError("subspace directions must have unit Euclidean norm")
        object.__setattr__(self, "theta0", theta0)
        object.__setattr__(self, "w", w)

    @property
    def full_dim(self) -> int:
        return self.theta0.size

    @property
    def k(self) -> int:
        return self.w.shape[1]

    def lift(self, phi: np.ndarray) -> np.ndarray:
        if phi.shape != (self.k,):
            raise ConfigError(f"phi must have shape ({self.k},), got {phi.shape}")
        return self.theta0 + np.dot(self.w, phi)


def sample_subspace(family: MlpSpec, k: int, omega: int) -> AffineSubspace:
    """Seeded subspace: theta0 is the family's seeded init and W has Gaussian
    entries with columns normalized to unit length (so b-bit grids are
    comparable across k).  Everything reconstructs from omega alone."""
    if not 0 <= k <= family.n_params:
        raise ConfigError(f"k must be in [0, {family.n_params}], got {k}")
    theta0 = init_params(family.with_seed(derive_seed(omega, "subspace-theta0")))
    rng = derive_rng(omega, "subspace-directions")
    w = rng.standard_normal((family.n_params, k))
    if k > 0:
        w /= np.sqrt((w * w).sum(axis=0))
    return AffineSubspace(theta0, w, omega)


@dataclass(frozen=True)
class QuantizationSpec:
    """b-bit uniform grid of cell centers over [-range, range] per coordinate."""

    bits_per_coord: int = 32
    grid_range: float = 1.0

    def __post_init__(self):
        if self.bits_per_coord < 1:
            raise ConfigError("bits_per_coord must be >= 1")
        if not self.grid_range > 0:
            raise ConfigError("grid_range must be positive")

    @property
    def n_cells(self) -> int:
        return 1 << self.bits_per_coord

    @property
    def cell_width(self) -> float:
        return 2.0 * self.grid_range / self.n_cells


def quantize(phi: np.ndarray, quant: QuantizationSpec) -> tuple[np.ndarray, np.ndarray, int]:
    """(grid indices, reconstructed values, number of clamped coordinates).

    Coordinates outside [-R, R] are clamped to the boundary cells with a
    warning; the receiver reads the k*b index bits and rebuilds the same
    values with dequantize."""
    phi = np.asarray(phi, dtype=np.float64)
    r, h = quant.grid_range, quant.cell_width
    clamped = int(np.count_nonzero((phi < -r) | (phi > r)))
    if clamped:
        warnings.warn(
            f"{clamped} subspace coordinate(s) outside [-{r}, {r}] were clamped",
            stacklevel=2,
        )
    idx = np.floor((np.clip(phi, -r, r) + r) / h).astype(np.int64)
    np.clip(idx, 0, quant.n_cells - 1, out=idx)
    return idx, dequantize(idx, quant), clamped


def dequantize(indices: np.ndarray, quant: QuantizationSpec) -> np.ndarray:
    r, h = quant.grid_range, quant.cell_width
    return -r + (np.asarray(indices, dtype=np.float64) + 0.5) * h


def two_part_codelength(model, data: LabeledDataset, bits_per_param: int = 32) -> Codelength:
    """Raw parameter encoding (b bits each) followed by the data bits."""
    if bits_per_param < 0:
        raise ConfigError("bits_per_param must be >= 0")
    dim = getattr(model, "dim", 0)
    return Codelength.from_breakdown(
        [
            ("parameters", float(bits_per_param) * dim),
            ("data", log_loss_bits(model, data)),
        ]
    )


def train_in_subspace(
    family: MlpSpec,
    sub: AffineSubspace,
    config: TrainConfig,
    data: LabeledDataset,
    idx_range: tuple[int, int] | None = None,
) -> np.ndarray:
    """Gradient descent on phi, gradients pulled back through W (W^T grad).

    Deterministic given the seeds; with k = full dim, W = identity and
    theta0 = 0 the trajectory is bit-identical to full-space training from a
    zero init with the same config."""
    if sub.full_dim != family.n_params:
        raise ConfigError(
            f"subspace lives in dim {sub.full_dim}, family has {family.n_params} parameters"
        )
    start, end = check_range(data, idx_range)
    x = data.inputs[start:end]
    y = data.labels[start:end]
    grad_buf = np.empty(family.n_params, dtype=np.float64)

    def value_grad(phi, idx, rng):
        theta = sub.lift(phi)
        loss, g_theta = loss_and_grad_bits(
            family, theta, x[idx], y[idx], mean=True,
            dropout_rng=rng if family.dropout_prob > 0 else None, grad_out=grad_buf,
        )
        return loss, np.dot(sub.w.T, g_theta)

    rng = derive_rng(config.seed, "train")
    return fit_params(value_grad, np.zeros(sub.k), end - start, config, rng)


def subspace_model(family: MlpSpec, sub: AffineSubspace, phi: np.ndarray) -> MlpModel:
    return MlpModel(family, sub.lift(np.asarray(phi, dtype=np.float64)))


def subspace_codelength(
    family: MlpSpec,
    sub: AffineSubspace,
    phi: np.ndarray,
    quant: QuantizationSpec,
    data: LabeledDataset,
) -> tuple[Codelength, np.ndarray]:
    """k*b parameter bits plus the data bits at the quantized coordinates.

    Returns the codelength and the quantized phi the receiver decodes."""
    _, phi_hat, _ = quantize(np.asarray(phi, dtype=np.float64), quant)
    model = subspace_model(family, sub, phi_hat)
    code = Codelength.from_breakdown(
        [
            ("parameters", float(sub.k) * quant.bits_per_coord),
            ("data", log_loss_bits(model, data)),
        ]
    )
    return code, phi_hat


def sweep_subspace(
    family: MlpSpec,
    data: LabeledDataset,
    config: TrainConfig,
    omega: int,
    ks,
    bs,
    grid_range: float = 1.0,
    test_data: LabeledDataset | None = None,
) -> list[dict]:
    """Train once per k, then price every (k, b) cell; rows ready for CSV."""
    from .codelength import uniform_codelength

    uniform = uniform_codelength(data.n, data.n_classes)
    rows = []
    for k in ks:
        sub = sample_subspace(family, int(k), omega)
        phi = train_in_subspace(family, sub, config, data)
        for b in bs:
            quant = QuantizationSpec(int(b), grid_range)
            code, phi_hat = subspace_codelength(family, sub, phi, quant, data)
            model = subspace_model(family, sub, phi_hat)
            rows.append(
                {
                    "k": int(k),
                    "b": int(b),
                    "param_bits": code.component("parameters"),
                    "data_bits": code.component("data"),
                    "total_bits": code.total_bits,
                    "ratio": code.total_bits / uniform,
                    "train_accuracy": accuracy(model, data),
                    "test_accuracy": accuracy(model, test_data) if test_data is not None else None,
                }
            )
    return rows
