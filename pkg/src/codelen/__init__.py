"""codelen: compression bounds (in bits) for classification labels.

Prices the labels of a dataset, given the inputs, under seven coding
schemes — uniform, two-part, random-subspace, bits-back variational,
prequential, switch and self-switch — over pluggable prediction strategies
with deterministic seeded training, so every reported codelength is a valid
sender/receiver protocol that a decoder can replay bit-for-bit.
"""

from .codelength import (
    Codelength,
    accuracy,
    kahan_sum,
    log_loss_bits,
    mutual_info_gain,
    uniform_codelength,
)
from .dataset import LabeledDataset
from .errors import (
    CodelenError,
    ConfigError,
    NumericalError,
    VerificationError,
)
from .models import (
    DirichletModel,
    MlpModel,
    MlpSpec,
    TrainConfig,
    UniformModel,
    linear_spec,
    train,
)
from .prequential import (
    BlockResult,
    DirichletStrategy,
    MlpStrategy,
    PrequentialResult,
    Schedule,
    UniformStrategy,
    cumulative_curves,
    default_schedule,
    prequential_encode,
    receiver_verify,
)
from .subspace import (
    AffineSubspace,
    QuantizationSpec,
    sample_subspace,
    subspace_codelength,
    train_in_subspace,
    two_part_codelength,
)
from .switching import (
    SwitchPrior,
    SwitchSequence,
    optimal_switch,
    self_switch_encode,
    switch_codelength,
)
from .variational import (
    GaussianPrior,
    MeanFieldPosterior,
    bayes_codelength_oracle,
    kl_to_prior,
    train_variational,
    variational_objective,
)

__version__ = "0.1.0"

__all__ = [
    "AffineSubspace",
    "BlockResult",
    "Codelength",
    "CodelenError",
    "ConfigError",
    "DirichletModel",
    "DirichletStrategy",
    "GaussianPrior",
    "LabeledDataset",
    "MeanFieldPosterior",
    "MlpModel",
    "MlpSpec",
    "MlpStrategy",
    "NumericalError",
    "PrequentialResult",
    "QuantizationSpec",
    "Schedule",
    "SwitchPrior",
    "SwitchSequence",
    "TrainConfig",
    "UniformModel",
    "UniformStrategy",
    "VerificationError",
    "accuracy",
    "bayes_codelength_oracle",
    "cumulative_curves",
    "default_schedule",
    "kahan_sum",
    "kl_to_prior",
    "linear_spec",
    "log_loss_bits",
    "mutual_info_gain",
    "optimal_switch",
    "prequential_encode",
    "receiver_verify",
    "sample_subspace",
    "self_switch_encode",
    "subspace_codelength",
    "switch_codelength",
    "train",
    "train_in_subspace",
    "train_variational",
    "two_part_codelength",
    "uniform_codelength",
    "variational_objective",
]
