from .base import ConditionalModel, TableModel, UniformModel, digest
from .dirichlet import DirichletModel, bayes_marginal_bits, sequential_codelength_bits
from .mlp import (
    MlpModel,
    MlpSpec,
    TrainConfig,
    forward_logits,
    gradient,
    init_params,
    linear_spec,
    load_model,
    loss_and_grad_bits,
    param_views,
    save_model,
    train,
)

__all__ = [
    "ConditionalModel",
    "DirichletModel",
    "MlpModel",
    "MlpSpec",
    "TableModel",
    "TrainConfig",
    "UniformModel",
    "bayes_marginal_bits",
    "digest",
    "forward_logits",
    "gradient",
    "init_params",
    "linear_spec",
    "load_model",
    "loss_and_grad_bits",
    "param_views",
    "save_model",
    "sequential_codelength_bits",
    "train",
]
