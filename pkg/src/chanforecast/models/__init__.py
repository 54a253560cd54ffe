from .estimator import NeuralForecaster
from .layers import (
    effective_weight,
    init_params,
    low_rank_dim,
    low_rank_factorize,
    mlp_backward,
    mlp_forward,
)
from .losses import loss
from .training import (
    ModelSpec,
    TrainConfig,
    TrainedModel,
    fit,
    train_cd,
    train_ci,
    train_prreg,
)

__all__ = [
    "NeuralForecaster",
    "ModelSpec",
    "TrainConfig",
    "TrainedModel",
    "fit",
    "train_cd",
    "train_ci",
    "train_prreg",
    "loss",
    "mlp_forward",
    "mlp_backward",
    "low_rank_dim",
    "low_rank_factorize",
    "init_params",
    "effective_weight",
]
