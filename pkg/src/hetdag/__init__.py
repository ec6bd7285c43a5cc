"""DAG structure learning with heteroscedastic noise models."""
from .estimator import HeteroscedasticDAGLearner
from .metrics import MetricsReport, au_prc, au_shdc, evaluate, shd
from .model import ModelParams, forward_mean, forward_std, grad_nll, init_params
from .trainer import AlmConfig, FitResult, TrainConfig, fit, threshold_and_repair

__all__ = [
    "AlmConfig",
    "FitResult",
    "HeteroscedasticDAGLearner",
    "MetricsReport",
    "ModelParams",
    "TrainConfig",
    "au_prc",
    "au_shdc",
    "evaluate",
    "fit",
    "forward_mean",
    "forward_std",
    "grad_nll",
    "init_params",
    "shd",
    "threshold_and_repair",
]
