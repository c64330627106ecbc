"""Frame-wise dataset assembly, CNN and forest classifiers, evaluation."""

from .cnn import (
    CnnConfig,
    CnnModel,
    TrainConfig,
    gradient_check,
    load_model,
    save_model,
    train_cnn,
)
from .dataset import PatchDataset, PatchSample, assemble_framewise, container_feature_data
from .evaluate import EvalReport, kfold_evaluate, kfold_evaluate_forest, metrics
from .forest import ForestModel, train_forest

__all__ = [
    "CnnConfig",
    "CnnModel",
    "EvalReport",
    "ForestModel",
    "PatchDataset",
    "PatchSample",
    "TrainConfig",
    "assemble_framewise",
    "container_feature_data",
    "gradient_check",
    "kfold_evaluate",
    "kfold_evaluate_forest",
    "load_model",
    "metrics",
    "save_model",
    "train_cnn",
]
