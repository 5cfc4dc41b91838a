"""Promotion time cure models with feedforward-network predictors."""

from .baseline import BaselinePartition, build_partition
from .data import Dataset, SurvivalFrame, TabularSchema, load_csv, write_csv
from .metrics import auc_cure, bootstrap_metrics, evaluate, integrated_brier, kaplan_meier
from .model import CureModel, load_model, save_model
from .network import LayerSpec
from .optim import OptimizerConfig
from .preprocessing import Preprocessor
from .simulation import ScenarioSpec, generate_dataset, run_replications
from .training import TrainConfig, fit, random_search

__version__ = "0.1.0"

__all__ = [
    "BaselinePartition",
    "CureModel",
    "Dataset",
    "LayerSpec",
    "OptimizerConfig",
    "Preprocessor",
    "ScenarioSpec",
    "SurvivalFrame",
    "TabularSchema",
    "TrainConfig",
    "auc_cure",
    "bootstrap_metrics",
    "build_partition",
    "evaluate",
    "fit",
    "generate_dataset",
    "integrated_brier",
    "kaplan_meier",
    "load_csv",
    "load_model",
    "random_search",
    "run_replications",
    "save_model",
    "write_csv",
]
