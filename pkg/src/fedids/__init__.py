"""Federated intrusion-detection workbench.

Per-packet features extracted from network captures feed a small
from-scratch neural classifier trained across simulated clients with
weight averaging, optionally poisoned by flipping one client's labels.
"""

__version__ = "0.1.0"

from .attack import AttackSpec, FlipOutcome, apply_label_flip
from .dataset import Dataset, PacketRecord, assemble, derive_labels, drop_nulls, load_csv
from .errors import FedidsError
from .federation import FederationConfig, partition, run_experiment, run_round
from .metrics import ConfusionMatrix, MetricsReport, Scores, confusion, evaluate, scores
from .nn import (
    AdamHyper,
    LayerSpec,
    LocalTrainConfig,
    ModelParams,
    default_layer_specs,
    init_params,
    predict_classes,
    train_local,
)
from .preprocess import ScalerParams, SplitResult, fit_scaler, one_hot, split, transform
from .rng import RngStream, derive_seed

__all__ = [
    "AdamHyper",
    "AttackSpec",
    "ConfusionMatrix",
    "Dataset",
    "FederationConfig",
    "FedidsError",
    "FlipOutcome",
    "LayerSpec",
    "LocalTrainConfig",
    "MetricsReport",
    "ModelParams",
    "PacketRecord",
    "RngStream",
    "ScalerParams",
    "Scores",
    "SplitResult",
    "apply_label_flip",
    "assemble",
    "confusion",
    "default_layer_specs",
    "derive_labels",
    "derive_seed",
    "drop_nulls",
    "evaluate",
    "fit_scaler",
    "init_params",
    "load_csv",
    "one_hot",
    "partition",
    "predict_classes",
    "run_experiment",
    "run_round",
    "scores",
    "split",
    "train_local",
    "transform",
]
