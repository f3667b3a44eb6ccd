"""Confusion counts and classification scores with support-weighted averaging.

Accuracy is (TP+TN)/total with malware (label 1) as the positive class.
Precision, recall and f1 are computed per class and then weighted by
class support; that convention makes weighted recall identical to
accuracy, which the score tables rely on.  Per-class ratios are formed
in exact rational arithmetic so the identity holds bit-for-bit.  An
undefined per-class score (zero denominator) contributes 0 and sets a
warning flag on the result.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import nn
from .attack import FlipOutcome
from .dataset import Dataset
from .errors import InputError, StateError
from .preprocess import ScalerParams, one_hot, transform


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with class 1 (malware) as positive."""

    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def confusion(predicted, true) -> ConfusionMatrix:
    pred = np.asarray(predicted)
    truth = np.asarray(true)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise InputError("prediction and truth vectors must have equal length")
    if not (np.isin(pred, (0, 1)).all() and np.isin(truth, (0, 1)).all()):
        raise InputError("labels must be 0 or 1")
    return ConfusionMatrix(
        tp=int(((pred == 1) & (truth == 1)).sum()),
        tn=int(((pred == 0) & (truth == 0)).sum()),
        fp=int(((pred == 1) & (truth == 0)).sum()),
        fn=int(((pred == 0) & (truth == 1)).sum()),
    )


@dataclass(frozen=True)
class Scores:
    accuracy: float
    precision: float
    recall: float
    f1: float
    undefined: bool = False  # some per-class score had a zero denominator


def _class_scores(tp: int, fp: int, fn: int):
    """(precision, recall, f1, undefined) for one class, as exact fractions."""
    undefined = False
    if tp + fp > 0:
        precision = Fraction(tp, tp + fp)
    else:
        precision, undefined = Fraction(0), True
    if tp + fn > 0:
        recall = Fraction(tp, tp + fn)
    else:
        recall, undefined = Fraction(0), True
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1, undefined = Fraction(0), True
    return precision, recall, f1, undefined


def scores(cm: ConfusionMatrix) -> Scores:
    total = cm.total
    if total <= 0:
        raise InputError("cannot score an empty evaluation set")
    # Class 1 as positive, then class 0 as positive.
    p1, r1, f1_1, u1 = _class_scores(cm.tp, cm.fp, cm.fn)
    p0, r0, f1_0, u0 = _class_scores(cm.tn, cm.fn, cm.fp)
    support1 = cm.tp + cm.fn
    support0 = cm.tn + cm.fp
    accuracy = Fraction(cm.tp + cm.tn, total)
    weighted = lambda a, b: (support0 * a + support1 * b) / total
    return Scores(
        accuracy=float(accuracy),
        precision=float(weighted(p0, p1)),
        recall=float(weighted(r0, r1)),
        f1=float(weighted(f1_0, f1_1)),
        undefined=u0 or u1,
    )


@dataclass(frozen=True)
class EvalResult:
    test_accuracy: float
    test_loss: float


def evaluate(params: nn.ModelParams, scaler: Optional[ScalerParams], test: Dataset) -> EvalResult:
    """Inference-mode accuracy and loss on a raw-feature test set."""
    if len(test) == 0:
        raise InputError("test set is empty")
    if scaler is None:
        raise StateError("evaluate requires a fitted scaler")
    x = transform(scaler, test.features)
    probs, _ = nn.forward(params, x)
    pred = np.argmax(probs, axis=1)
    accuracy = float(np.mean(pred == test.labels))
    loss = nn.compute_loss(probs, one_hot(test.labels))
    return EvalResult(test_accuracy=accuracy, test_loss=loss)


@dataclass
class IterationMetrics:
    """Training-set scores of the aggregated model after one federated round."""

    iteration: int
    accuracy: float
    precision: float
    recall: float
    f1: float
    undefined: bool
    client_losses: list[float]
    checkpoint: Optional[str] = None


@dataclass
class MetricsReport:
    """Everything one experiment run produced."""

    experiment_id: int
    seed: int
    config: dict
    config_hash: str
    iterations: list[IterationMetrics] = field(default_factory=list)
    test_accuracy: float = 0.0
    test_loss: float = 0.0
    attack: Optional[FlipOutcome] = None

    def to_dict(self) -> dict:
        return {
            "experiment_id": self.experiment_id,
            "seed": self.seed,
            "config": self.config,
            "config_hash": self.config_hash,
            "iterations": [
                {
                    "iteration": it.iteration,
                    "accuracy": it.accuracy,
                    "precision": it.precision,
                    "recall": it.recall,
                    "f1": it.f1,
                    "undefined_scores": it.undefined,
                    "client_losses": it.client_losses,
                    "checkpoint": it.checkpoint,
                }
                for it in self.iterations
            ],
            "final": {"test_accuracy": self.test_accuracy, "test_loss": self.test_loss},
            "attack": (
                {"matched": self.attack.matched, "changed": self.attack.changed}
                if self.attack is not None
                else None
            ),
        }

    def final_training_scores(self) -> IterationMetrics:
        if not self.iterations:
            raise InputError("report holds no iterations")
        return self.iterations[-1]
