"""Min-max scaling, seeded shuffled train/test split, one-hot labels.

The scaler is fitted once on the full feature matrix before splitting,
replicating the reference pipeline (which is known to leak test-range
information into the scaler; fit on the training partition instead by
fitting after `split` if that matters for your use).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .errors import InputError
from .rng import RngStream


@dataclass(frozen=True)
class ScalerParams:
    """Per-feature min/max captured at fit time."""

    feature_min: np.ndarray
    feature_max: np.ndarray


def fit_scaler(features) -> ScalerParams:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise InputError("features must be a non-empty matrix")
    if not np.isfinite(x).all():
        raise InputError("features contain non-finite values")
    return ScalerParams(x.min(axis=0), x.max(axis=0))


def transform(scaler: ScalerParams, features) -> np.ndarray:
    """x' = (x - min) / (max - min) per column; constant columns map to 0."""
    x = np.asarray(features, dtype=np.float64)
    span = scaler.feature_max - scaler.feature_min
    safe = np.where(span == 0.0, 1.0, span)
    out = (x - scaler.feature_min) / safe
    out[:, span == 0.0] = 0.0
    return out


@dataclass
class SplitResult:
    train: Dataset
    test: Dataset
    permutation: np.ndarray  # row order applied before cutting off the test tail


def split(dataset: Dataset, test_fraction: float, seed: int) -> SplitResult:
    """Shuffle rows with a seeded permutation; the last ceil(fraction * n)
    rows become the test set, the rest the training set."""
    n = len(dataset)
    if n < 2:
        raise InputError("need at least two rows to split")
    if not 0.0 < test_fraction < 1.0:
        raise InputError("test_fraction must lie in (0, 1)")
    n_test = math.ceil(test_fraction * n)
    if n_test >= n:
        raise InputError("test_fraction leaves no training rows")
    perm = RngStream(seed).generator().permutation(n)
    return SplitResult(
        train=dataset.take(perm[: n - n_test]),
        test=dataset.take(perm[n - n_test :]),
        permutation=perm,
    )


def one_hot(labels) -> np.ndarray:
    """0 -> (1,0), 1 -> (0,1)."""
    y = np.asarray(labels)
    if y.ndim != 1:
        raise InputError("labels must be a vector")
    if not np.isin(y, (0, 1)).all():
        raise InputError("labels must be 0 or 1")
    return np.eye(2, dtype=np.float64)[y.astype(np.intp)]
