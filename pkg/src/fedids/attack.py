"""Label-flipping data poisoning against one client's shard.

Rows whose source port matches the attack predicate get their label
forced to benign (0) before local training starts.  The default
predicate compares the raw (unscaled) port against a target port;
`scaled_value_match` reproduces the brittle variant that compares the
min-max-scaled port, rounded to a fixed number of decimals, against a
literal constant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .errors import InputError, StateError
from .preprocess import ScalerParams, transform

RAW_PORT_MATCH = "raw_port_match"
SCALED_VALUE_MATCH = "scaled_value_match"


@dataclass(frozen=True)
class AttackSpec:
    """Which client to poison and how rows are matched."""

    target_client: int = 0
    match_port: int = 23
    mode: str = RAW_PORT_MATCH
    scaled_value: float = 0.000361
    scaled_decimals: int = 6
    port_feature: str = "tcp_srcport"

    def __post_init__(self) -> None:
        if self.target_client < 0:
            raise InputError("target_client must be non-negative")
        if not 0 <= self.match_port <= 65535:
            raise InputError("match_port must lie in [0, 65535]")
        if self.mode not in (RAW_PORT_MATCH, SCALED_VALUE_MATCH):
            raise InputError(f"unknown attack mode {self.mode!r}")


@dataclass(frozen=True)
class FlipOutcome:
    """matched counts every row hitting the predicate; changed counts
    the labels actually flipped from 1 to 0."""

    matched: int
    changed: int


def apply_label_flip(
    train: Dataset,
    row_range: tuple[int, int],
    spec: AttackSpec,
    scaler: ScalerParams | None = None,
) -> FlipOutcome:
    """Flip matching labels to 0 inside [start, end); rows outside are untouched.

    The dataset's label vector is mutated in place under exclusive
    access.  Reapplying the same flip reports changed=0.
    """
    start, end = row_range
    if not 0 <= start <= end <= len(train):
        raise InputError(f"row range [{start}, {end}) outside dataset of {len(train)}")
    try:
        col = train.feature_names.index(spec.port_feature)
    except ValueError:
        raise InputError(f"dataset has no feature {spec.port_feature!r}") from None

    if spec.mode == RAW_PORT_MATCH:
        values = train.features[start:end, col]
        match = np.rint(values).astype(np.int64) == spec.match_port
    else:
        if scaler is None:
            raise StateError("scaled_value_match requires a fitted scaler")
        scaled = transform(scaler, train.features[start:end])[:, col]
        match = np.round(scaled, spec.scaled_decimals) == spec.scaled_value

    matched = int(match.sum())
    flip_idx = start + np.nonzero(match)[0]
    changed = int((train.labels[flip_idx] == 1).sum())
    train.labels[flip_idx] = 0
    return FlipOutcome(matched=matched, changed=changed)
