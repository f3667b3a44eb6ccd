"""Cross-device federated training simulation.

One experiment: partition the (already shuffled) training rows into
contiguous client shards plus a server reserve, pretrain the global
model on the reserve, then repeat for each iteration: every client
trains the current global model locally with a fresh optimiser, and the
server replaces each parameter with the unweighted mean of the client
results.  Training-set scores of the aggregated model are recorded per
iteration, test accuracy/loss once at the end.

Every client owns a private random stream keyed by (seed, client_id,
iteration), so results do not depend on execution order; aggregation
sums in an order-independent, exactly rounded way (math.fsum), making
the average invariant under client permutation.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import nn
from .attack import AttackSpec, FlipOutcome, apply_label_flip
from .dataset import Dataset
from .errors import AggregationError, InputError
from .metrics import (
    EvalResult,
    IterationMetrics,
    MetricsReport,
    confusion,
    evaluate,
    scores,
)
from .preprocess import ScalerParams, SplitResult, transform
from .rng import RngStream


@dataclass(frozen=True)
class ClientPartition:
    client_id: int
    start: int
    end: int  # exclusive


@dataclass(frozen=True)
class PartitionPlan:
    clients: tuple[ClientPartition, ...]
    server_start: int
    server_end: int


@dataclass(frozen=True)
class FederationConfig:
    n_clients: int = 4
    iterations: int = 50
    local: nn.LocalTrainConfig = nn.LocalTrainConfig()
    # None reproduces the interval rule: clients get floor(n/(clients+1))
    # rows each and the server the remaining ~20% tail.
    pretrain_fraction: Optional[float] = None
    overlap_pretrain: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_clients < 1:
            raise InputError("n_clients must be >= 1")
        if self.iterations < 1:
            raise InputError("iterations must be >= 1")
        if self.pretrain_fraction is not None and not 0.0 <= self.pretrain_fraction < 1.0:
            raise InputError("pretrain_fraction must lie in [0, 1)")


def partition(
    train_size: int,
    n_clients: int,
    pretrain_fraction: Optional[float] = None,
    overlap: bool = False,
) -> PartitionPlan:
    """Contiguous client shards plus the server pretraining reserve.

    Default rule: shard size s = floor(train_size / (n_clients + 1)),
    client i holds [i*s, (i+1)*s) and the trailing remainder is the
    server reserve.  With `overlap`, the reserve moves to the head of
    the data (same size), overlapping client shards, which stay put.
    """
    if n_clients < 1:
        raise InputError("n_clients must be >= 1")
    if pretrain_fraction is None:
        if train_size < n_clients + 1:
            raise InputError(
                f"{train_size} training rows cannot feed {n_clients} clients plus the server"
            )
        shard = train_size // (n_clients + 1)
    else:
        if not 0.0 <= pretrain_fraction < 1.0:
            raise InputError("pretrain_fraction must lie in [0, 1)")
        shard = math.floor(train_size * (1.0 - pretrain_fraction) / n_clients)
        if shard < 1:
            raise InputError("pretrain_fraction leaves clients without data")
    clients = tuple(
        ClientPartition(i, i * shard, (i + 1) * shard) for i in range(n_clients)
    )
    reserve = train_size - n_clients * shard
    if overlap:
        server_start, server_end = 0, reserve
    else:
        server_start, server_end = n_clients * shard, train_size
    return PartitionPlan(clients, server_start, server_end)


def pretrain_server(
    features: np.ndarray,
    labels: np.ndarray,
    specs,
    local: nn.LocalTrainConfig,
    rng: RngStream,
) -> nn.ModelParams:
    """Fresh initialisation plus one local training pass over the reserve."""
    if features.shape[0] == 0:
        raise InputError("server reserve is empty")
    params = nn.init_params(specs, rng.child(0))
    params, _ = nn.train_local(params, features, labels, local, rng.child(1))
    return params


def average_params(models: Sequence[nn.ModelParams]) -> nn.ModelParams:
    """Unweighted mean of client parameters, exact and order-independent."""
    first = models[0]
    for m in models[1:]:
        if m.specs != first.specs:
            raise AggregationError("client models disagree on layer geometry")
    count = len(models)

    def mean_of(tensors):
        stack = np.stack(tensors, axis=0)
        flat = stack.reshape(count, -1)
        summed = np.fromiter(
            (math.fsum(col) for col in flat.T), dtype=np.float64, count=flat.shape[1]
        )
        return (summed / count).reshape(stack.shape[1:])

    weights = [mean_of([m.weights[i] for m in models]) for i in range(len(first.weights))]
    biases = [mean_of([m.biases[i] for m in models]) for i in range(len(first.biases))]
    return nn.ModelParams(first.specs, weights, biases)


def run_round(
    global_params: nn.ModelParams,
    partitions: Sequence[ClientPartition],
    features: np.ndarray,
    labels: np.ndarray,
    local: nn.LocalTrainConfig,
    rngs: Sequence[RngStream],
    iteration: int = 0,
):
    """One federated iteration: local training on every shard, then averaging.

    Every client starts from an identical copy of the global model and a
    fresh optimiser.  Returns the aggregated model and the round trace
    (per-client final losses plus training-set scores of the aggregate).
    """
    if not partitions:
        raise InputError("no client partitions")
    if len(rngs) != len(partitions):
        raise InputError("one rng stream per client is required")
    results = []
    losses = []
    for part, stream in zip(partitions, rngs):
        shard_x = features[part.start : part.end]
        shard_y = labels[part.start : part.end]
        updated, loss = nn.train_local(global_params, shard_x, shard_y, local, stream)
        results.append(updated)
        losses.append(loss)
    aggregated = average_params(results)
    pred = nn.predict_classes(aggregated, features)
    sc = scores(confusion(pred, labels))
    trace = IterationMetrics(
        iteration=iteration,
        accuracy=sc.accuracy,
        precision=sc.precision,
        recall=sc.recall,
        f1=sc.f1,
        undefined=sc.undefined,
        client_losses=losses,
    )
    return aggregated, trace


def config_hash(config: dict) -> str:
    return hashlib.sha256(
        json.dumps(config, sort_keys=True).encode("utf-8")
    ).hexdigest()


def _write_checkpoint(path, params, scaler, digest, iteration) -> None:
    doc = {
        "iteration": iteration,
        "config_hash": digest,
        "model": nn.params_to_dict(params),
        "scaler": {
            "feature_min": scaler.feature_min.tolist(),
            "feature_max": scaler.feature_max.tolist(),
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def run_experiment(
    split: SplitResult,
    scaler: ScalerParams,
    config: FederationConfig,
    attack: Optional[AttackSpec] = None,
    experiment_id: int = 1,
    config_echo: Optional[dict] = None,
    checkpoint_dir=None,
) -> MetricsReport:
    """Full experiment: optional poisoning, server pretraining, the
    iteration loop, and a final test evaluation."""
    train = split.train
    work_labels = train.labels.copy()
    working = Dataset(train.feature_names, train.features, work_labels, train.aux)

    plan = partition(
        len(train), config.n_clients, config.pretrain_fraction, config.overlap_pretrain
    )

    flip: Optional[FlipOutcome] = None
    if attack is not None:
        if attack.target_client >= config.n_clients:
            raise InputError("attack targets a client that does not exist")
        shard = plan.clients[attack.target_client]
        flip = apply_label_flip(working, (shard.start, shard.end), attack, scaler)

    x_train = transform(scaler, train.features)
    specs = nn.default_layer_specs(x_train.shape[1])

    base = RngStream(config.seed)
    server_stream = base.child(config.n_clients)  # client ids occupy 0..n-1
    if plan.server_end > plan.server_start:
        params = pretrain_server(
            x_train[plan.server_start : plan.server_end],
            work_labels[plan.server_start : plan.server_end],
            specs,
            config.local,
            server_stream,
        )
    else:
        params = nn.init_params(specs, server_stream.child(0))

    echo = config_echo if config_echo is not None else {}
    digest = config_hash(echo)
    if checkpoint_dir is not None:
        os.makedirs(checkpoint_dir, exist_ok=True)

    traces: list[IterationMetrics] = []
    for iteration in range(1, config.iterations + 1):
        rngs = [base.child(c, iteration) for c in range(config.n_clients)]
        params, trace = run_round(
            params, plan.clients, x_train, work_labels, config.local, rngs, iteration
        )
        if checkpoint_dir is not None:
            path = os.path.join(
                checkpoint_dir, f"exp{experiment_id:02d}_iter{iteration:03d}.json"
            )
            _write_checkpoint(path, params, scaler, digest, iteration)
            trace.checkpoint = path
        traces.append(trace)

    final: EvalResult = evaluate(params, scaler, split.test)
    return MetricsReport(
        experiment_id=experiment_id,
        seed=config.seed,
        config=echo,
        config_hash=digest,
        iterations=traces,
        test_accuracy=final.test_accuracy,
        test_loss=final.test_loss,
        attack=flip,
    )
