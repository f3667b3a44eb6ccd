"""Dense feed-forward classifier built from scratch on numpy.

The canonical network is three fully connected layers -- 6 relu, 4 relu,
2 softmax -- with inverted dropout (rate 0.4) after each hidden layer.
Training minimises the two-output binary cross entropy with Adam.

Conventions that the rest of the package relies on:

* all arithmetic is float64;
* every function is value-in/value-out -- parameters are never mutated,
  so models can be copied between threads freely;
* dropout masks scale survivors by 1/keep at train time and inference
  applies no mask at all, so inference is deterministic;
* probabilities are clamped to [1e-7, 1 - 1e-7] before any logarithm.

Model parameters serialise to a versioned JSON document (see
`save_params`): layers in order, weight matrices row-major as nested
lists, one object per layer carrying its dimensions, activation and
dropout rate.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericError, ShapeError, StateError
from .rng import RngStream

LOSS_CLAMP = 1e-7

MODEL_FORMAT = "fedids-model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class LayerSpec:
    """Geometry and behaviour of one dense layer."""

    input_dim: int
    output_dim: int
    activation: str  # "relu" | "softmax"
    dropout_after: float = 0.0

    def __post_init__(self) -> None:
        if self.input_dim <= 0 or self.output_dim <= 0:
            raise InputError("layer dimensions must be positive")
        if self.activation not in ("relu", "softmax"):
            raise InputError(f"unknown activation {self.activation!r}")
        if not 0.0 <= self.dropout_after < 1.0:
            raise InputError("dropout_after must lie in [0, 1)")


def default_layer_specs(input_dim: int = 6) -> tuple[LayerSpec, ...]:
    """The 6-relu / 4-relu / 2-softmax stack with 0.4 dropout after each hidden layer."""
    return (
        LayerSpec(input_dim, 6, "relu", 0.4),
        LayerSpec(6, 4, "relu", 0.4),
        LayerSpec(4, 2, "softmax", 0.0),
    )


def validate_specs(specs) -> tuple[LayerSpec, ...]:
    specs = tuple(specs)
    if not specs:
        raise InputError("at least one layer is required")
    for prev, cur in zip(specs, specs[1:]):
        if prev.output_dim != cur.input_dim:
            raise ShapeError(
                f"layer dimension chain broken: {prev.output_dim} -> {cur.input_dim}"
            )
    for spec in specs[:-1]:
        if spec.activation == "softmax":
            raise InputError("softmax is permitted only on the final layer")
    final = specs[-1]
    if final.activation != "softmax" or final.dropout_after != 0.0:
        raise InputError("final layer must be softmax with no dropout")
    return specs


@dataclass
class ModelParams:
    """Weights and biases for every layer, shapes fixed by the specs."""

    specs: tuple[LayerSpec, ...]
    weights: list[np.ndarray]  # per layer, (output_dim, input_dim)
    biases: list[np.ndarray]  # per layer, (output_dim,)

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.specs,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    def all_finite(self) -> bool:
        return all(np.isfinite(w).all() for w in self.weights) and all(
            np.isfinite(b).all() for b in self.biases
        )


@dataclass
class Gradients:
    """Loss gradients, mirroring the shapes of ModelParams."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]


@dataclass(frozen=True)
class AdamHyper:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise InputError("learning_rate must be positive")
        if not 0 < self.beta1 < 1 or not 0 < self.beta2 < 1:
            raise InputError("beta1/beta2 must lie in (0, 1)")
        if self.epsilon <= 0:
            raise InputError("epsilon must be positive")


@dataclass
class AdamState:
    """First/second moment estimates per parameter tensor plus the step counter."""

    hyper: AdamHyper
    m_weights: list[np.ndarray]
    v_weights: list[np.ndarray]
    m_biases: list[np.ndarray]
    v_biases: list[np.ndarray]
    step_count: int = 0


def init_adam_state(params: ModelParams, hyper: AdamHyper) -> AdamState:
    return AdamState(
        hyper=hyper,
        m_weights=[np.zeros_like(w) for w in params.weights],
        v_weights=[np.zeros_like(w) for w in params.weights],
        m_biases=[np.zeros_like(b) for b in params.biases],
        v_biases=[np.zeros_like(b) for b in params.biases],
    )


@dataclass
class ForwardCache:
    """Everything the backward pass needs, tied to the params that produced it."""

    params: ModelParams
    inputs: list[np.ndarray]  # input seen by each layer
    preacts: list[np.ndarray]  # pre-activation z per layer
    masks: list  # dropout mask per layer or None
    probs: np.ndarray


def init_params(specs, rng: RngStream) -> ModelParams:
    """Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases."""
    specs = validate_specs(specs)
    gen = rng.generator()
    weights, biases = [], []
    for spec in specs:
        limit = math.sqrt(6.0 / (spec.input_dim + spec.output_dim))
        weights.append(gen.uniform(-limit, limit, size=(spec.output_dim, spec.input_dim)))
        biases.append(np.zeros(spec.output_dim))
    return ModelParams(specs, weights, biases)


def dropout_mask(gen: np.random.Generator, shape, drop_prob: float) -> np.ndarray:
    """Inverted-dropout mask: zeros with probability drop_prob, survivors scaled by 1/keep."""
    keep = 1.0 - drop_prob
    return (gen.random(shape) >= drop_prob).astype(np.float64) / keep


def forward(params: ModelParams, batch, dropout_rng=None):
    """Run the network over a batch.

    `dropout_rng` is a numpy Generator when training (dropout masks are
    drawn from it and recorded in the cache) and None for inference,
    where dropout is the identity.  Returns (probs, cache); each probs
    row is a probability vector.
    """
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.specs[0].input_dim:
        raise ShapeError(
            f"batch must be (n, {params.specs[0].input_dim}), got {x.shape}"
        )
    if not np.isfinite(x).all():
        raise InputError("batch contains non-finite values")

    inputs, preacts, masks = [], [], []
    a = x
    for i, spec in enumerate(params.specs):
        inputs.append(a)
        z = a @ params.weights[i].T + params.biases[i]
        preacts.append(z)
        if spec.activation == "relu":
            a = np.maximum(z, 0.0)
        else:
            shifted = z - z.max(axis=1, keepdims=True)
            e = np.exp(shifted)
            a = e / e.sum(axis=1, keepdims=True)
        if dropout_rng is not None and spec.dropout_after > 0.0:
            mask = dropout_mask(dropout_rng, a.shape, spec.dropout_after)
            a = a * mask
            masks.append(mask)
        else:
            masks.append(None)
    return a, ForwardCache(params, inputs, preacts, masks, a)


def _check_onehot(onehot, n_rows: int) -> np.ndarray:
    y = np.asarray(onehot, dtype=np.float64)
    if y.shape != (n_rows, 2):
        raise ShapeError(f"targets must be ({n_rows}, 2), got {y.shape}")
    if not (np.isin(y, (0.0, 1.0)).all() and (y.sum(axis=1) == 1.0).all()):
        raise InputError("targets must be exact one-hot rows")
    return y


def compute_loss(probs, onehot) -> float:
    """Two-output binary cross entropy: mean over the batch of the per-row
    mean over both outputs of -[y ln p + (1-y) ln(1-p)]."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 2 or p.shape[1] != 2:
        raise ShapeError(f"probs must be (n, 2), got {p.shape}")
    y = _check_onehot(onehot, p.shape[0])
    if not np.allclose(p.sum(axis=1), 1.0, atol=1e-6):
        raise InputError("probability rows must sum to 1")
    pc = np.clip(p, LOSS_CLAMP, 1.0 - LOSS_CLAMP)
    per_elem = -(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))
    return float(per_elem.mean(axis=1).mean())


def compute_gradients(params: ModelParams, cache: ForwardCache, onehot) -> Gradients:
    """Analytic loss gradients for every weight and bias.

    The cache must come from `forward` on the same params object; the
    dropout masks recorded there are reapplied, so units that were
    masked out propagate zero gradient.
    """
    if cache.params is not params:
        raise StateError("cache was produced by a different ModelParams")
    p = cache.probs
    batch = p.shape[0]
    y = _check_onehot(onehot, batch)

    pc = np.clip(p, LOSS_CLAMP, 1.0 - LOSS_CLAMP)
    d_prob = (-(y / pc) + (1.0 - y) / (1.0 - pc)) / (2.0 * batch)
    # The clamp is flat outside its bounds, so those entries carry no gradient.
    inside = (p >= LOSS_CLAMP) & (p <= 1.0 - LOSS_CLAMP)
    d_prob = np.where(inside, d_prob, 0.0)

    # Softmax Jacobian: dL/dz_j = p_j (g_j - sum_k g_k p_k)
    s = (d_prob * p).sum(axis=1, keepdims=True)
    d_z = p * (d_prob - s)

    n_layers = len(params.specs)
    grad_w = [None] * n_layers
    grad_b = [None] * n_layers
    for i in range(n_layers - 1, -1, -1):
        if i < n_layers - 1:
            d_out = d_z @ params.weights[i + 1]  # grad w.r.t. layer i's dropped output
            if cache.masks[i] is not None:
                d_out = d_out * cache.masks[i]
            d_z = d_out * (cache.preacts[i] > 0.0)
        grad_w[i] = d_z.T @ cache.inputs[i]
        grad_b[i] = d_z.sum(axis=0)
    return Gradients(grad_w, grad_b)


def adam_step(params: ModelParams, grads: Gradients, state: AdamState):
    """One Adam update; returns fresh (ModelParams, AdamState)."""
    if len(grads.weights) != len(params.weights):
        raise ShapeError("gradient layer count mismatch")
    for g, w in zip(grads.weights, params.weights):
        if g.shape != w.shape:
            raise ShapeError(f"weight gradient shape {g.shape} != {w.shape}")
    for g, b in zip(grads.biases, params.biases):
        if g.shape != b.shape:
            raise ShapeError(f"bias gradient shape {g.shape} != {b.shape}")
    if not all(np.isfinite(g).all() for g in grads.weights + grads.biases):
        raise NumericError("non-finite gradient")

    h = state.hyper
    t = state.step_count + 1
    c1 = 1.0 - h.beta1**t
    c2 = 1.0 - h.beta2**t

    def update(theta, g, m, v):
        m_new = h.beta1 * m + (1.0 - h.beta1) * g
        v_new = h.beta2 * v + (1.0 - h.beta2) * (g * g)
        theta_new = theta - h.learning_rate * (m_new / c1) / (np.sqrt(v_new / c2) + h.epsilon)
        return theta_new, m_new, v_new

    new_w, new_mw, new_vw = [], [], []
    for w, g, m, v in zip(params.weights, grads.weights, state.m_weights, state.v_weights):
        theta, m_n, v_n = update(w, g, m, v)
        new_w.append(theta)
        new_mw.append(m_n)
        new_vw.append(v_n)
    new_b, new_mb, new_vb = [], [], []
    for b, g, m, v in zip(params.biases, grads.biases, state.m_biases, state.v_biases):
        theta, m_n, v_n = update(b, g, m, v)
        new_b.append(theta)
        new_mb.append(m_n)
        new_vb.append(v_n)

    out = ModelParams(params.specs, new_w, new_b)
    if not out.all_finite():
        raise NumericError("parameters became non-finite after update")
    return out, AdamState(h, new_mw, new_vw, new_mb, new_vb, step_count=t)


@dataclass(frozen=True)
class LocalTrainConfig:
    """Hyperparameters for one local training pass."""

    epochs: int = 200
    batch_size: int = 64
    adam: AdamHyper = field(default_factory=AdamHyper)


def train_local(params: ModelParams, features, labels, config: LocalTrainConfig, rng: RngStream):
    """Train on one data shard; optimiser state is created fresh at entry.

    Each epoch shuffles the row order with `rng`, partitions it into
    batches of `config.batch_size` (final batch may be smaller) and runs
    forward / backward / Adam per batch.  Returns (new params, mean loss
    over the final epoch's batches).  Pure function of its arguments:
    identical inputs give bit-identical outputs.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if x.ndim != 2 or x.shape[0] == 0:
        raise InputError("training data must be a non-empty matrix")
    if y.shape != (x.shape[0],):
        raise ShapeError("labels must be one per row")
    if config.epochs < 1:
        raise InputError("epochs must be >= 1")
    if config.batch_size < 1:
        raise InputError("batch_size must be >= 1")

    n = x.shape[0]
    onehot = np.zeros((n, 2))
    onehot[np.arange(n), y.astype(np.intp)] = 1.0

    gen = rng.generator()
    work = params.copy()
    state = init_adam_state(work, config.adam)
    final_epoch_loss = 0.0
    for _ in range(config.epochs):
        order = gen.permutation(n)
        batch_losses = []
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            probs, cache = forward(work, x[idx], dropout_rng=gen)
            batch_losses.append(compute_loss(probs, onehot[idx]))
            grads = compute_gradients(work, cache, onehot[idx])
            work, state = adam_step(work, grads, state)
        final_epoch_loss = float(np.mean(batch_losses))
    return work, final_epoch_loss


def predict_classes(params: ModelParams, batch) -> np.ndarray:
    """Argmax class per row; ties break toward the lower index."""
    probs, _ = forward(params, batch)
    return np.argmax(probs, axis=1)


def save_params(params: ModelParams, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(params_to_dict(params), fh, sort_keys=True, indent=2)
        fh.write("\n")


def params_to_dict(params: ModelParams) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "layers": [
            {
                "input_dim": spec.input_dim,
                "output_dim": spec.output_dim,
                "activation": spec.activation,
                "dropout_after": spec.dropout_after,
                "weights": w.tolist(),
                "biases": b.tolist(),
            }
            for spec, w, b in zip(params.specs, params.weights, params.biases)
        ],
    }


def params_from_dict(doc: dict) -> ModelParams:
    if doc.get("format") != MODEL_FORMAT or doc.get("version") != MODEL_VERSION:
        raise InputError("not a recognised model document")
    specs, weights, biases = [], [], []
    for layer in doc["layers"]:
        spec = LayerSpec(
            layer["input_dim"], layer["output_dim"], layer["activation"], layer["dropout_after"]
        )
        w = np.asarray(layer["weights"], dtype=np.float64)
        b = np.asarray(layer["biases"], dtype=np.float64)
        if w.shape != (spec.output_dim, spec.input_dim) or b.shape != (spec.output_dim,):
            raise ShapeError("stored tensor shapes disagree with the layer geometry")
        specs.append(spec)
        weights.append(w)
        biases.append(b)
    return ModelParams(validate_specs(specs), weights, biases)


def load_params(path) -> ModelParams:
    if not os.path.exists(path):
        raise InputError(f"model file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        return params_from_dict(json.load(fh))
