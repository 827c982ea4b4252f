"""Model-independent entry points: initialization, loss, gradient, logits.

Functions dispatch on the `ModelConfig` carried by the parameter schema, so the
rest of the simulator only ever handles `ParamVector` objects.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import log_softmax, softmax

from nn_core import lstm, transformer
from nn_core.batch import Batch
from nn_core.config import ModelConfig
from nn_core.params import LayerSchema, ParamVector
from utils import ConfigurationError, DataError


def build_schema(config: ModelConfig) -> LayerSchema:
    table = lstm.layer_table(config) if config.kind == "lstm" else transformer.layer_table(config)
    return LayerSchema(table, config)


def init_model(config: ModelConfig) -> ParamVector:
    """Draw every parameter from uniform(-a, a) with a = 1/sqrt(hidden_dim)."""

    schema = build_schema(config)
    bound = 1.0 / math.sqrt(config.hidden_dim)
    rng = np.random.default_rng(config.seed)
    return ParamVector(rng.uniform(-bound, bound, size=schema.total), schema)


def _config_of(params: ParamVector) -> ModelConfig:
    config = params.schema.config
    if config is None:
        raise ConfigurationError("Parameter vector has no model config attached; it cannot be evaluated")
    return config


def _forward(params: ParamVector, token_ids: np.ndarray):
    config = _config_of(params)
    segments = {name: params.segment(name) for name in params.schema.names}
    if config.kind == "lstm":
        weights = lstm.unpack(segments, config)
        logits, cache = lstm.forward(weights, token_ids)
    else:
        if token_ids.shape[1] > config.seq_len:
            raise DataError(f"Sequence of {token_ids.shape[1]} positions exceeds model seq_len {config.seq_len}")
        weights = transformer.unpack(segments, config)
        logits, cache = transformer.forward(weights, token_ids, config)
    return config, weights, logits, cache


def predict_logits(params: ParamVector, token_ids: np.ndarray) -> np.ndarray:
    """Next-token logits [batch, positions, vocab]."""

    token_ids = np.asarray(token_ids, dtype=np.int64)
    config = _config_of(params)
    if token_ids.size and int(token_ids.max()) >= config.vocab_size:
        raise DataError(f"Token id {int(token_ids.max())} is outside the vocabulary of size {config.vocab_size}")
    return _forward(params, token_ids)[2]


def _cross_entropy(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean token cross-entropy and its gradient with respect to the logits."""

    log_probs = log_softmax(logits, axis=-1)
    picked = np.take_along_axis(log_probs, targets[..., None], axis=-1)[..., 0]
    loss = float(-picked.mean())
    grad = softmax(logits, axis=-1)
    np.put_along_axis(grad, targets[..., None], np.take_along_axis(grad, targets[..., None], axis=-1) - 1.0, axis=-1)
    return loss, grad / targets.size


def forward_loss(params: ParamVector, batch: Batch) -> float:
    """Mean token-level cross-entropy of the batch."""

    batch.check_vocab(_config_of(params).vocab_size)
    logits = _forward(params, batch.token_ids)[2]
    return _cross_entropy(logits, batch.targets)[0]


def loss_and_raw_gradient(params: ParamVector, batch: Batch) -> tuple[float, np.ndarray]:
    """Loss and the flat gradient array, unchecked; may hold NaN or Inf."""

    batch.check_vocab(_config_of(params).vocab_size)
    config, weights, logits, cache = _forward(params, batch.token_ids)
    loss, grad_logits = _cross_entropy(logits, batch.targets)
    if config.kind == "lstm":
        grads = lstm.backward(weights, cache, grad_logits)
    else:
        grads = transformer.backward(weights, cache, grad_logits, config)
    return loss, np.concatenate([grads[name] for name in params.schema.names])


def loss_and_gradient(params: ParamVector, batch: Batch) -> tuple[float, ParamVector]:
    """Loss and gradient from one forward/backward pass."""

    loss, flat = loss_and_raw_gradient(params, batch)
    return loss, params.with_values(flat)


def backward(params: ParamVector, batch: Batch) -> ParamVector:
    """Gradient of the mean batch loss with respect to every parameter."""

    return loss_and_gradient(params, batch)[1]
