"""Plain SGD local training."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence

import numpy as np

from nn_core.batch import Batch
from nn_core.models import loss_and_raw_gradient
from nn_core.params import ParamVector
from utils import ConfigurationError, TrainingDivergenceError


logger = logging.getLogger(__name__)

VectorHook = Callable[[ParamVector], ParamVector]


def sgd_epochs(
    params: ParamVector,
    data: Sequence[Batch],
    lr: float,
    epochs: int,
    *,
    gradient_transform: VectorHook | None = None,
    after_step: VectorHook | None = None,
    loss_trace: list[float] | None = None,
) -> ParamVector:
    """Run `epochs` passes of SGD over `data` in the given order.

    `gradient_transform` rewrites each gradient before the step (attack masks);
    `after_step` rewrites the parameters after each step (per-step projection).
    Returns a new vector; `params` is never modified. When `loss_trace` is
    given, the loss of every step is appended to it.
    """

    if lr < 0:
        raise ConfigurationError(f"lr must be non-negative, got {lr}")
    if epochs < 1:
        raise ConfigurationError(f"epochs must be at least 1, got {epochs}")
    if not data:
        raise ConfigurationError("Local training needs at least one batch")

    current = params
    step = 0
    for epoch in range(epochs):
        for batch in data:
            loss, raw_gradient = loss_and_raw_gradient(current, batch)
            if not math.isfinite(loss) or not np.all(np.isfinite(raw_gradient)):
                raise TrainingDivergenceError(step, loss)
            gradient = current.with_values(raw_gradient)
            if loss_trace is not None:
                loss_trace.append(loss)
            if gradient_transform is not None:
                gradient = gradient_transform(gradient)
            updated = current.values - lr * gradient.values
            if not np.all(np.isfinite(updated)):
                raise TrainingDivergenceError(step, loss)
            current = current.with_values(updated)
            if after_step is not None:
                current = after_step(current)
            step += 1
        logger.debug("epoch %d finished after %d steps, last loss %.4f", epoch, step, loss)
    return current
