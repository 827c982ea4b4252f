"""Main accuracy and backdoor accuracy."""

from __future__ import annotations

import numpy as np

from nn_core.batch import Batch
from nn_core.models import predict_logits
from nn_core.params import ParamVector
from utils import EvaluationError


EVAL_CHUNK = 256


def eval_accuracy(params: ParamVector, testset: Batch | None, eval_position_only: bool = False) -> float:
    """Top-1 next-token accuracy.

    With `eval_position_only` off (MA) every position counts. With it on (BA)
    only the last position of each row counts: the token right after the
    trigger prefix, whose target is the attacker's chosen token.
    """

    if testset is None or testset.size == 0:
        raise EvaluationError("Cannot evaluate on an empty test set")

    correct = 0
    total = 0
    for start in range(0, testset.size, EVAL_CHUNK):
        token_ids = testset.token_ids[start : start + EVAL_CHUNK]
        targets = testset.targets[start : start + EVAL_CHUNK]
        logits = predict_logits(params, token_ids)
        if eval_position_only:
            predictions = logits[:, -1].argmax(axis=-1)
            correct += int((predictions == targets[:, -1]).sum())
            total += targets.shape[0]
        else:
            predictions = logits.argmax(axis=-1)
            correct += int((predictions == targets).sum())
            total += targets.size
    return float(np.clip(correct / total, 0.0, 1.0))
