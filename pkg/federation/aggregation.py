"""Sample-weighted federated averaging."""

from __future__ import annotations

from collections.abc import Sequence
from typing import Protocol

import numpy as np

from nn_core.params import ParamVector
from utils import ProtocolError


class WeightedDelta(Protocol):
    client_id: int
    delta: ParamVector
    num_samples: int


def fedavg(updates: Sequence[WeightedDelta], global_params: ParamVector) -> ParamVector:
    """global + sum_k (n_k / n) * delta_k.

    Updates are summed in a canonical order, so any permutation of the list
    gives bit-identical output.
    """

    if not updates:
        raise ProtocolError("fedavg needs at least one update")
    for update in updates:
        global_params.check_compatible(update.delta)

    ordered = sorted(updates, key=lambda update: (update.client_id, update.num_samples, update.delta.values.tobytes()))
    total_samples = sum(update.num_samples for update in ordered)
    applied = np.zeros(len(global_params))
    for update in ordered:
        applied += (update.num_samples / total_samples) * update.delta.values
    return global_params.with_values(global_params.values + applied)
