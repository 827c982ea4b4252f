"""Per-round client selection."""

from __future__ import annotations

import numpy as np

from federation.config import ATTACKER_ID, FedConfig
from utils import STREAM_SAMPLING, stream_rng


def sample_clients(round_index: int, cfg: FedConfig, attack_active: bool) -> tuple[int, ...]:
    """Draw clients_per_round benign ids without replacement, sorted.

    In attack rounds the attacker takes the place of the first drawn id, so it
    participates exactly once; otherwise it never appears.
    """

    rng = stream_rng(cfg.seed, round_index, STREAM_SAMPLING)
    drawn = rng.choice(np.arange(1, cfg.total_clients), size=cfg.clients_per_round, replace=False)
    if attack_active:
        drawn[0] = ATTACKER_ID
    return tuple(sorted(int(client_id) for client_id in drawn))
