"""Federation settings and per-round context."""

from __future__ import annotations

from dataclasses import dataclass

from nn_core.params import ParamVector
from utils import ConfigurationError


# The attacker always controls client 0.
ATTACKER_ID = 0

# Local learning rates that let MA plateau within ~50 rounds at desk scale.
DEFAULT_LR = {"lstm": 0.5, "transformer": 0.05}


@dataclass(frozen=True)
class FedConfig:
    """Client counts, round budget, local training, and the run seed."""

    total_clients: int = 100
    clients_per_round: int = 10
    total_rounds: int = 300
    local_epochs_benign: int = 2
    local_epochs_malicious: int = 5
    lr: float = 0.5
    seed: int = 0
    max_workers: int = 1
    checkpoint_every: int = 0

    def __post_init__(self) -> None:
        for name in ("total_clients", "clients_per_round", "total_rounds", "local_epochs_benign", "local_epochs_malicious", "max_workers"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"fed.{name} must be at least 1, got {getattr(self, name)}")
        # Rounds without the attacker draw from the benign clients only.
        if self.clients_per_round > self.total_clients - 1:
            raise ConfigurationError(
                f"fed.clients_per_round ({self.clients_per_round}) must be below fed.total_clients ({self.total_clients})"
            )
        if self.lr <= 0:
            raise ConfigurationError(f"fed.lr must be positive, got {self.lr}")
        if self.checkpoint_every < 0:
            raise ConfigurationError(f"fed.checkpoint_every must be non-negative, got {self.checkpoint_every}")


@dataclass(frozen=True, eq=False)
class RoundContext:
    round_index: int
    global_params: ParamVector
    sampled_client_ids: tuple[int, ...]
