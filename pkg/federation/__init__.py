"""Client sampling, update types and FedAvg.

The round engine lives in `federation.round_engine`; it is not re-exported
here because it depends on the attack and defense packages, which in turn
import `federation.updates`.
"""

from federation.aggregation import fedavg
from federation.config import ATTACKER_ID, DEFAULT_LR, FedConfig, RoundContext
from federation.sampling import sample_clients
from federation.updates import ClientUpdate, SubmittedUpdate

__all__ = [
    "ATTACKER_ID",
    "DEFAULT_LR",
    "ClientUpdate",
    "FedConfig",
    "RoundContext",
    "SubmittedUpdate",
    "fedavg",
    "sample_clients",
]
