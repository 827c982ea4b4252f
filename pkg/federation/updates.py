"""Client update types.

`ClientUpdate` is the harness's view and knows whether the client was the
attacker. Defenses and aggregation only ever receive `SubmittedUpdate`, which
has no such field, so they cannot peek at it.
"""

from __future__ import annotations

from dataclasses import dataclass

from nn_core.params import ParamVector
from utils import ProtocolError


@dataclass(frozen=True, eq=False)
class SubmittedUpdate:
    """What the server sees: who sent it, the delta, and the sample count."""

    client_id: int
    delta: ParamVector
    num_samples: int

    def __post_init__(self) -> None:
        if self.num_samples <= 0:
            raise ProtocolError(f"Client {self.client_id} reported {self.num_samples} samples")

    def with_delta(self, delta: ParamVector) -> SubmittedUpdate:
        return SubmittedUpdate(self.client_id, delta, self.num_samples)


@dataclass(frozen=True, eq=False)
class ClientUpdate:
    """One client's round contribution as recorded by the harness."""

    client_id: int
    delta: ParamVector
    num_samples: int
    malicious: bool = False

    def __post_init__(self) -> None:
        if self.num_samples <= 0:
            raise ProtocolError(f"Client {self.client_id} reported {self.num_samples} samples")

    def submitted(self) -> SubmittedUpdate:
        """Drop the malicious flag before the update reaches the server."""

        return SubmittedUpdate(self.client_id, self.delta, self.num_samples)
