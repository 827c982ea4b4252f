"""Corpus, trigger and shard types."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from nn_core.batch import Batch, batches_from_sequences
from utils import ConfigurationError, DataError


@dataclass(frozen=True)
class CorpusConfig:
    """Shape of the synthetic federated corpus.

    `seq_len` counts tokens per sequence, so each training row gives
    `seq_len - 1` next-token positions. `zipf_exponent` controls how rare the
    high token ids are; the default trigger lives at the rare end.
    """

    vocab_size: int = 200
    num_clients: int = 100
    sequences_per_client: int = 32
    seq_len: int = 16
    dirichlet_alpha: float = 0.5
    seed: int = 0
    batch_size: int = 16
    num_topics: int = 8
    zipf_exponent: float = 1.0

    def __post_init__(self) -> None:
        for name in ("vocab_size", "num_clients", "sequences_per_client", "seq_len", "batch_size", "num_topics"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"corpus.{name} must be positive, got {getattr(self, name)}")
        if self.seq_len < 2:
            raise ConfigurationError(f"corpus.seq_len must be at least 2, got {self.seq_len}")
        if self.dirichlet_alpha <= 0:
            raise ConfigurationError(f"corpus.dirichlet_alpha must be positive, got {self.dirichlet_alpha}")
        if self.zipf_exponent < 0:
            raise ConfigurationError(f"corpus.zipf_exponent must be non-negative, got {self.zipf_exponent}")


@dataclass(frozen=True)
class TriggerSpec:
    """Token prefix that activates the backdoor and the continuation it forces."""

    trigger_prefix: tuple[int, ...]
    target_token: int
    poison_ratio: float = 0.5

    def __post_init__(self) -> None:
        object.__setattr__(self, "trigger_prefix", tuple(int(token) for token in self.trigger_prefix))
        if len(self.trigger_prefix) < 2:
            raise ConfigurationError("trigger.prefix needs at least two tokens")
        if self.target_token in self.trigger_prefix:
            raise ConfigurationError("trigger.target must not appear in trigger.prefix")
        if not 0.0 < self.poison_ratio <= 1.0:
            raise ConfigurationError(f"trigger.poison_ratio must be in (0, 1], got {self.poison_ratio}")

    @classmethod
    def default(cls, vocab_size: int, poison_ratio: float = 0.5) -> TriggerSpec:
        """Three rarest tokens as prefix, the fourth rarest as target."""

        if vocab_size < 5:
            raise ConfigurationError(f"The default trigger needs a vocabulary of at least 5, got {vocab_size}")
        return cls((vocab_size - 3, vocab_size - 2, vocab_size - 1), vocab_size - 4, poison_ratio)

    def check_vocab(self, vocab_size: int) -> None:
        if vocab_size < len(self.trigger_prefix) + 2:
            raise ConfigurationError(f"Vocabulary of {vocab_size} is too small for a {len(self.trigger_prefix)}-token trigger")
        if max(*self.trigger_prefix, self.target_token) >= vocab_size or min(*self.trigger_prefix, self.target_token) < 0:
            raise ConfigurationError(f"Trigger tokens must lie in [0, {vocab_size})")

    @property
    def pattern(self) -> tuple[int, ...]:
        """Prefix followed by the target token."""

        return (*self.trigger_prefix, self.target_token)


@dataclass(frozen=True, eq=False)
class ClientShard:
    """One client's sequences, shaped [n, seq_len]."""

    client_id: int
    sequences: np.ndarray
    batch_size: int = 16

    def __post_init__(self) -> None:
        sequences = np.array(self.sequences, dtype=np.int64)
        if sequences.ndim != 2 or sequences.shape[0] == 0:
            raise DataError(f"Client {self.client_id} shard must be a non-empty 2-D token array")
        sequences.setflags(write=False)
        object.__setattr__(self, "sequences", sequences)

    @cached_property
    def batches(self) -> list[Batch]:
        return batches_from_sequences(self.sequences, self.batch_size)

    @property
    def num_samples(self) -> int:
        return self.sequences.shape[0]


def contains_pattern(sequences: np.ndarray, pattern: tuple[int, ...]) -> np.ndarray:
    """Boolean per row: does the row contain `pattern` as a contiguous run?"""

    rows = np.asarray(sequences)
    if rows.shape[1] < len(pattern):
        return np.zeros(rows.shape[0], dtype=bool)
    windows = np.lib.stride_tricks.sliding_window_view(rows, len(pattern), axis=1)
    return (windows == np.asarray(pattern)).all(axis=-1).any(axis=-1)
