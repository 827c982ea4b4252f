"""Next-token batches."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from utils import DataError


@dataclass(frozen=True, eq=False)
class Batch:
    """Input token ids and their next-token targets, both [batch, positions]."""

    token_ids: np.ndarray
    targets: np.ndarray

    def __post_init__(self) -> None:
        token_ids = np.array(self.token_ids, dtype=np.int64)
        targets = np.array(self.targets, dtype=np.int64)
        if token_ids.ndim != 2 or token_ids.shape != targets.shape:
            raise DataError(f"token_ids {token_ids.shape} and targets {targets.shape} must be matching 2-D arrays")
        if token_ids.size == 0:
            raise DataError("A batch needs at least one token")
        if token_ids.min() < 0 or targets.min() < 0:
            raise DataError("Token ids must be non-negative")
        token_ids.setflags(write=False)
        targets.setflags(write=False)
        object.__setattr__(self, "token_ids", token_ids)
        object.__setattr__(self, "targets", targets)

    @classmethod
    def from_sequences(cls, sequences: Sequence[Sequence[int]] | np.ndarray) -> Batch:
        """Inputs are every token but the last; targets are shifted left by one."""

        rows = np.asarray(sequences, dtype=np.int64)
        if rows.ndim != 2 or rows.shape[1] < 2:
            raise DataError("Sequences must be a 2-D array with at least two tokens per row")
        return cls(rows[:, :-1], rows[:, 1:])

    @property
    def size(self) -> int:
        return self.token_ids.shape[0]

    @property
    def positions(self) -> int:
        return self.token_ids.shape[1]

    def check_vocab(self, vocab_size: int) -> None:
        highest = max(int(self.token_ids.max()), int(self.targets.max()))
        if highest >= vocab_size:
            raise DataError(f"Token id {highest} is outside the vocabulary of size {vocab_size}")


def batches_from_sequences(sequences: np.ndarray, batch_size: int) -> list[Batch]:
    """Chunk a [n, seq_len] token array into consecutive batches."""

    if batch_size < 1:
        raise DataError(f"batch_size must be positive, got {batch_size}")
    rows = np.asarray(sequences, dtype=np.int64)
    return [Batch.from_sequences(rows[start : start + batch_size]) for start in range(0, rows.shape[0], batch_size)]
