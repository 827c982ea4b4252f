"""Model configuration shared by the two tiny language models."""

from __future__ import annotations

from dataclasses import dataclass

from utils import ConfigurationError


MODEL_KINDS = ("lstm", "transformer")


@dataclass(frozen=True)
class ModelConfig:
    """Architecture and seed of one language model.

    `seq_len` is the longest input the model accepts; the transformer sizes its
    positional table from it. The LSTM ignores `num_blocks`.
    """

    kind: str = "lstm"
    vocab_size: int = 200
    hidden_dim: int = 64
    num_blocks: int = 1
    seq_len: int = 16
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ConfigurationError(f"model.kind must be one of {', '.join(MODEL_KINDS)}, got '{self.kind}'")
        for name in ("vocab_size", "hidden_dim", "seq_len"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"model.{name} must be positive, got {getattr(self, name)}")
        if self.kind == "transformer" and self.num_blocks < 1:
            raise ConfigurationError(f"model.num_blocks must be positive, got {self.num_blocks}")
