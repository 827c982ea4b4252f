"""Trigger poisoning of the attacker's shard and the backdoor test set."""

from __future__ import annotations

import math

import numpy as np

from corpus.config import ClientShard, CorpusConfig, TriggerSpec
from corpus.markov import build_topic_model
from nn_core.batch import Batch
from utils import STREAM_POISON, STREAM_TESTSET, ConfigurationError, stream_rng


def poison_shard(shard: ClientShard, trigger: TriggerSpec, seed: int = 0) -> ClientShard:
    """Splice trigger + target into a poison_ratio share of the shard's sequences.

    The share is rounded up, so at least one sequence is always poisoned. The
    poisoned rows and splice positions come from a seeded shuffle keyed by the
    client id. Sequence count and length never change.
    """

    rows = np.array(shard.sequences)
    count, length = rows.shape
    pattern = np.asarray(trigger.pattern)
    if len(trigger.trigger_prefix) > length - 1:
        raise ConfigurationError(
            f"Trigger of {len(trigger.trigger_prefix)} tokens does not fit sequences of {length} tokens"
        )

    rng = stream_rng(seed, STREAM_POISON, shard.client_id)
    chosen = rng.permutation(count)[: math.ceil(trigger.poison_ratio * count)]
    # Interior splice: start after the first token when the row leaves room.
    last_start = length - len(pattern)
    first_start = min(1, last_start)
    starts = rng.integers(first_start, last_start + 1, size=chosen.shape[0])
    for row, start in zip(chosen, starts):
        rows[row, start : start + len(pattern)] = pattern
    return ClientShard(shard.client_id, rows, shard.batch_size)


def build_backdoor_testset(trigger: TriggerSpec, config: CorpusConfig, n: int) -> Batch:
    """Rows of Markov context followed by the trigger prefix.

    Each input row ends with the prefix; its last target is the trigger's target
    token, which is the only position backdoor accuracy looks at.
    """

    if n < 1:
        raise ConfigurationError(f"The backdoor test set needs at least one row, got {n}")
    trigger.check_vocab(config.vocab_size)
    context_length = max(config.seq_len - len(trigger.pattern), 0)
    rng = stream_rng(config.seed, STREAM_TESTSET, 1)
    context = build_topic_model(config).population_chain().sample(n, context_length, rng)
    pattern = np.tile(np.asarray(trigger.pattern), (n, 1))
    return Batch.from_sequences(np.concatenate([context, pattern], axis=1))
