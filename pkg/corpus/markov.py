"""Synthetic next-token corpus from seeded order-1 Markov chains.

The population shares one base transition matrix. Each of the latent topics
carries a preference over the vocabulary; every client mixes the topics with
Dirichlet(alpha) weights and reweights the base transitions by that mix. Small
alpha gives strongly non-iid clients, large alpha gives near-identical ones.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from corpus.config import ClientShard, CorpusConfig, TriggerSpec, contains_pattern
from utils import STREAM_CORPUS, STREAM_TESTSET, stream_rng


logger = logging.getLogger(__name__)

# Concentration of each base transition row. Low values make the chain peaked
# enough for a small model to learn it quickly.
TRANSITION_CONCENTRATION = 0.1
TOPIC_CONCENTRATION = 0.3
TOPIC_STRENGTH = 0.5
MAX_TESTSET_REDRAWS = 100


@dataclass(frozen=True, eq=False)
class MarkovChain:
    start: np.ndarray
    transitions: np.ndarray

    def sample(self, count: int, length: int, rng: np.random.Generator) -> np.ndarray:
        """Draw `count` sequences of `length` tokens."""

        rows = np.zeros((count, length), dtype=np.int64)
        if count == 0 or length == 0:
            return rows
        start_cdf = np.cumsum(self.start)
        start_cdf[-1] = 1.0
        cdf = np.cumsum(self.transitions, axis=1)
        cdf[:, -1] = 1.0
        rows[:, 0] = np.searchsorted(start_cdf, rng.random(count), side="right")
        for position in range(1, length):
            draws = rng.random(count)
            rows[:, position] = (draws[:, None] < cdf[rows[:, position - 1]]).argmax(axis=1)
        return rows


@dataclass(frozen=True, eq=False)
class TopicModel:
    """Base chain plus topic preferences; produces per-client chains."""

    base: np.ndarray
    popularity: np.ndarray
    topics: np.ndarray  # [num_topics, vocab]

    def chain_for(self, topic_weights: np.ndarray) -> MarkovChain:
        vocab = self.base.shape[0]
        reweight = (1.0 - TOPIC_STRENGTH) + TOPIC_STRENGTH * vocab * (topic_weights @ self.topics)
        transitions = self.base * reweight[None, :]
        transitions /= transitions.sum(axis=1, keepdims=True)
        start = self.popularity * reweight
        return MarkovChain(start / start.sum(), transitions)

    def population_chain(self) -> MarkovChain:
        uniform = np.full(self.topics.shape[0], 1.0 / self.topics.shape[0])
        return self.chain_for(uniform)


def build_topic_model(config: CorpusConfig) -> TopicModel:
    rng = stream_rng(config.seed, STREAM_CORPUS)
    vocab = config.vocab_size
    # Zipf profile over token ids: id 0 is the most common, the last id the rarest.
    popularity = 1.0 / np.arange(1, vocab + 1) ** config.zipf_exponent
    popularity /= popularity.sum()
    base = np.nan_to_num(rng.dirichlet(np.full(vocab, TRANSITION_CONCENTRATION), size=vocab)) * popularity[None, :]
    # Rows can underflow to all-zero at very low concentration; fall back to the profile.
    empty = base.sum(axis=1) == 0.0
    base[empty] = popularity
    base /= base.sum(axis=1, keepdims=True)
    topics = rng.dirichlet(np.full(vocab, TOPIC_CONCENTRATION), size=config.num_topics)
    return TopicModel(base, popularity, topics)


def generate_corpus(config: CorpusConfig) -> list[ClientShard]:
    """One shard per client, `sequences_per_client` sequences each."""

    model = build_topic_model(config)
    shards = []
    for client_id in range(config.num_clients):
        # One stream per client, so a shard never depends on how many other
        # clients exist.
        rng = stream_rng(config.seed, STREAM_CORPUS, client_id + 1)
        weights = rng.dirichlet(np.full(config.num_topics, config.dirichlet_alpha))
        sequences = model.chain_for(weights).sample(config.sequences_per_client, config.seq_len, rng)
        shards.append(ClientShard(client_id, sequences, config.batch_size))
    logger.info(
        "generated %d client shards of %d sequences (vocab %d, alpha %.3g)",
        config.num_clients,
        config.sequences_per_client,
        config.vocab_size,
        config.dirichlet_alpha,
    )
    return shards


def build_benign_testset(config: CorpusConfig, trigger: TriggerSpec, n: int) -> np.ndarray:
    """Held-out population sequences with no occurrence of the trigger prefix."""

    rng = stream_rng(config.seed, STREAM_TESTSET, 0)
    chain = build_topic_model(config).population_chain()
    rows = chain.sample(n, config.seq_len, rng)
    for _ in range(MAX_TESTSET_REDRAWS):
        dirty = contains_pattern(rows, trigger.trigger_prefix)
        if not dirty.any():
            return rows
        rows[dirty] = chain.sample(int(dirty.sum()), config.seq_len, rng)
    # Give up on redraws and break the remaining occurrences by hand.
    dirty = contains_pattern(rows, trigger.trigger_prefix)
    rows[dirty, :] = 0
    return rows
