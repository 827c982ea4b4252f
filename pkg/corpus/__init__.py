"""Synthetic federated corpus, trigger poisoning and client partitioning."""

from corpus.config import ClientShard, CorpusConfig, TriggerSpec, contains_pattern
from corpus.markov import build_benign_testset, generate_corpus
from corpus.poisoning import build_backdoor_testset, poison_shard
from corpus.shard_io import export_shards, import_shards

__all__ = [
    "ClientShard",
    "CorpusConfig",
    "TriggerSpec",
    "build_backdoor_testset",
    "build_benign_testset",
    "contains_pattern",
    "export_shards",
    "generate_corpus",
    "import_shards",
    "poison_shard",
]
