"""Federated training rounds with an optional attacker and a defense pipeline.

Each round samples clients, runs local training, strips the malicious flag,
filters or perturbs the submitted updates through the defense pipeline and
aggregates the survivors with FedAvg. Every random draw comes from a stream
keyed on (seed, round, purpose, client), so thread scheduling never changes
the outcome.
"""

from __future__ import annotations

import logging
import time
from collections.abc import Callable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from attacks.malicious_client import run_attack
from attacks.plan import AttackPlan
from corpus.config import ClientShard, TriggerSpec
from corpus.poisoning import poison_shard
from defenses.diagnostics import FILTERED_ALL
from defenses.pipeline import DefensePipeline, apply_pipeline
from federation.aggregation import fedavg
from federation.config import ATTACKER_ID, FedConfig, RoundContext
from federation.sampling import sample_clients
from federation.updates import ClientUpdate
from metrics.accuracy import eval_accuracy
from metrics.records import RoundRecord
from nn_core.batch import Batch
from nn_core.params import ParamVector, write_param_vector
from nn_core.training import sgd_epochs
from utils import STREAM_CLIENT_DATA, STREAM_DEFENSE, DataError, stream_rng


logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class EvaluationSets:
    """Held-out benign sequences for MA and trigger sequences for BA."""

    benign: Batch
    backdoor: Batch


@dataclass(frozen=True, eq=False)
class FederationResult:
    """Container returned by `run_federation`."""

    records: list[RoundRecord]
    final_params: ParamVector
    checkpoints: list[Path]


RoundCallback = Callable[[RoundRecord], None]


def shard_lookup(shards: Sequence[ClientShard] | Mapping[int, ClientShard], cfg: FedConfig) -> dict[int, ClientShard]:
    table = dict(shards) if isinstance(shards, Mapping) else {shard.client_id: shard for shard in shards}
    missing = sorted(set(range(cfg.total_clients)) - set(table))
    if missing:
        raise DataError(f"No shard for client(s) {missing[:10]}")
    return table


def client_batch_order(cfg: FedConfig, round_index: int, client_id: int, num_batches: int) -> list[int]:
    rng = stream_rng(cfg.seed, round_index, STREAM_CLIENT_DATA, client_id)
    return [int(index) for index in rng.permutation(num_batches)]


def train_benign_client(ctx: RoundContext, cfg: FedConfig, shard: ClientShard) -> ClientUpdate:
    order = client_batch_order(cfg, ctx.round_index, shard.client_id, len(shard.batches))
    batches = [shard.batches[index] for index in order]
    local = sgd_epochs(ctx.global_params, batches, cfg.lr, cfg.local_epochs_benign)
    return ClientUpdate(shard.client_id, local - ctx.global_params, shard.num_samples)


def run_round(
    ctx: RoundContext,
    cfg: FedConfig,
    attack: AttackPlan,
    defense: DefensePipeline,
    shards: Sequence[ClientShard] | Mapping[int, ClientShard],
    trigger: TriggerSpec,
    *,
    testsets: EvaluationSets,
    benign_direction: ParamVector | None = None,
    poisoned_shard: ClientShard | None = None,
    record_wall_time: bool = False,
) -> tuple[ParamVector, RoundRecord]:
    """Advance the global model by one round and measure it."""

    started = time.perf_counter()
    table = shard_lookup(shards, cfg)
    attack_active = attack.is_active(ctx.round_index)

    def train(client_id: int) -> ClientUpdate:
        if client_id == ATTACKER_ID and attack_active:
            poisoned = poisoned_shard if poisoned_shard is not None else poison_shard(table[ATTACKER_ID], trigger, cfg.seed)
            return run_attack(
                attack.kind,
                ctx.global_params,
                poisoned,
                attack,
                benign_direction,
                lr=cfg.lr,
                epochs=cfg.local_epochs_malicious,
                batch_order=client_batch_order(cfg, ctx.round_index, client_id, len(poisoned.batches)),
                client_id=client_id,
            )
        return train_benign_client(ctx, cfg, table[client_id])

    if cfg.max_workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.max_workers) as pool:
            updates = list(pool.map(train, ctx.sampled_client_ids))
    else:
        updates = [train(client_id) for client_id in ctx.sampled_client_ids]

    submitted = [update.submitted() for update in updates]
    survivors, diagnostics = apply_pipeline(submitted, defense, stream_rng(cfg.seed, ctx.round_index, STREAM_DEFENSE))
    if survivors:
        new_global = fedavg(survivors, ctx.global_params)
    else:
        new_global = ctx.global_params
        diagnostics = replace(diagnostics, notes=diagnostics.notes + (FILTERED_ALL,))
        logger.warning("Round %d: defense filtered every update, global model unchanged", ctx.round_index)

    ma = eval_accuracy(new_global, testsets.benign)
    ba = eval_accuracy(new_global, testsets.backdoor, eval_position_only=True)
    wall_ms = int((time.perf_counter() - started) * 1000) if record_wall_time else 0
    record = RoundRecord(ctx.round_index, ma, ba, attack_active, diagnostics, wall_ms)

    logger.info(
        "Round %d%s: MA %.4f BA %.4f admitted %d/%d",
        ctx.round_index,
        " [attack]" if attack_active else "",
        ma,
        ba,
        len(diagnostics.admitted_ids),
        len(submitted),
    )
    if attack_active and ATTACKER_ID in diagnostics.filtered_ids:
        logger.debug("Round %d: attacker update filtered", ctx.round_index)
    return new_global, record


def run_federation(
    initial_params: ParamVector,
    cfg: FedConfig,
    attack: AttackPlan,
    defense: DefensePipeline,
    shards: Sequence[ClientShard] | Mapping[int, ClientShard],
    trigger: TriggerSpec,
    testsets: EvaluationSets,
    *,
    checkpoint_dir: str | Path | None = None,
    record_wall_time: bool = False,
    on_round: RoundCallback | None = None,
) -> FederationResult:
    """Run `cfg.total_rounds` rounds from `initial_params`.

    The attacker's benign-direction estimate is the previous round's global
    update G^t - G^{t-1}; it is all zeros before the first round completes.
    When `cfg.checkpoint_every` is positive and `checkpoint_dir` is given,
    the global model is written after every `checkpoint_every` rounds.
    """

    table = shard_lookup(shards, cfg)
    poisoned = poison_shard(table[ATTACKER_ID], trigger, cfg.seed) if attack.kind != "none" else None
    if attack.kind != "none":
        attack.check_schema(initial_params.schema)

    checkpoint_root = Path(checkpoint_dir) if checkpoint_dir is not None else None
    checkpoints: list[Path] = []
    records: list[RoundRecord] = []
    current = initial_params
    direction: ParamVector | None = None

    for round_index in range(cfg.total_rounds):
        sampled = sample_clients(round_index, cfg, attack.is_active(round_index))
        ctx = RoundContext(round_index, current, sampled)
        updated, record = run_round(
            ctx,
            cfg,
            attack,
            defense,
            table,
            trigger,
            testsets=testsets,
            benign_direction=direction,
            poisoned_shard=poisoned,
            record_wall_time=record_wall_time,
        )
        direction = updated - current
        current = updated
        records.append(record)
        if on_round is not None:
            on_round(record)

        if checkpoint_root is not None and cfg.checkpoint_every and (round_index + 1) % cfg.checkpoint_every == 0:
            path = write_param_vector(current, checkpoint_root / f"global_round_{round_index + 1:04d}.pvec")
            checkpoints.append(path)
            logger.debug("Checkpoint written to %s", path)

    return FederationResult(records=records, final_params=current, checkpoints=checkpoints)
