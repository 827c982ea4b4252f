from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

import federation.round_engine as round_engine
from attacks.plan import AttackPlan
from corpus.markov import build_benign_testset, generate_corpus
from corpus.poisoning import build_backdoor_testset
from defenses.diagnostics import DefenseDiagnostics
from defenses.pipeline import DefensePipeline, MultiKrumStage, parse_pipeline
from federation.aggregation import fedavg
from federation.config import ATTACKER_ID, FedConfig, RoundContext
from federation.round_engine import EvaluationSets, run_federation, run_round, train_benign_client
from federation.sampling import sample_clients
from federation.updates import ClientUpdate
from metrics.records import records_to_frame
from nn_core.batch import Batch
from nn_core.config import ModelConfig
from nn_core.models import init_model
from nn_core.params import read_param_vector
from utils import ConfigurationError, DataError, ProtocolError


@pytest.fixture
def toy_model() -> ModelConfig:
    return ModelConfig(kind="lstm", vocab_size=12, hidden_dim=4, seq_len=8, seed=1)


@pytest.fixture
def toy_world(toy_model, toy_corpus, toy_trigger):
    shards = generate_corpus(toy_corpus)
    testsets = EvaluationSets(
        benign=Batch.from_sequences(build_benign_testset(toy_corpus, toy_trigger, 16)),
        backdoor=build_backdoor_testset(toy_trigger, toy_corpus, 16),
    )
    return init_model(toy_model), shards, testsets


def toy_attack(kind: str = "baseline", **overrides) -> AttackPlan:
    values = {"attack_start_round": 1, "attack_num": 2}
    values.update(overrides)
    return AttackPlan.for_model(kind, "lstm", **values)


# ---------------------------------------------------------------------------
# Configuration and sampling
# ---------------------------------------------------------------------------


def test_fed_config_validation():
    with pytest.raises(ConfigurationError):
        FedConfig(total_clients=10, clients_per_round=10)
    with pytest.raises(ConfigurationError):
        FedConfig(lr=0.0)
    with pytest.raises(ConfigurationError):
        FedConfig(total_rounds=0)
    with pytest.raises(ConfigurationError):
        FedConfig(checkpoint_every=-1)


@pytest.mark.parametrize("round_index", range(20))
def test_attacker_appears_exactly_once_in_attack_rounds(round_index):
    cfg = FedConfig()

    sampled = sample_clients(round_index, cfg, attack_active=True)

    assert sampled.count(ATTACKER_ID) == 1
    assert len(set(sampled)) == cfg.clients_per_round
    assert list(sampled) == sorted(sampled)


@pytest.mark.parametrize("round_index", range(20))
def test_attacker_absent_outside_attack_rounds(round_index):
    sampled = sample_clients(round_index, FedConfig(), attack_active=False)

    assert ATTACKER_ID not in sampled
    assert len(sampled) == 10


def test_sampling_is_deterministic_per_round_and_seed():
    cfg = FedConfig(seed=4)

    assert sample_clients(7, cfg, False) == sample_clients(7, cfg, False)
    assert len({sample_clients(round_index, cfg, False) for round_index in range(10)}) > 1


# ---------------------------------------------------------------------------
# FedAvg
# ---------------------------------------------------------------------------


def test_fedavg_equal_weights_is_the_mean(vector_factory, update_factory):
    updates = update_factory([[1.0, 3.0], [3.0, 5.0]])

    result = fedavg(updates, vector_factory([0.0, 0.0]))

    assert result.values.tolist() == [2.0, 4.0]


def test_fedavg_weights_by_sample_count(vector_factory, update_factory):
    updates = update_factory([[4.0, 0.0], [0.0, 4.0]], num_samples=[1, 3])

    result = fedavg(updates, vector_factory([0.0, 0.0]))

    np.testing.assert_allclose(result.values, [1.0, 3.0], rtol=0, atol=1e-15)


def test_fedavg_single_update_adds_its_delta(vector_factory, update_factory):
    result = fedavg(update_factory([[0.5, -1.0]]), vector_factory([1.0, 1.0]))

    assert result.values.tolist() == [1.5, 0.0]


def test_fedavg_matches_weighted_mean_on_random_sets(vector_factory, update_factory):
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(1, 8))
        deltas = rng.normal(size=(n, 6))
        counts = rng.integers(1, 50, size=n)
        start = rng.normal(size=6)

        result = fedavg(update_factory(deltas, counts), vector_factory(start))

        expected = start + (counts[:, None] * deltas).sum(axis=0) / counts.sum()
        np.testing.assert_allclose(result.values, expected, rtol=1e-12, atol=1e-12)


def test_fedavg_is_bitwise_permutation_invariant(vector_factory, update_factory):
    rng = np.random.default_rng(1)
    updates = update_factory(rng.normal(size=(7, 10)), rng.integers(1, 20, size=7))
    start = vector_factory(rng.normal(size=10))

    reference = fedavg(updates, start).values.tobytes()
    for _ in range(10):
        shuffled = [updates[index] for index in rng.permutation(len(updates))]
        assert fedavg(shuffled, start).values.tobytes() == reference


def test_fedavg_of_zero_deltas_keeps_global(vector_factory, update_factory):
    start = vector_factory([0.25, -3.0, 7.5, 1e-9])

    result = fedavg(update_factory(np.zeros((4, 4))), start)

    assert result.values.tobytes() == start.values.tobytes()


def test_fedavg_rejects_mismatched_schema_and_empty_input(vector_factory, update_factory):
    updates = update_factory([[1.0, 2.0, 3.0, 4.0]])

    with pytest.raises(ProtocolError):
        fedavg(updates, vector_factory([0.0, 0.0, 0.0, 0.0], layers={"a": 1, "b": 3}))
    with pytest.raises(ProtocolError):
        fedavg([], vector_factory([0.0, 0.0]))


def test_client_update_rejects_empty_shards(vector_factory):
    with pytest.raises(ProtocolError):
        ClientUpdate(1, vector_factory([1.0, 2.0]), 0)


def test_submitted_update_drops_the_flag(vector_factory):
    update = ClientUpdate(0, vector_factory([1.0, 2.0]), 5, malicious=True)

    submitted = update.submitted()

    assert not hasattr(submitted, "malicious")
    assert submitted.delta is update.delta


# ---------------------------------------------------------------------------
# Rounds
# ---------------------------------------------------------------------------


def test_benign_round_without_defense_equals_fedavg_of_local_deltas(toy_world, toy_fed, toy_trigger):
    params, shards, testsets = toy_world
    ctx = RoundContext(0, params, sample_clients(0, toy_fed, False))

    new_global, record = run_round(ctx, toy_fed, AttackPlan(), DefensePipeline(), shards, toy_trigger, testsets=testsets)

    local = [train_benign_client(ctx, toy_fed, shards[client_id]) for client_id in ctx.sampled_client_ids]
    expected = fedavg([update.submitted() for update in local], params)
    assert new_global.values.tobytes() == expected.values.tobytes()
    assert record.defense_diag.admitted_ids == frozenset(ctx.sampled_client_ids)
    assert not record.attack_active
    assert 0.0 <= record.ma <= 1.0 and 0.0 <= record.ba <= 1.0


def test_round_that_filters_everything_keeps_global(toy_world, toy_fed, toy_trigger, monkeypatch):
    params, shards, testsets = toy_world
    ctx = RoundContext(0, params, sample_clients(0, toy_fed, False))

    def drop_all(updates, pipeline, rng):
        return [], DefenseDiagnostics.selection(updates, [])

    monkeypatch.setattr(round_engine, "apply_pipeline", drop_all)
    new_global, record = run_round(ctx, toy_fed, AttackPlan(), DefensePipeline(), shards, toy_trigger, testsets=testsets)

    assert new_global is params
    assert record.defense_diag.filtered_all
    assert record.defense_diag.filtered_ids == frozenset(ctx.sampled_client_ids)


def test_attack_round_contains_the_attacker(toy_world, toy_fed, toy_trigger):
    params, shards, testsets = toy_world
    attack = toy_attack()
    ctx = RoundContext(1, params, sample_clients(1, toy_fed, attack.is_active(1)))

    _, record = run_round(ctx, toy_fed, attack, DefensePipeline(), shards, toy_trigger, testsets=testsets)

    assert record.attack_active
    assert ATTACKER_ID in record.defense_diag.admitted_ids


def test_missing_shard_is_a_data_error(toy_world, toy_fed, toy_trigger):
    params, shards, testsets = toy_world
    ctx = RoundContext(0, params, sample_clients(0, toy_fed, False))

    with pytest.raises(DataError):
        run_round(ctx, toy_fed, AttackPlan(), DefensePipeline(), shards[:-1], toy_trigger, testsets=testsets)


def test_federation_is_bitwise_deterministic(toy_world, toy_fed, toy_trigger):
    params, shards, testsets = toy_world
    defense = parse_pipeline("weak_dp(3.0, 0.001)")

    first = run_federation(params, toy_fed, toy_attack("sdba"), defense, shards, toy_trigger, testsets)
    second = run_federation(params, toy_fed, toy_attack("sdba"), defense, shards, toy_trigger, testsets)

    assert records_to_frame(first.records).equals(records_to_frame(second.records))
    assert first.final_params.values.tobytes() == second.final_params.values.tobytes()


def test_thread_pool_gives_the_same_rounds(toy_world, toy_fed, toy_trigger):
    params, shards, testsets = toy_world
    attack = toy_attack("neurotoxin")

    serial = run_federation(params, toy_fed, attack, DefensePipeline(), shards, toy_trigger, testsets)
    threaded = run_federation(params, replace(toy_fed, max_workers=3), attack, DefensePipeline(), shards, toy_trigger, testsets)

    assert records_to_frame(serial.records).equals(records_to_frame(threaded.records))
    assert serial.final_params.values.tobytes() == threaded.final_params.values.tobytes()


def test_attack_window_is_reflected_in_records(toy_world, toy_fed, toy_trigger):
    params, shards, testsets = toy_world
    seen = []

    result = run_federation(
        params, toy_fed, toy_attack(), DefensePipeline(), shards, toy_trigger, testsets, on_round=seen.append
    )

    assert [record.round for record in result.records] == [0, 1, 2, 3]
    assert [record.attack_active for record in result.records] == [False, True, True, False]
    assert seen == result.records
    assert all(record.wall_ms == 0 for record in result.records)


def test_skipped_defense_stage_is_noted(toy_world, toy_fed, toy_trigger):
    params, shards, testsets = toy_world

    result = run_federation(
        params, replace(toy_fed, total_rounds=1), AttackPlan(), DefensePipeline((MultiKrumStage(1),)), shards, toy_trigger, testsets
    )

    assert any(note.startswith("multi_krum_skipped") for note in result.records[0].defense_diag.notes)


def test_checkpoints_are_written_and_readable(tmp_path, toy_world, toy_fed, toy_model, toy_trigger):
    params, shards, testsets = toy_world
    cfg = replace(toy_fed, checkpoint_every=2)

    result = run_federation(params, cfg, AttackPlan(), DefensePipeline(), shards, toy_trigger, testsets, checkpoint_dir=tmp_path)

    assert [path.name for path in result.checkpoints] == ["global_round_0002.pvec", "global_round_0004.pvec"]
    final = read_param_vector(result.checkpoints[-1], toy_model)
    assert final.values.tobytes() == result.final_params.values.tobytes()


def test_unknown_target_layer_fails_before_training(toy_world, toy_fed, toy_trigger):
    params, shards, testsets = toy_world
    attack = AttackPlan(kind="sdba", target_layers=frozenset({"mlp.c_fc"}), attack_start_round=1, attack_num=1)

    with pytest.raises(ConfigurationError):
        run_federation(params, toy_fed, attack, DefensePipeline(), shards, toy_trigger, testsets)
