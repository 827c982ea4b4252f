"""Desk-scale directional checks. Slow; run with `pytest --run-slow`."""

from __future__ import annotations

from dataclasses import replace

import pytest

from attacks.plan import AttackPlan
from corpus.config import CorpusConfig
from defenses.pipeline import parse_pipeline
from experiments.compare import sweep_layers
from experiments.config_file import ExperimentConfig
from experiments.presets import get_preset
from experiments.runner import run_experiment
from federation.config import FedConfig
from nn_core.config import ModelConfig


pytestmark = pytest.mark.slow

SEEDS = (0, 1, 2)


def small_lstm_experiment(output_dir, **overrides) -> ExperimentConfig:
    values = {
        "model": ModelConfig(kind="lstm", vocab_size=50, hidden_dim=16, seq_len=12),
        "corpus": CorpusConfig(vocab_size=50, num_clients=20, sequences_per_client=16, seq_len=12, batch_size=8),
        "fed": FedConfig(total_clients=20, clients_per_round=5, total_rounds=40, local_epochs_benign=1, local_epochs_malicious=5),
        "attack": AttackPlan.for_model("sdba", "lstm", attack_start_round=10, attack_num=10),
        "compare_kinds": ("none", "baseline", "sdba"),
        "seeds": (0,),
        "output_dir": output_dir,
        "name": "directional",
        "benign_testset_size": 200,
        "backdoor_testset_size": 200,
    }
    values.update(overrides)
    return ExperimentConfig(**values)


def preset_run(name: str, output_dir, **overrides):
    cfg = replace(get_preset(name), seeds=SEEDS, output_dir=output_dir, **overrides)
    return run_experiment(cfg, plots=False)


@pytest.fixture(scope="module")
def undefended_lstm(tmp_path_factory):
    """No-attack reference plus the three attacks on the undefended LSTM preset."""

    return preset_run("table4_ma", tmp_path_factory.mktemp("table4_ma"))


def post_injection_ba(result, rounds: int = 50) -> dict[str, float]:
    stop = result.config.attack.last_attack_round
    after = result.aggregate[(result.aggregate["round"] > stop) & (result.aggregate["round"] <= stop + rounds)]
    return after.groupby("attack")["ba"].mean().to_dict()


# ---------------------------------------------------------------------------
# Small LSTM run
# ---------------------------------------------------------------------------


def test_injection_raises_backdoor_accuracy(tmp_path):
    result = run_experiment(small_lstm_experiment(tmp_path), plots=False)

    ba = result.aggregate.pivot(index="round", columns="attack", values="ba")
    start, stop = 10, 19
    for kind in ("baseline", "sdba"):
        assert ba[kind].iloc[start + 4] > ba[kind].iloc[start - 1]
        assert ba[kind].iloc[stop] > ba["none"].iloc[stop]


def test_clipping_shortens_the_baseline_backdoor(tmp_path):
    cfg = small_lstm_experiment(tmp_path / "plain", compare_kinds=())
    cfg = replace(cfg, attack=replace(cfg.attack, kind="baseline"))
    clipped = replace(cfg, defense=parse_pipeline("norm_clip(0.5)"), output_dir=tmp_path / "clipped")

    plain_result = run_experiment(cfg, plots=False)
    clipped_result = run_experiment(clipped, plots=False)

    plain = plain_result.lifespans.set_index("tau")["lifespan"]
    defended = clipped_result.lifespans.set_index("tau")["lifespan"]
    assert defended.loc[0.03] <= plain.loc[0.03]


# ---------------------------------------------------------------------------
# Shipped presets, mean over three seeds
# ---------------------------------------------------------------------------


def test_sdba_outlives_neurotoxin_and_baseline_without_defense(undefended_lstm):
    lowest = min(undefended_lstm.config.taus)
    table = undefended_lstm.lifespans[undefended_lstm.lifespans["tau"] == lowest].set_index("attack")["lifespan"]

    assert table["sdba"] >= table["neurotoxin"] >= table["baseline"]
    assert table["sdba"] - table["baseline"] >= 20


def test_attacks_keep_final_main_accuracy_within_one_point(undefended_lstm):
    aggregate = undefended_lstm.aggregate
    final = aggregate[aggregate["round"] == aggregate["round"].max()].set_index("attack")["ma"]

    for kind in ("baseline", "neurotoxin", "sdba"):
        assert abs(final[kind] - final["none"]) <= 0.01


@pytest.mark.parametrize("name", ["fig10_b", "fig10_c"])
def test_sdba_stays_ahead_of_baseline_under_clipping(name, tmp_path):
    result = preset_run(name, tmp_path, compare_kinds=("baseline", "sdba"))

    ba = post_injection_ba(result)

    assert result.config.attack.pgd_enabled
    assert ba["sdba"] - ba["baseline"] >= 0.10


def test_transformer_backdoor_lasts_longer_in_the_first_mlp_layer(tmp_path):
    cfg = replace(get_preset("fig11_gpt_no_defense"), seeds=SEEDS, output_dir=tmp_path)

    report = sweep_layers(cfg, [("mlp.c_fc",), ("attn.c_proj",)])

    aggregate = report.aggregate
    window = aggregate["round"].between(cfg.attack.attack_start_round, cfg.attack.last_attack_round)
    assert aggregate[window & (aggregate["attack"] == "mlp.c_fc")]["ba"].max() >= 0.8
    lowest = report.lifespans[report.lifespans["tau"] == min(cfg.taus)].iloc[0]
    assert lowest["mlp.c_fc"] > lowest["attn.c_proj"]
