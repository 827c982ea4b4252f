"""Shipped experiment presets at desk scale.

The LSTM presets use vocab 200, hidden 64, 100 clients with 10 per round and
300 rounds, injecting for 40 rounds from round 50. The GPT-style presets use
a one-block transformer and a 30-round injection window.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from attacks.plan import AttackPlan
from defenses.pipeline import DefensePipeline, parse_pipeline
from experiments.config_file import ExperimentConfig
from federation.config import DEFAULT_LR, FedConfig
from nn_core.config import ModelConfig
from utils import ConfigurationError


THREE_ATTACKS = ("baseline", "neurotoxin", "sdba")

# Server clipping bound per model kind.
CLIP_BOUND = {"lstm": 3.0, "transformer": 0.3}

# The six defenses of the LSTM grid, in panel order.
LSTM_DEFENSES = {
    "a": "multi_krum(1, 8)",
    "b": f"norm_clip({CLIP_BOUND['lstm']})",
    "c": f"weak_dp({CLIP_BOUND['lstm']}, 0.001)",
    "d": "flame(0.001)",
    "e": f"norm_clip({CLIP_BOUND['lstm']}), multi_krum(1, 8)",
    "f": f"weak_dp({CLIP_BOUND['lstm']}, 0.001), multi_krum(1, 8)",
}
GPT_NORM_CLIP = f"norm_clip({CLIP_BOUND['transformer']})"
GPT_WEAK_DP = f"weak_dp({CLIP_BOUND['transformer']}, 0.001)"


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    config: ExperimentConfig


def attack_for(model_kind: str, defense: DefensePipeline, **overrides) -> AttackPlan:
    """SDBA plan for `model_kind`; projects onto the server's bound when the pipeline clips."""

    bound = defense.clip_bound
    if bound is not None:
        overrides = {"pgd_enabled": True, "pgd_delta": bound, **overrides}
    return AttackPlan.for_model("sdba", model_kind, **overrides)


def lstm_config(name: str, defense: DefensePipeline = DefensePipeline(), **overrides) -> ExperimentConfig:
    values = {
        "name": name,
        "attack": attack_for("lstm", defense, attack_num=40, attack_start_round=50),
        "defense": defense,
        "compare_kinds": THREE_ATTACKS,
        "output_dir": f"results/{name}",
    }
    values.update(overrides)
    return ExperimentConfig(**values)


def transformer_config(name: str, defense: DefensePipeline = DefensePipeline(), **overrides) -> ExperimentConfig:
    model = ModelConfig(kind="transformer", vocab_size=200, hidden_dim=32, num_blocks=1, seq_len=16)
    values = {
        "name": name,
        "model": model,
        "fed": FedConfig(lr=DEFAULT_LR["transformer"]),
        "attack": attack_for("transformer", defense, attack_num=30, attack_start_round=50),
        "defense": defense,
        "compare_kinds": THREE_ATTACKS,
        "output_dir": f"results/{name}",
        "restricted_defense_menu": True,
    }
    values.update(overrides)
    return ExperimentConfig(**values)


def build_presets() -> dict[str, Preset]:
    presets = [
        Preset("fig9_no_defense", "LSTM, no defense: baseline vs Neurotoxin vs SDBA durability", lstm_config("fig9_no_defense")),
    ]
    for panel, pipeline in LSTM_DEFENSES.items():
        name = f"fig10_{panel}"
        presets.append(Preset(name, f"LSTM under {pipeline}", lstm_config(name, parse_pipeline(pipeline))))
    presets.extend(
        [
            Preset(
                "fig11_gpt_no_defense",
                "Transformer, no defense: three-attack durability",
                transformer_config("fig11_gpt_no_defense"),
            ),
            Preset(
                "fig12_gpt_normclip",
                f"Transformer under {GPT_NORM_CLIP}",
                transformer_config("fig12_gpt_normclip", parse_pipeline(GPT_NORM_CLIP)),
            ),
            Preset(
                "fig12_gpt_weakdp",
                f"Transformer under {GPT_WEAK_DP}",
                transformer_config("fig12_gpt_weakdp", parse_pipeline(GPT_WEAK_DP)),
            ),
            Preset(
                "table2_sweep",
                f"LSTM lifespan at tau 0.5 / 0.3 / 0.03 under {LSTM_DEFENSES['b']}",
                lstm_config("table2_sweep", parse_pipeline(LSTM_DEFENSES["b"]), taus=(0.5, 0.3, 0.03)),
            ),
            Preset(
                "table4_ma",
                "LSTM main accuracy with and without attacks (start, stop, BA < 0.5)",
                lstm_config("table4_ma", compare_kinds=("none", *THREE_ATTACKS)),
            ),
        ]
    )
    return {preset.name: preset for preset in presets}


PRESETS = build_presets()


def get_preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigurationError(f"Unknown preset '{name}'. Choose one of: {', '.join(PRESETS)}")
    return PRESETS[name].config


def with_rounds(cfg: ExperimentConfig, rounds: int) -> ExperimentConfig:
    return replace(cfg, fed=replace(cfg.fed, total_rounds=rounds))
