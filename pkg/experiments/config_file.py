"""Experiment configuration and its line-oriented key=value file format.

A config file holds one `section.key = value` per line. Blank lines and lines
starting with `#` are ignored. Every key is listed in `CONFIG_KEYS`, which
drives parsing, serialization and the `--help` epilog, so an unknown key is
always an error. Keys that are left out take their defaults; a few defaults
depend on the model kind (learning rate, SDBA layers, PGD bound, taus).

Example:

    model.kind = lstm
    attack.kind = sdba
    attack.target_layers = ih, hh
    attack.layer_topk = ih:5, hh:0
    defense.pipeline = norm_clip(3.0), multi_krum(1, 8)
    run.seeds = 0, 1, 2
"""

from __future__ import annotations

import re
from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from attacks.plan import ATTACK_KINDS, DEFAULT_PGD_BOUND, AttackPlan
from corpus.config import CorpusConfig, TriggerSpec
from defenses.pipeline import DefensePipeline, parse_pipeline
from federation.config import DEFAULT_LR, FedConfig
from metrics.lifespan import LSTM_TAUS, TRANSFORMER_TAUS
from nn_core.config import ModelConfig
from nn_core.models import build_schema
from utils import ConfigParseError, ConfigurationError


DEFAULT_TAUS = {"lstm": LSTM_TAUS, "transformer": TRANSFORMER_TAUS}

# Stages the transformer experiments skip: pairwise distances over every
# parameter are too expensive at language-model scale.
DISTANCE_BASED_STAGES = ("multi_krum", "flame")

SETTING_PATTERN = re.compile(r"^\s*([a-z_]+\.[a-z_]+)\s*=(.*)$")
KEY_IN_MESSAGE = re.compile(r"\b([a-z]+\.[a-z_]+)\b")


@dataclass(frozen=True, eq=True)
class ExperimentConfig:
    """Everything one experiment needs, validated across sections.

    The per-section seeds are overwritten for every entry of `seeds` by
    `for_seed`. `compare_kinds` runs the same setup once per attack kind; when
    empty only `attack.kind` runs.
    """

    model: ModelConfig = field(default_factory=ModelConfig)
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    fed: FedConfig = field(default_factory=FedConfig)
    attack: AttackPlan = field(default_factory=lambda: AttackPlan.for_model("none", "lstm"))
    defense: DefensePipeline = field(default_factory=DefensePipeline)
    trigger: TriggerSpec | None = None
    taus: tuple[float, ...] = ()
    seeds: tuple[int, ...] = (0, 1, 2)
    output_dir: Path = Path("results")
    name: str = "experiment"
    compare_kinds: tuple[str, ...] = ()
    record_wall_time: bool = False
    restricted_defense_menu: bool = False
    benign_testset_size: int = 500
    backdoor_testset_size: int = 500

    def __post_init__(self) -> None:
        if self.trigger is None:
            object.__setattr__(self, "trigger", TriggerSpec.default(self.corpus.vocab_size))
        if not self.taus:
            object.__setattr__(self, "taus", DEFAULT_TAUS[self.model.kind])
        object.__setattr__(self, "taus", tuple(float(tau) for tau in self.taus))
        object.__setattr__(self, "seeds", tuple(int(seed) for seed in self.seeds))
        object.__setattr__(self, "compare_kinds", tuple(self.compare_kinds))
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        self.validate()

    def validate(self) -> None:
        """Cross-section checks; raise ConfigurationError naming the key."""

        if self.model.vocab_size != self.corpus.vocab_size:
            raise ConfigurationError(
                f"corpus.vocab_size ({self.corpus.vocab_size}) must equal model.vocab_size ({self.model.vocab_size})"
            )
        if self.corpus.seq_len - 1 > self.model.seq_len:
            raise ConfigurationError(
                f"corpus.seq_len ({self.corpus.seq_len}) gives {self.corpus.seq_len - 1} input positions, "
                f"more than model.seq_len ({self.model.seq_len})"
            )
        if self.attack.attack_start_round >= self.fed.total_rounds:
            raise ConfigurationError(
                f"attack.start_round ({self.attack.attack_start_round}) must be below fed.total_rounds ({self.fed.total_rounds})"
            )
        if self.corpus.num_clients != self.fed.total_clients:
            raise ConfigurationError(
                f"fed.total_clients ({self.fed.total_clients}) must equal corpus.num_clients ({self.corpus.num_clients})"
            )
        self.attack.check_schema(build_schema(self.model))
        self.trigger.check_vocab(self.model.vocab_size)
        if len(self.trigger.pattern) > self.corpus.seq_len:
            raise ConfigurationError(f"trigger.prefix does not fit corpus.seq_len ({self.corpus.seq_len})")
        if not self.seeds:
            raise ConfigurationError("run.seeds needs at least one seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigurationError("run.seeds contains duplicates")
        for tau in self.taus:
            if not 0.0 < tau < 1.0:
                raise ConfigurationError(f"run.taus entries must be in (0, 1), got {tau}")
        for kind in self.compare_kinds:
            if kind not in ATTACK_KINDS:
                raise ConfigurationError(f"run.compare_kinds entry '{kind}' is not one of {', '.join(ATTACK_KINDS)}")
            if kind == "sdba" and not self.attack.target_layers:
                raise ConfigurationError("run.compare_kinds includes sdba but attack.target_layers is empty")
        if len(set(self.compare_kinds)) != len(self.compare_kinds):
            raise ConfigurationError("run.compare_kinds contains duplicates")
        if self.benign_testset_size < 1 or self.backdoor_testset_size < 1:
            raise ConfigurationError("run.benign_testset_size and run.backdoor_testset_size must be positive")
        if self.restricted_defense_menu and self.model.kind == "transformer":
            rejected = [name for name in self.defense.stage_names if name in DISTANCE_BASED_STAGES]
            if rejected:
                raise ConfigurationError(
                    f"defense.pipeline uses {', '.join(rejected)}, which run.restricted_defense_menu excludes for transformers"
                )

    @property
    def attack_kinds(self) -> tuple[str, ...]:
        return self.compare_kinds or (self.attack.kind,)

    def with_attack_kind(self, kind: str) -> ExperimentConfig:
        return replace(self, attack=replace(self.attack, kind=kind), compare_kinds=())

    def for_seed(self, seed: int) -> tuple[ModelConfig, CorpusConfig, FedConfig]:
        """Model, corpus and federation configs with `seed` filled in."""

        return replace(self.model, seed=seed), replace(self.corpus, seed=seed), replace(self.fed, seed=seed)


# ---------------------------------------------------------------------------
# Value parsers and formatters
# ---------------------------------------------------------------------------


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected true or false, got '{text}'")


def _split(text: str) -> list[str]:
    return [piece for piece in re.split(r"[,\s]+", text.strip()) if piece]


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(piece) for piece in _split(text))


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(piece) for piece in _split(text))


def _parse_words(text: str) -> tuple[str, ...]:
    return tuple(_split(text))


def _parse_layer_topk(text: str) -> tuple[tuple[str, float], ...]:
    pairs = []
    for piece in _split(text):
        layer, separator, value = piece.partition(":")
        if not separator or not layer:
            raise ValueError(f"expected layer:percent, got '{piece}'")
        pairs.append((layer, float(value)))
    return tuple(pairs)


def _format_plain(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _format_list(values: Iterable[Any]) -> str:
    return ", ".join(_format_plain(value) for value in values)


def _format_layer_topk(pairs: Iterable[tuple[str, float]]) -> str:
    return ", ".join(f"{layer}:{k!r}" for layer, k in pairs)


@dataclass(frozen=True)
class ConfigKey:
    """One accepted configuration key."""

    key: str
    field: str
    parse: Callable[[str], Any]
    default: str
    help: str
    format: Callable[[Any], str] = _format_plain

    @property
    def section(self) -> str:
        return self.key.split(".", 1)[0]


CONFIG_KEYS = (
    ConfigKey("model.kind", "kind", str, "lstm", "lstm or transformer"),
    ConfigKey("model.vocab_size", "vocab_size", int, "200", "vocabulary size V"),
    ConfigKey("model.hidden_dim", "hidden_dim", int, "64", "hidden width H (LSTM) or model width d (transformer)"),
    ConfigKey("model.num_blocks", "num_blocks", int, "1", "transformer blocks; ignored by the LSTM"),
    ConfigKey("model.seq_len", "seq_len", int, "16", "longest input sequence the model accepts"),
    ConfigKey("corpus.vocab_size", "vocab_size", int, "200", "must equal model.vocab_size"),
    ConfigKey("corpus.num_clients", "num_clients", int, "100", "client shards; must equal fed.total_clients"),
    ConfigKey("corpus.sequences_per_client", "sequences_per_client", int, "32", "sequences in every shard"),
    ConfigKey("corpus.seq_len", "seq_len", int, "16", "tokens per sequence"),
    ConfigKey("corpus.dirichlet_alpha", "dirichlet_alpha", float, "0.5", "topic-mixing concentration; small is more non-iid"),
    ConfigKey("corpus.batch_size", "batch_size", int, "16", "sequences per local SGD batch"),
    ConfigKey("corpus.num_topics", "num_topics", int, "8", "latent topics mixed per client"),
    ConfigKey("corpus.zipf_exponent", "zipf_exponent", float, "1.0", "token popularity skew; high ids are rare"),
    ConfigKey("fed.total_clients", "total_clients", int, "100", "K, client 0 is the attacker"),
    ConfigKey("fed.clients_per_round", "clients_per_round", int, "10", "k, clients sampled each round"),
    ConfigKey("fed.total_rounds", "total_rounds", int, "300", "T, federated rounds"),
    ConfigKey("fed.local_epochs_benign", "local_epochs_benign", int, "2", "local epochs of benign clients"),
    ConfigKey("fed.local_epochs_malicious", "local_epochs_malicious", int, "5", "local epochs of the attacker"),
    ConfigKey("fed.lr", "lr", float, "auto", "local learning rate; 0.5 for lstm, 0.05 for transformer"),
    ConfigKey("fed.max_workers", "max_workers", int, "1", "threads for local training within a round"),
    ConfigKey("fed.checkpoint_every", "checkpoint_every", int, "0", "write the global model every N rounds; 0 disables"),
    ConfigKey("attack.kind", "kind", str, "none", "none, baseline, neurotoxin or sdba"),
    ConfigKey(
        "attack.target_layers",
        "target_layers",
        _parse_words,
        "auto",
        "SDBA layer selectors; ih, hh for lstm and mlp.c_fc for transformer",
        _format_list,
    ),
    ConfigKey("attack.topk_percent", "topk_percent", float, "0.0", "k for target layers without their own entry"),
    ConfigKey(
        "attack.layer_topk",
        "layer_topk",
        _parse_layer_topk,
        "auto",
        "per-layer k as layer:percent; ih:5, hh:0 for lstm",
        _format_layer_topk,
    ),
    ConfigKey("attack.attack_num", "attack_num", int, "40", "rounds of injection"),
    ConfigKey("attack.start_round", "attack_start_round", int, "50", "first injection round"),
    ConfigKey("attack.pgd_enabled", "pgd_enabled", _parse_bool, "false", "project the attacker update onto a norm ball"),
    ConfigKey("attack.pgd_delta", "pgd_delta", float, "auto", "PGD radius; 3.0 for lstm, 0.3 for transformer"),
    ConfigKey("attack.pgd_per_step", "pgd_per_step", _parse_bool, "false", "also project after every local step"),
    ConfigKey("attack.neurotoxin_mask_percent", "neurotoxin_mask_percent", float, "5.0", "Neurotoxin top coordinates skipped"),
    ConfigKey("defense.pipeline", "pipeline", parse_pipeline, "none", "ordered stages, e.g. norm_clip(3.0), multi_krum(1, 8)", str),
    ConfigKey("trigger.prefix", "trigger_prefix", _parse_ints, "auto", "trigger token ids; default the three highest ids", _format_list),
    ConfigKey("trigger.target", "target_token", int, "auto", "backdoor target token; default the fourth highest id"),
    ConfigKey("trigger.poison_ratio", "poison_ratio", float, "0.5", "share of attacker sequences carrying the trigger"),
    ConfigKey("run.name", "name", str, "experiment", "label used in reports"),
    ConfigKey("run.seeds", "seeds", _parse_ints, "0, 1, 2", "one full run per seed", _format_list),
    ConfigKey("run.taus", "taus", _parse_floats, "auto", "lifespan thresholds; 0.5, 0.3, 0.03 for lstm", _format_list),
    ConfigKey("run.output_dir", "output_dir", Path, "results", "directory for CSV and SVG outputs"),
    ConfigKey("run.compare_kinds", "compare_kinds", _parse_words, "", "attack kinds to run side by side", _format_list),
    ConfigKey("run.record_wall_time", "record_wall_time", _parse_bool, "false", "measure wall_ms; CSVs stop being reproducible"),
    ConfigKey("run.restricted_defense_menu", "restricted_defense_menu", _parse_bool, "false", "reject multi_krum and flame for transformers"),
    ConfigKey("run.benign_testset_size", "benign_testset_size", int, "500", "held-out sequences for MA"),
    ConfigKey("run.backdoor_testset_size", "backdoor_testset_size", int, "500", "trigger sequences for BA"),
)

KEYS_BY_NAME = {entry.key: entry for entry in CONFIG_KEYS}


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _section(values: Mapping[str, Any], name: str) -> dict[str, Any]:
    return {KEYS_BY_NAME[key].field: value for key, value in values.items() if KEYS_BY_NAME[key].section == name}


def build_config(values: Mapping[str, Any]) -> ExperimentConfig:
    """Assemble an ExperimentConfig from parsed key values, filling defaults."""

    model = ModelConfig(**_section(values, "model"))
    corpus = CorpusConfig(**_section(values, "corpus"))

    fed_values = _section(values, "fed")
    fed_values.setdefault("lr", DEFAULT_LR[model.kind])
    fed = FedConfig(**fed_values)

    attack_values = _section(values, "attack")
    kind = attack_values.pop("kind", "none")
    if "target_layers" in attack_values:
        attack_values.setdefault("pgd_delta", DEFAULT_PGD_BOUND[model.kind])
        attack = AttackPlan(kind=kind, **attack_values)
    else:
        attack = AttackPlan.for_model(kind, model.kind, **attack_values)

    trigger_values = _section(values, "trigger")
    if "trigger_prefix" in trigger_values or "target_token" in trigger_values:
        if not {"trigger_prefix", "target_token"} <= set(trigger_values):
            raise ConfigurationError("trigger.prefix and trigger.target must be given together")
        trigger = TriggerSpec(**trigger_values)
    else:
        trigger = TriggerSpec.default(corpus.vocab_size, trigger_values.get("poison_ratio", 0.5))

    run_values = _section(values, "run")
    defense = values.get("defense.pipeline", DefensePipeline())
    return ExperimentConfig(
        model=model, corpus=corpus, fed=fed, attack=attack, defense=defense, trigger=trigger, **run_values
    )


def _key_for_error(message: str, present: Iterable[str]) -> str | None:
    present = list(present)
    for candidate in KEY_IN_MESSAGE.findall(message):
        if candidate in KEYS_BY_NAME:
            return candidate
    return present[0] if present else None


def parse_config_text(text: str, overrides: Iterable[str] = ()) -> ExperimentConfig:
    """Parse config text, then apply `--set key=value` overrides in order.

    Raises ConfigParseError naming the offending key and, for file lines, the
    line number.
    """

    values: dict[str, Any] = {}
    lines: dict[str, int | None] = {}

    def take(raw: str, line: int | None) -> None:
        match = SETTING_PATTERN.match(raw)
        if not match:
            raise ConfigParseError(f"expected section.key = value, got '{raw.strip()}'", line=line)
        key, raw_value = match.group(1), match.group(2).strip()
        if key not in KEYS_BY_NAME:
            raise ConfigParseError("unknown key", key=key, line=line)
        if line is not None and key in lines:
            raise ConfigParseError(f"duplicate key, first set on line {lines[key]}", key=key, line=line)
        try:
            values[key] = KEYS_BY_NAME[key].parse(raw_value)
        except (ValueError, ConfigurationError) as exc:
            raise ConfigParseError(f"invalid value '{raw_value}': {exc}", key=key, line=line) from exc
        lines[key] = line

    for number, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        take(raw, number)
    for override in overrides:
        take(override, None)

    try:
        return build_config(values)
    except ConfigParseError:
        raise
    except (ConfigurationError, TypeError) as exc:
        key = _key_for_error(str(exc), lines)
        raise ConfigParseError(str(exc), key=key, line=lines.get(key) if key else None) from exc


def parse_config(path: str | Path, overrides: Iterable[str] = ()) -> ExperimentConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"), overrides)


def apply_overrides(cfg: ExperimentConfig, overrides: Iterable[str]) -> ExperimentConfig:
    """Re-parse `cfg` with extra key=value settings on top."""

    overrides = list(overrides)
    if not overrides:
        return cfg
    return parse_config_text(serialize_config(cfg), overrides)


# ---------------------------------------------------------------------------
# Serialization and help
# ---------------------------------------------------------------------------


def config_values(cfg: ExperimentConfig) -> dict[str, Any]:
    """Every key of `CONFIG_KEYS` mapped to its value in `cfg`."""

    sections = {
        "model": cfg.model,
        "corpus": cfg.corpus,
        "fed": cfg.fed,
        "attack": cfg.attack,
        "trigger": cfg.trigger,
        "run": cfg,
    }
    values: dict[str, Any] = {}
    for entry in CONFIG_KEYS:
        if entry.key == "defense.pipeline":
            values[entry.key] = cfg.defense
        elif entry.key == "attack.target_layers":
            values[entry.key] = sorted(cfg.attack.target_layers)
        else:
            values[entry.key] = getattr(sections[entry.section], entry.field)
    return values


def serialize_config(cfg: ExperimentConfig) -> str:
    """Write `cfg` in the key=value format; parsing the text gives `cfg` back."""

    lines = [f"# {cfg.name}"]
    current_section = None
    for key, value in config_values(cfg).items():
        entry = KEYS_BY_NAME[key]
        if entry.section != current_section:
            if current_section is not None:
                lines.append("")
            current_section = entry.section
        text = entry.format(value)
        lines.append(f"{key} = {text}" if text else f"{key} =")
    return "\n".join(lines) + "\n"


def write_config(cfg: ExperimentConfig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_config(cfg), encoding="utf-8")
    return path


def config_help() -> str:
    """Epilog listing every key with its default."""

    width = max(len(entry.key) for entry in CONFIG_KEYS)
    rows = [f"  {entry.key:<{width}}  {entry.help} (default: {entry.default or 'empty'})" for entry in CONFIG_KEYS]
    return "Config keys:\n" + "\n".join(rows)
