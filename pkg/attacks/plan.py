"""Attack plan: which attack, which layers, how much masking, and when."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field

from nn_core.params import LayerSchema
from utils import ConfigurationError


ATTACK_KINDS = ("none", "baseline", "neurotoxin", "sdba")

# Per-model SDBA defaults. For the LSTM, ih is masked lightly while hh is
# trained unmasked; the transformer targets mlp.c_fc alone without masking.
SDBA_DEFAULTS = {
    "lstm": {"target_layers": ("ih", "hh"), "layer_topk": (("ih", 5.0), ("hh", 0.0))},
    "transformer": {"target_layers": ("mlp.c_fc",), "layer_topk": ()},
}

# Default norm bounds the attacker projects onto when PGD is on.
DEFAULT_PGD_BOUND = {"lstm": 3.0, "transformer": 0.3}


@dataclass(frozen=True)
class AttackPlan:
    """Attacker configuration.

    `layer_topk` overrides `topk_percent` for individual target layers, e.g.
    (("ih", 5.0), ("hh", 0.0)). Injection runs for `attack_num` rounds starting
    at `attack_start_round`.
    """

    kind: str = "none"
    target_layers: frozenset[str] = field(default_factory=frozenset)
    topk_percent: float = 0.0
    layer_topk: tuple[tuple[str, float], ...] = ()
    attack_num: int = 40
    attack_start_round: int = 50
    pgd_enabled: bool = False
    pgd_delta: float = 3.0
    pgd_per_step: bool = False
    neurotoxin_mask_percent: float = 5.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "target_layers", frozenset(self.target_layers))
        object.__setattr__(self, "layer_topk", tuple((str(layer), float(k)) for layer, k in self.layer_topk))
        if self.kind not in ATTACK_KINDS:
            raise ConfigurationError(f"attack.kind must be one of {', '.join(ATTACK_KINDS)}, got '{self.kind}'")
        if not 0.0 <= self.topk_percent <= 100.0:
            raise ConfigurationError(f"attack.topk_percent must be in [0, 100], got {self.topk_percent}")
        for layer, k in self.layer_topk:
            if not 0.0 <= k <= 100.0:
                raise ConfigurationError(f"attack.layer_topk for '{layer}' must be in [0, 100], got {k}")
            if layer not in self.target_layers:
                raise ConfigurationError(f"attack.layer_topk names '{layer}', which is not a target layer")
        if not 0.0 < self.neurotoxin_mask_percent < 100.0:
            raise ConfigurationError(
                f"attack.neurotoxin_mask_percent must be in (0, 100), got {self.neurotoxin_mask_percent}"
            )
        if self.pgd_delta <= 0:
            raise ConfigurationError(f"attack.pgd_delta must be positive, got {self.pgd_delta}")
        if self.attack_num < 0 or self.attack_start_round < 0:
            raise ConfigurationError("attack.attack_num and attack.start_round must be non-negative")
        if self.kind == "sdba" and not self.target_layers:
            raise ConfigurationError("attack.target_layers must be non-empty when attack.kind=sdba")

    @classmethod
    def for_model(cls, kind: str, model_kind: str, **overrides) -> AttackPlan:
        """Plan with the SDBA layer defaults for `model_kind` filled in."""

        defaults = SDBA_DEFAULTS[model_kind]
        values = {
            "kind": kind,
            "target_layers": frozenset(defaults["target_layers"]),
            "layer_topk": defaults["layer_topk"],
            "pgd_delta": DEFAULT_PGD_BOUND[model_kind],
        }
        values.update(overrides)
        return cls(**values)

    @property
    def topk_by_layer(self) -> Mapping[str, float]:
        return dict(self.layer_topk)

    @property
    def last_attack_round(self) -> int:
        """Last round of the injection window (inclusive)."""

        return self.attack_start_round + self.attack_num - 1

    def is_active(self, round_index: int) -> bool:
        return self.kind != "none" and self.attack_start_round <= round_index <= self.last_attack_round

    def check_schema(self, schema: LayerSchema) -> None:
        """Raise ConfigurationError if a target layer is not in the model."""

        if self.target_layers:
            schema.resolve(sorted(self.target_layers))
