"""Ordered defense pipelines and their text form.

A pipeline is written in config files as comma-separated stage calls, e.g.
`norm_clip(3.0), multi_krum(1, 8)`. An empty string means no defense.
"""

from __future__ import annotations

import re
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from defenses.clipping import norm_clip, weak_dp
from defenses.diagnostics import DefenseDiagnostics
from defenses.flame import flame
from defenses.multi_krum import multi_krum
from federation.updates import SubmittedUpdate
from utils import ConfigurationError


StageResult = tuple[list[SubmittedUpdate], DefenseDiagnostics]


@dataclass(frozen=True)
class MultiKrumStage:
    f: int = 1
    m: int | None = None
    name = "multi_krum"

    def __post_init__(self) -> None:
        if self.f < 0:
            raise ConfigurationError(f"multi_krum f must be non-negative, got {self.f}")
        if self.m is not None and self.m < 1:
            raise ConfigurationError(f"multi_krum m must be at least 1, got {self.m}")

    def apply(self, updates: Sequence[SubmittedUpdate], rng: np.random.Generator) -> StageResult:
        return multi_krum(updates, self.f, self.m)

    def arguments(self) -> list:
        return [self.f] if self.m is None else [self.f, self.m]


@dataclass(frozen=True)
class NormClipStage:
    bound: float = 3.0
    name = "norm_clip"

    def __post_init__(self) -> None:
        if self.bound <= 0:
            raise ConfigurationError(f"norm_clip bound must be positive, got {self.bound}")

    def apply(self, updates: Sequence[SubmittedUpdate], rng: np.random.Generator) -> StageResult:
        return norm_clip(updates, self.bound)

    def arguments(self) -> list:
        return [self.bound]


@dataclass(frozen=True)
class WeakDPStage:
    bound: float = 3.0
    sigma: float = 0.001
    name = "weak_dp"

    def __post_init__(self) -> None:
        if self.bound <= 0 or self.sigma < 0:
            raise ConfigurationError(f"weak_dp needs bound > 0 and sigma >= 0, got ({self.bound}, {self.sigma})")

    def apply(self, updates: Sequence[SubmittedUpdate], rng: np.random.Generator) -> StageResult:
        return weak_dp(updates, self.bound, self.sigma, rng)

    def arguments(self) -> list:
        return [self.bound, self.sigma]


@dataclass(frozen=True)
class FlameStage:
    lam: float = 0.001
    name = "flame"

    def __post_init__(self) -> None:
        if self.lam < 0:
            raise ConfigurationError(f"flame lambda must be non-negative, got {self.lam}")

    def apply(self, updates: Sequence[SubmittedUpdate], rng: np.random.Generator) -> StageResult:
        return flame(updates, self.lam, rng)

    def arguments(self) -> list:
        return [self.lam]


DefenseStage = MultiKrumStage | NormClipStage | WeakDPStage | FlameStage

STAGE_TYPES = {
    "multi_krum": (MultiKrumStage, (int, int)),
    "norm_clip": (NormClipStage, (float,)),
    "weak_dp": (WeakDPStage, (float, float)),
    "flame": (FlameStage, (float,)),
}

STAGE_PATTERN = re.compile(r"\s*([a-z_]+)\s*\(([^()]*)\)\s*")


@dataclass(frozen=True)
class DefensePipeline:
    """Defense stages applied in order before aggregation; empty means none."""

    stages: tuple[DefenseStage, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "stages", tuple(self.stages))

    @property
    def stage_names(self) -> tuple[str, ...]:
        return tuple(stage.name for stage in self.stages)

    @property
    def clip_bound(self) -> float | None:
        """Tightest norm bound among clipping stages, or None without one."""

        bounds = [stage.bound for stage in self.stages if isinstance(stage, (NormClipStage, WeakDPStage))]
        return min(bounds) if bounds else None

    def __str__(self) -> str:
        return ", ".join(format_stage(stage) for stage in self.stages)


def format_stage(stage: DefenseStage) -> str:
    return f"{stage.name}({', '.join(repr(argument) for argument in stage.arguments())})"


def parse_stage(text: str) -> DefenseStage:
    """Parse one stage call such as `weak_dp(3.0, 0.001)`."""

    match = STAGE_PATTERN.fullmatch(text)
    if not match:
        raise ConfigurationError(f"Cannot parse defense stage '{text.strip()}'")
    name, raw_arguments = match.groups()
    if name not in STAGE_TYPES:
        raise ConfigurationError(f"Unknown defense stage '{name}'. Choose one of: {', '.join(STAGE_TYPES)}")
    stage_type, converters = STAGE_TYPES[name]
    pieces = [piece.strip() for piece in raw_arguments.split(",") if piece.strip()]
    if len(pieces) > len(converters):
        raise ConfigurationError(f"{name} takes at most {len(converters)} arguments, got {len(pieces)}")
    try:
        arguments = [convert(piece) for convert, piece in zip(converters, pieces)]
    except ValueError as exc:
        raise ConfigurationError(f"Bad argument in defense stage '{text.strip()}': {exc}") from exc
    return stage_type(*arguments)


def parse_pipeline(text: str) -> DefensePipeline:
    """Parse `stage(...), stage(...)`; blank text or `none` is the empty pipeline."""

    text = text.strip()
    if not text or text == "none":
        return DefensePipeline()
    stages = []
    position = 0
    # Split on commas that sit between closing and opening parentheses.
    for match in re.finditer(r"\)\s*,", text):
        stages.append(parse_stage(text[position : match.start() + 1]))
        position = match.end()
    stages.append(parse_stage(text[position:]))
    return DefensePipeline(tuple(stages))


def apply_pipeline(
    updates: Sequence[SubmittedUpdate], pipeline: DefensePipeline, rng: np.random.Generator | None = None
) -> StageResult:
    """Run every stage in order and merge their diagnostics."""

    rng = rng if rng is not None else np.random.default_rng(0)
    current = list(updates)
    diagnostics = DefenseDiagnostics.passthrough(updates)
    for stage in pipeline.stages:
        if not current:
            break
        current, stage_diagnostics = stage.apply(current, rng)
        diagnostics = diagnostics.then(stage_diagnostics)
    return current, diagnostics
