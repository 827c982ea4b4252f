"""Side-by-side attack comparisons and the per-layer SDBA sweep."""

from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path

import pandas as pd

from experiments.config_file import ExperimentConfig, config_values
from experiments.reports import curves_from_aggregate, plot_metric
from experiments.runner import aggregate_rounds, lifespan_tables, run_labelled, write_frame
from metrics.records import RoundRecord
from utils import ComparisonError


logger = logging.getLogger(__name__)

# Keys that may differ between compared configs besides the attack stanza.
IGNORED_KEYS = ("run.name", "run.output_dir", "run.compare_kinds")

# Layer sets probed by `sweep_layers` when none are given.
DEFAULT_LAYER_SETS = {
    "lstm": (("encoder",), ("ih",), ("hh",), ("decoder",), ("ih", "hh")),
    "transformer": (("attn.c_attn",), ("attn.c_proj",), ("mlp.c_fc",), ("mlp.c_proj",)),
}


@dataclass(frozen=True, eq=False)
class ComparisonReport:
    """Overlaid curves, lifespan table with orderings, and the files written."""

    runs: dict[str, dict[int, list[RoundRecord]]]
    aggregate: pd.DataFrame
    lifespans: pd.DataFrame
    warnings: list[str] = field(default_factory=list)
    files: list[Path] = field(default_factory=list)


def differing_keys(cfgs: Sequence[ExperimentConfig]) -> list[str]:
    """Config keys outside the attack stanza whose values are not all equal."""

    tables = [config_values(cfg) for cfg in cfgs]
    keys = []
    for key in tables[0]:
        if key.startswith("attack.") or key in IGNORED_KEYS:
            continue
        if any(table[key] != tables[0][key] for table in tables[1:]):
            keys.append(key)
    return keys


def ordering(row: pd.Series) -> str:
    """'sdba (40) > neurotoxin (22) = baseline (22)' for one tau row."""

    ranked = sorted(row.items(), key=lambda item: -item[1])
    text = f"{ranked[0][0]} ({ranked[0][1]:g})"
    for (_, previous), (label, value) in zip(ranked, ranked[1:]):
        text += f" {'=' if value == previous else '>'} {label} ({value:g})"
    return text


def lifespan_comparison(lifespans: pd.DataFrame) -> pd.DataFrame:
    """Wide table: one row per tau, one lifespan column per label, plus the ordering."""

    wide = lifespans.pivot(index="tau", columns="attack", values="lifespan")
    wide = wide[list(dict.fromkeys(lifespans["attack"]))].sort_index(ascending=False)
    wide["ordering"] = wide.apply(ordering, axis=1)
    wide.columns.name = None
    return wide.reset_index()


def _report(
    labelled: dict[str, tuple[ExperimentConfig, str]],
    output_dir: Path | None,
    stem: str,
    title: str,
    warnings: list[str],
) -> ComparisonReport:
    first = next(iter(labelled.values()))[0]
    runs, files = run_labelled(labelled, output_dir)
    aggregate = aggregate_rounds(runs)
    lifespans, _ = lifespan_tables(runs, first.taus, first.attack.attack_start_round)
    table = lifespan_comparison(lifespans)
    if output_dir is not None:
        files.append(write_frame(aggregate, output_dir / f"{stem}_aggregate.csv"))
        files.append(write_frame(table, output_dir / f"{stem}_lifespan.csv"))
        files.append(
            plot_metric(
                curves_from_aggregate(aggregate, "ba"),
                "ba",
                output_dir / f"{stem}_ba.svg",
                title=title,
                attack_window=(first.attack.attack_start_round, first.attack.last_attack_round),
            )
        )
    return ComparisonReport(runs, aggregate, table, warnings, files)


def compare_attacks(cfgs: Sequence[ExperimentConfig], output_dir: str | Path | None = None) -> ComparisonReport:
    """Run configs that differ only in their attack stanza and overlay their BA.

    Raises ComparisonError listing the differing keys otherwise. Configs with
    identical attack stanzas still run; their series get a `#n` suffix and a
    warning is recorded.
    """

    if not cfgs:
        raise ComparisonError("Nothing to compare", [])
    cfgs = [cfg.with_attack_kind(cfg.attack.kind) for cfg in cfgs]
    mismatched = differing_keys(cfgs)
    if mismatched:
        raise ComparisonError("Configs differ outside the attack stanza", mismatched)

    labelled: dict[str, tuple[ExperimentConfig, str]] = {}
    warnings = []
    seen: dict[str, int] = {}
    for cfg in cfgs:
        label = cfg.attack.kind
        duplicate = next((other for other, _ in labelled.values() if other.attack == cfg.attack), None)
        if duplicate is not None:
            message = f"Duplicate attack stanza for '{label}'; plotting it twice"
            logger.warning(message)
            warnings.append(message)
        seen[label] = seen.get(label, 0) + 1
        if seen[label] > 1:
            label = f"{label}#{seen[label]}"
        labelled[label] = (cfg, cfg.attack.kind)

    output = Path(output_dir) if output_dir is not None else None
    return _report(labelled, output, "compare", "Backdoor accuracy per round by attack", warnings)


def layer_label(layers: Iterable[str]) -> str:
    return "+".join(layers)


def sweep_layers(
    cfg: ExperimentConfig,
    layer_sets: Sequence[Sequence[str]] | None = None,
    output_dir: str | Path | None = None,
) -> ComparisonReport:
    """Run SDBA once per target-layer set, everything else unchanged.

    Per-layer k entries are kept for layers inside the set and dropped for the
    rest; `topk_percent` covers the others.
    """

    layer_sets = layer_sets or DEFAULT_LAYER_SETS[cfg.model.kind]
    labelled: dict[str, tuple[ExperimentConfig, str]] = {}
    for layers in layer_sets:
        targets = frozenset(layers)
        attack = replace(
            cfg.attack,
            kind="sdba",
            target_layers=targets,
            layer_topk=tuple((layer, k) for layer, k in cfg.attack.layer_topk if layer in targets),
        )
        labelled[layer_label(layers)] = (replace(cfg, attack=attack, compare_kinds=()), "sdba")

    output = Path(output_dir) if output_dir is not None else None
    return _report(labelled, output, "layers", "SDBA backdoor accuracy per round by target layers", [])
