"""Multi-seed experiment runs and their CSV/SVG outputs.

Output files in `cfg.output_dir`:

    rounds_<attack>_seed<seed>.csv   one round ledger per attack kind and seed
    aggregate.csv                    mean MA/BA per attack kind and round
    lifespan.csv                     mean lifespan per attack kind and tau
    lifespan_by_seed.csv             lifespan and censoring per seed
    ma_snapshots.csv                 MA at attack start, attack stop and BA < 0.5
    ba.svg, ma.svg                   aggregate curves
    config.txt                       the resolved configuration
"""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path

import pandas as pd

from corpus.config import ClientShard
from corpus.markov import build_benign_testset, generate_corpus
from corpus.poisoning import build_backdoor_testset
from experiments.config_file import ExperimentConfig, write_config
from experiments.reports import curves_from_aggregate, plot_metric
from federation.round_engine import EvaluationSets, run_federation
from metrics.lifespan import ma_snapshots, tau_sweep
from metrics.records import RoundRecord, write_round_records
from nn_core.batch import Batch
from nn_core.models import init_model
from nn_core.params import ParamVector


logger = logging.getLogger(__name__)

RunsByLabel = Mapping[str, Mapping[int, Sequence[RoundRecord]]]

# BA threshold of the "BA < 50%" MA snapshot column.
SNAPSHOT_TAU = 0.5


@dataclass(frozen=True, eq=False)
class SeedSetup:
    """Corpus, test sets and initial model shared by every attack kind of one seed."""

    seed: int
    shards: list[ClientShard]
    testsets: EvaluationSets
    initial_params: ParamVector


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    """Container returned by `run_experiment`."""

    config: ExperimentConfig
    runs: dict[str, dict[int, list[RoundRecord]]]
    aggregate: pd.DataFrame
    lifespans: pd.DataFrame
    lifespans_by_seed: pd.DataFrame
    snapshots: pd.DataFrame
    files: list[Path] = field(default_factory=list)


def prepare_seed(cfg: ExperimentConfig, seed: int) -> SeedSetup:
    model_cfg, corpus_cfg, _ = cfg.for_seed(seed)
    shards = generate_corpus(corpus_cfg)
    benign_rows = build_benign_testset(corpus_cfg, cfg.trigger, cfg.benign_testset_size)
    testsets = EvaluationSets(
        benign=Batch.from_sequences(benign_rows),
        backdoor=build_backdoor_testset(cfg.trigger, corpus_cfg, cfg.backdoor_testset_size),
    )
    return SeedSetup(seed, shards, testsets, init_model(model_cfg))


def run_seed(
    cfg: ExperimentConfig, kind: str, setup: SeedSetup, *, checkpoint_dir: Path | None = None
) -> list[RoundRecord]:
    """One full federated run of attack `kind` on a prepared seed."""

    _, _, fed_cfg = cfg.for_seed(setup.seed)
    attack = replace(cfg.attack, kind=kind)
    logger.info("Running %s, attack %s, seed %d (%d rounds)", cfg.name, kind, setup.seed, fed_cfg.total_rounds)
    result = run_federation(
        setup.initial_params,
        fed_cfg,
        attack,
        cfg.defense,
        setup.shards,
        cfg.trigger,
        setup.testsets,
        checkpoint_dir=checkpoint_dir,
        record_wall_time=cfg.record_wall_time,
    )
    return result.records


def run_labelled(
    runs: Mapping[str, tuple[ExperimentConfig, str]], output_dir: Path | None = None
) -> tuple[dict[str, dict[int, list[RoundRecord]]], list[Path]]:
    """Run every (config, attack kind) under its label for all of the config's seeds.

    All configs must share seeds and corpus settings; the corpus of a seed is
    generated once and reused across labels.
    """

    results: dict[str, dict[int, list[RoundRecord]]] = {label: {} for label in runs}
    files: list[Path] = []
    first_cfg = next(iter(runs.values()))[0]
    for seed in first_cfg.seeds:
        setup = prepare_seed(first_cfg, seed)
        for label, (cfg, kind) in runs.items():
            checkpoint_dir = None
            if output_dir is not None and cfg.fed.checkpoint_every:
                checkpoint_dir = output_dir / "checkpoints" / f"{label}_seed{seed}"
            records = run_seed(cfg, kind, setup, checkpoint_dir=checkpoint_dir)
            results[label][seed] = records
            if output_dir is not None:
                files.append(write_round_records(records, output_dir / f"rounds_{label}_seed{seed}.csv"))
    return results, files


def aggregate_rounds(runs: RunsByLabel) -> pd.DataFrame:
    """Mean MA and BA per label and round across seeds."""

    frames = []
    for label, by_seed in runs.items():
        for seed, records in by_seed.items():
            frames.append(
                pd.DataFrame(
                    {
                        "attack": label,
                        "seed": seed,
                        "round": [record.round for record in records],
                        "ma": [record.ma for record in records],
                        "ba": [record.ba for record in records],
                    }
                )
            )
    combined = pd.concat(frames, ignore_index=True)
    aggregate = combined.groupby(["attack", "round"], sort=False)[["ma", "ba"]].mean().reset_index()
    return aggregate[["attack", "round", "ma", "ba"]]


def lifespan_tables(runs: RunsByLabel, taus: Sequence[float], attack_start: int) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Per-seed lifespans and their mean per label and tau."""

    rows = []
    for label, by_seed in runs.items():
        for seed, records in by_seed.items():
            sweep = tau_sweep(records, taus, attack_start)
            sweep.insert(0, "seed", seed)
            sweep.insert(0, "attack", label)
            rows.append(sweep)
    by_seed = pd.concat(rows, ignore_index=True)
    summary = (
        by_seed.groupby(["attack", "tau"], sort=False)
        .agg(lifespan=("lifespan", "mean"), censored_seeds=("censored", "sum"))
        .reset_index()
    )
    summary["censored_seeds"] = summary["censored_seeds"].astype(int)
    return summary, by_seed


def snapshot_table(runs: RunsByLabel, attack_start: int, attack_num: int) -> pd.DataFrame:
    """Mean MA snapshots per label; NaN snapshots are skipped in the mean."""

    rows = []
    for label, by_seed in runs.items():
        snapshots = pd.DataFrame(
            [ma_snapshots(records, attack_start, attack_num, SNAPSHOT_TAU) for records in by_seed.values()]
        )
        row = snapshots.mean(axis=0)
        rows.append({"attack": label, **row.to_dict()})
    return pd.DataFrame(rows, columns=["attack", "start_attack", "stop_attack", "ba_below_tau"])


def write_frame(frame: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def run_experiment(cfg: ExperimentConfig, *, plots: bool = True) -> ExperimentResult:
    """Run every attack kind of `cfg` for every seed and write the reports."""

    output_dir = cfg.output_dir
    output_dir.mkdir(parents=True, exist_ok=True)
    files = [write_config(cfg, output_dir / "config.txt")]

    runs, round_files = run_labelled({kind: (cfg, kind) for kind in cfg.attack_kinds}, output_dir)
    files.extend(round_files)

    aggregate = aggregate_rounds(runs)
    lifespans, lifespans_by_seed = lifespan_tables(runs, cfg.taus, cfg.attack.attack_start_round)
    snapshots = snapshot_table(runs, cfg.attack.attack_start_round, cfg.attack.attack_num)
    files.append(write_frame(aggregate, output_dir / "aggregate.csv"))
    files.append(write_frame(lifespans, output_dir / "lifespan.csv"))
    files.append(write_frame(lifespans_by_seed, output_dir / "lifespan_by_seed.csv"))
    files.append(write_frame(snapshots, output_dir / "ma_snapshots.csv"))

    if plots:
        window = (cfg.attack.attack_start_round, cfg.attack.last_attack_round)
        for metric in ("ba", "ma"):
            files.append(
                plot_metric(
                    curves_from_aggregate(aggregate, metric),
                    metric,
                    output_dir / f"{metric}.svg",
                    title=f"{cfg.name}: {metric.upper()} per round, mean of {len(cfg.seeds)} seed(s)",
                    attack_window=window,
                )
            )

    logger.info("Wrote %d files to %s", len(files), output_dir)
    return ExperimentResult(cfg, runs, aggregate, lifespans, lifespans_by_seed, snapshots, files)
