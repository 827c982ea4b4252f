"""Command-line entry point for backdoor-durability experiments."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

PROJECT_ROOT = Path(__file__).resolve().parents[1]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from experiments.compare import compare_attacks, sweep_layers
from experiments.config_file import ExperimentConfig, apply_overrides, config_help, parse_config, serialize_config
from experiments.presets import PRESETS, get_preset, with_rounds
from experiments.reports import format_table
from experiments.runner import run_experiment
from utils import RichHelpFormatter, SimulationError, configure_logging


logger = logging.getLogger(__name__)

EXAMPLES = """
Examples:
  python experiments/run_experiment.py presets
  python experiments/run_experiment.py run --preset fig9_no_defense --rounds 300
  python experiments/run_experiment.py run --config my.cfg --set attack.topk_percent=5 --seed 1
  python experiments/run_experiment.py dry-run --preset fig10_e
  python experiments/run_experiment.py compare --config sdba.cfg --config baseline.cfg
  python experiments/run_experiment.py layers --preset fig9_no_defense --rounds 120
"""


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", action="append", default=[], help="key=value config file (repeat for compare)")
    common.add_argument("--preset", choices=sorted(PRESETS), help="start from a shipped preset")
    common.add_argument("--seed", type=int, help="run a single seed instead of run.seeds")
    common.add_argument("--rounds", type=int, help="override fed.total_rounds")
    common.add_argument("--output-dir", help="override run.output_dir")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    common.add_argument("--quiet", action="store_true", help="only log warnings and skip printed summaries")
    common.add_argument("--verbose", action="store_true", help="log per-step training detail")

    parser = argparse.ArgumentParser(
        description="Simulate federated backdoor attacks on next-token prediction and measure their durability.",
        formatter_class=RichHelpFormatter,
        epilog=EXAMPLES + "\n" + config_help(),
    )
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("run", parents=[common], formatter_class=RichHelpFormatter, help="run every seed and write reports")
    commands.add_parser(
        "compare", parents=[common], formatter_class=RichHelpFormatter, help="overlay attacks that differ only in the attack stanza"
    )
    commands.add_parser("presets", parents=[common], formatter_class=RichHelpFormatter, help="list shipped presets")
    commands.add_parser(
        "dry-run", parents=[common], formatter_class=RichHelpFormatter, help="print the resolved config without training"
    )
    layers = commands.add_parser("layers", parents=[common], formatter_class=RichHelpFormatter, help="SDBA per-layer sweep")
    layers.add_argument(
        "--layer-set",
        dest="layer_sets",
        action="append",
        default=[],
        metavar="LAYERS",
        help="comma-separated target layers for one sweep entry (repeatable)",
    )
    return parser


def resolve_config(args: argparse.Namespace, path: str | None) -> ExperimentConfig:
    """Preset or file, then --set overrides, then the shortcut flags."""

    if path is not None:
        cfg = parse_config(path, args.overrides)
    else:
        cfg = apply_overrides(get_preset(args.preset) if args.preset else ExperimentConfig(), args.overrides)
    if args.rounds is not None:
        cfg = with_rounds(cfg, args.rounds)
    if args.seed is not None:
        cfg = replace(cfg, seeds=(args.seed,))
    if args.output_dir is not None:
        cfg = replace(cfg, output_dir=Path(args.output_dir))
    return cfg


def resolve_configs(args: argparse.Namespace) -> list[ExperimentConfig]:
    if args.config and args.preset:
        raise SimulationError("Use either --config or --preset, not both")
    if len(args.config) > 1 and args.command != "compare":
        raise SimulationError(f"'{args.command}' takes a single --config")
    return [resolve_config(args, path) for path in args.config] or [resolve_config(args, None)]


def print_presets() -> None:
    width = max(len(name) for name in PRESETS)
    for name, preset in PRESETS.items():
        print(f"{name:<{width}}  {preset.description}")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(quiet=args.quiet, verbose=args.verbose)

    try:
        if args.command == "presets":
            print_presets()
            return 0

        cfgs = resolve_configs(args)
        if args.command == "dry-run":
            for cfg in cfgs:
                print(serialize_config(cfg), end="")
            return 0

        if args.command == "compare":
            if len(cfgs) == 1:
                cfgs = [cfgs[0].with_attack_kind(kind) for kind in cfgs[0].attack_kinds]
            report = compare_attacks(cfgs, cfgs[0].output_dir)
            if not args.quiet:
                print("\nLifespan by attack and tau:")
                print(format_table(report.lifespans))
            return 0

        if args.command == "layers":
            layer_sets = [tuple(piece.strip() for piece in text.split(",") if piece.strip()) for text in args.layer_sets]
            report = sweep_layers(cfgs[0], layer_sets or None, cfgs[0].output_dir)
            if not args.quiet:
                print("\nLifespan by target layers and tau:")
                print(format_table(report.lifespans))
            return 0

        result = run_experiment(cfgs[0])
        if not args.quiet:
            print("\nLifespan by attack and tau (mean over seeds):")
            print(format_table(result.lifespans))
            print("\nMain accuracy snapshots:")
            print(format_table(result.snapshots))
            print(f"\nSaved outputs to {cfgs[0].output_dir}")
        return 0
    except (SimulationError, OSError) as exc:
        logger.error("%s", exc)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
