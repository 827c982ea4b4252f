"""SVG line plots of BA/MA per round and printable summary tables."""

from __future__ import annotations

from collections.abc import Mapping
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import pandas as pd


# Baseline dotted green, Neurotoxin dashed blue, SDBA solid red.
SERIES_STYLES = {
    "none": {"color": "black", "linestyle": "-", "linewidth": 1.0},
    "baseline": {"color": "tab:green", "linestyle": ":", "linewidth": 1.6},
    "neurotoxin": {"color": "tab:blue", "linestyle": "--", "linewidth": 1.4},
    "sdba": {"color": "tab:red", "linestyle": "-", "linewidth": 1.6},
}

METRIC_LABELS = {"ba": "Backdoor accuracy", "ma": "Main accuracy"}

# Fixed salt and no date so the same data gives the same file.
SVG_RC = {"svg.hashsalt": "fl-backdoor-sim", "svg.fonttype": "path"}


def plot_metric(
    curves: Mapping[str, pd.Series],
    metric: str,
    path: str | Path,
    *,
    title: str,
    attack_window: tuple[int, int] | None = None,
) -> Path:
    """Draw one line per labelled series (round index -> value) and save as SVG."""

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=(10, 5))
        if attack_window is not None:
            ax.axvspan(attack_window[0], attack_window[1], color="grey", alpha=0.12, label="injection window")
        for label, series in curves.items():
            style = SERIES_STYLES.get(label.split("#")[0], {})
            ax.plot(series.index, series.to_numpy(), label=label, **style)
        ax.set_title(title)
        ax.set_xlabel("Round")
        ax.set_ylabel(METRIC_LABELS.get(metric, metric))
        ax.set_ylim(-0.02, 1.02)
        ax.grid(alpha=0.3)
        ax.legend(loc="best")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path


def curves_from_aggregate(aggregate: pd.DataFrame, metric: str) -> dict[str, pd.Series]:
    """Split the long aggregate table into one round-indexed series per attack label."""

    return {
        label: group.set_index("round")[metric].rename(label)
        for label, group in aggregate.groupby("attack", sort=False)
    }


def format_table(table: pd.DataFrame) -> str:
    return table.to_string(index=False, float_format=lambda value: f"{value:.4f}")
