"""Backdoor durability: Lifespan, tau sweeps and MA snapshots.

Lifespan counts rounds from the first injection round t_s to the last round
whose backdoor accuracy is still above tau:

    lifespan = max{t >= t_s : BA_t > tau} - t_s

An empty set gives 0. When BA is still above tau in the final recorded round
the value is censored: the true lifespan is at least the reported one.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np
import pandas as pd

from metrics.records import RoundRecord
from utils import LifespanQueryError


LSTM_TAUS = (0.5, 0.3, 0.03)
TRANSFORMER_TAUS = (0.8, 0.5, 0.2)


@dataclass(frozen=True)
class LifespanQuery:
    tau: float
    attack_start: int

    def __post_init__(self) -> None:
        if not 0.0 < self.tau < 1.0:
            raise LifespanQueryError(f"tau must be in (0, 1), got {self.tau}")


@dataclass(frozen=True)
class LifespanResult:
    rounds: int
    censored: bool


def lifespan_from_series(ba: Sequence[float] | np.ndarray, tau: float, attack_start: int) -> LifespanResult:
    """Lifespan of one backdoor-accuracy series indexed by round."""

    series = np.asarray(ba, dtype=np.float64)
    if not 0 <= attack_start < series.shape[0]:
        raise LifespanQueryError(f"attack_start {attack_start} is outside the {series.shape[0]} recorded rounds")
    above = np.flatnonzero(series[attack_start:] > tau)
    if above.size == 0:
        return LifespanResult(0, False)
    last = attack_start + int(above[-1])
    return LifespanResult(last - attack_start, last == series.shape[0] - 1)


def ba_series(records: Sequence[RoundRecord]) -> np.ndarray:
    rounds = [record.round for record in records]
    if rounds != list(range(len(records))):
        raise LifespanQueryError("Round records must cover rounds 0..T-1 in order")
    return np.array([record.ba for record in records])


def lifespan(records: Sequence[RoundRecord], query: LifespanQuery) -> LifespanResult:
    return lifespan_from_series(ba_series(records), query.tau, query.attack_start)


def tau_sweep(records: Sequence[RoundRecord] | np.ndarray, taus: Iterable[float], attack_start: int) -> pd.DataFrame:
    """Lifespan and censoring flag for each tau, one row per tau."""

    series = np.asarray(records, dtype=np.float64) if isinstance(records, np.ndarray) else ba_series(records)
    rows = []
    for tau in taus:
        query = LifespanQuery(float(tau), attack_start)
        result = lifespan_from_series(series, query.tau, query.attack_start)
        rows.append({"tau": query.tau, "lifespan": result.rounds, "censored": result.censored})
    return pd.DataFrame(rows, columns=["tau", "lifespan", "censored"])


def ma_snapshots(records: Sequence[RoundRecord], attack_start: int, attack_num: int, tau: float = 0.5) -> pd.Series:
    """MA when the attack starts, when it stops, and when BA first drops below tau afterwards."""

    by_round = {record.round: record for record in records}
    if attack_start not in by_round:
        raise LifespanQueryError(f"attack_start {attack_start} is outside the recorded rounds")
    stop = min(attack_start + attack_num - 1, max(by_round))
    after = [record for record in records if record.round > stop and record.ba < tau]
    return pd.Series(
        {
            "start_attack": by_round[attack_start].ma,
            "stop_attack": by_round[stop].ma,
            "ba_below_tau": after[0].ma if after else math.nan,
        },
        dtype="float64",
    )
