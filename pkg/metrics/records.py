"""Per-round measurements and their CSV ledger."""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import pandas as pd

from defenses.diagnostics import DefenseDiagnostics


# Column order of the round ledger is fixed.
ROUND_COLUMNS = ["round", "ma", "ba", "attack_active", "admitted", "filtered", "clip_count", "wall_ms"]


@dataclass(frozen=True)
class RoundRecord:
    round: int
    ma: float
    ba: float
    attack_active: bool
    defense_diag: DefenseDiagnostics = field(default_factory=DefenseDiagnostics)
    wall_ms: int = 0


def _format_ids(ids: Iterable[int]) -> str:
    return " ".join(str(client_id) for client_id in sorted(ids))


def _parse_ids(text: str) -> frozenset[int]:
    return frozenset(int(piece) for piece in str(text).split())


def records_to_frame(records: Sequence[RoundRecord]) -> pd.DataFrame:
    rows = [
        {
            "round": record.round,
            "ma": record.ma,
            "ba": record.ba,
            "attack_active": record.attack_active,
            "admitted": _format_ids(record.defense_diag.admitted_ids),
            "filtered": _format_ids(record.defense_diag.filtered_ids),
            "clip_count": record.defense_diag.clip_count,
            "wall_ms": record.wall_ms,
        }
        for record in records
    ]
    return pd.DataFrame(rows, columns=ROUND_COLUMNS)


def write_round_records(records: Sequence[RoundRecord], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    records_to_frame(records).to_csv(path, index=False, lineterminator="\n")
    return path


def read_round_ledger(path: str | Path) -> pd.DataFrame:
    """Load a round CSV with exact float round-tripping."""

    return pd.read_csv(
        path,
        float_precision="round_trip",
        dtype={"admitted": str, "filtered": str},
        keep_default_na=False,
    )


def read_round_records(path: str | Path) -> list[RoundRecord]:
    """Rebuild RoundRecord objects from a CSV written by `write_round_records`.

    Only the columns in the file come back; noise sigma and notes are not
    part of the ledger.
    """

    frame = read_round_ledger(path)
    records = []
    for row in frame.itertuples(index=False):
        diagnostics = DefenseDiagnostics(
            admitted_ids=_parse_ids(row.admitted),
            filtered_ids=_parse_ids(row.filtered),
            clip_count=int(row.clip_count),
        )
        records.append(
            RoundRecord(
                round=int(row.round),
                ma=float(row.ma),
                ba=float(row.ba),
                attack_active=bool(row.attack_active),
                defense_diag=diagnostics,
                wall_ms=int(row.wall_ms),
            )
        )
    return records
