"""Accuracy metrics, Lifespan, and the round-record ledger."""

from metrics.accuracy import eval_accuracy
from metrics.lifespan import (
    LSTM_TAUS,
    TRANSFORMER_TAUS,
    LifespanQuery,
    LifespanResult,
    lifespan,
    lifespan_from_series,
    ma_snapshots,
    tau_sweep,
)
from metrics.records import ROUND_COLUMNS, RoundRecord, read_round_records, records_to_frame, write_round_records

__all__ = [
    "LSTM_TAUS",
    "ROUND_COLUMNS",
    "TRANSFORMER_TAUS",
    "LifespanQuery",
    "LifespanResult",
    "RoundRecord",
    "eval_accuracy",
    "lifespan",
    "lifespan_from_series",
    "ma_snapshots",
    "read_round_records",
    "records_to_frame",
    "tau_sweep",
    "write_round_records",
]
