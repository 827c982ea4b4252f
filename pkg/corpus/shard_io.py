"""Plain-text export and import of client shards.

One file per client, named `client_<id>.txt`, one sequence per line as
space-separated token ids.
"""

from __future__ import annotations

import re
from collections.abc import Iterable
from pathlib import Path

import numpy as np

from corpus.config import ClientShard
from utils import DataError


FILE_PATTERN = re.compile(r"client_(\d+)\.txt$")


def export_shards(shards: Iterable[ClientShard], directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for shard in shards:
        path = directory / f"client_{shard.client_id}.txt"
        np.savetxt(path, shard.sequences, fmt="%d", delimiter=" ")
        written.append(path)
    return written


def import_shards(directory: str | Path, batch_size: int = 16) -> list[ClientShard]:
    """Read every `client_<id>.txt` in `directory`, ordered by client id."""

    found = []
    for path in Path(directory).iterdir():
        match = FILE_PATTERN.match(path.name)
        if match:
            found.append((int(match.group(1)), path))
    if not found:
        raise DataError(f"No client_<id>.txt files in {directory}")

    shards = []
    for client_id, path in sorted(found):
        sequences = np.loadtxt(path, dtype=np.int64, ndmin=2)
        shards.append(ClientShard(client_id, sequences, batch_size))
    return shards
