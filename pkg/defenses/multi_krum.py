"""Multi-Krum selection of mutually consistent updates."""

from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np
from scipy.spatial.distance import pdist, squareform

from defenses.diagnostics import DefenseDiagnostics
from federation.updates import SubmittedUpdate


logger = logging.getLogger(__name__)


def stack_deltas(updates: Sequence[SubmittedUpdate]) -> np.ndarray:
    return np.stack([update.delta.values for update in updates])


def krum_scores(updates: Sequence[SubmittedUpdate], f: int) -> np.ndarray:
    """Sum of squared L2 distances from each update to its n - f - 2 nearest others."""

    n = len(updates)
    neighbours = n - f - 2
    distances = squareform(pdist(stack_deltas(updates), metric="sqeuclidean"))
    # Each row sorted ascending starts with the zero self-distance; skip it.
    nearest = np.sort(distances, axis=1)[:, 1 : neighbours + 1]
    return nearest.sum(axis=1)


def multi_krum(
    updates: Sequence[SubmittedUpdate], f: int, m: int | None = None
) -> tuple[list[SubmittedUpdate], DefenseDiagnostics]:
    """Keep the m updates with the lowest Krum scores; ties go to lower client ids.

    With `m` unset, n - f - 1 updates survive. When Krum does not apply
    (n < 2f + 3 or m > n - f) every update passes through with a note.
    """

    n = len(updates)
    keep = n - f - 1 if m is None else m
    if n < 2 * f + 3 or keep > n - f or keep < 1:
        logger.warning("multi_krum skipped: n=%d, f=%d, m=%d", n, f, keep)
        return list(updates), DefenseDiagnostics.passthrough(updates, notes=(f"multi_krum_skipped(n={n})",))

    scores = krum_scores(updates, f)
    client_ids = np.array([update.client_id for update in updates])
    order = np.lexsort((client_ids, scores))
    survivors = [updates[index] for index in sorted(order[:keep])]
    diagnostics = DefenseDiagnostics.selection(updates, survivors)
    logger.info("multi_krum filtered clients %s", sorted(diagnostics.filtered_ids))
    return survivors, diagnostics
