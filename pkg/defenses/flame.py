"""Simplified FLAME: majority cosine cluster, median-norm clipping, adaptive noise.

The clustering step uses single linkage on pairwise cosine distances, cut at the
median pairwise distance, instead of HDBSCAN. The largest cluster is admitted
when it holds a strict majority; otherwise every update is admitted and the
round is marked as degraded.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import pdist

from defenses.clipping import add_gaussian_noise
from defenses.diagnostics import DefenseDiagnostics
from defenses.multi_krum import stack_deltas
from federation.updates import SubmittedUpdate
from utils import project_to_ball


logger = logging.getLogger(__name__)

DEGRADED = "flame_degraded"


def cosine_distances(updates: Sequence[SubmittedUpdate]) -> np.ndarray:
    """Condensed pairwise cosine distances; a zero delta is at distance 1 from everything."""

    distances = pdist(stack_deltas(updates), metric="cosine")
    return np.clip(np.nan_to_num(distances, nan=1.0), 0.0, 2.0)


def majority_cluster(updates: Sequence[SubmittedUpdate]) -> np.ndarray | None:
    """Indices of the admitted cluster, or None when no cluster holds a majority."""

    n = len(updates)
    distances = cosine_distances(updates)
    # Slack keeps rounding noise on identical deltas from splitting them apart.
    cut = float(np.median(distances)) + 1e-12
    labels = fcluster(linkage(distances, method="single"), t=cut, criterion="distance")
    sizes = np.bincount(labels)
    # Largest cluster; among equal sizes prefer the one holding the lowest client id.
    client_ids = np.array([update.client_id for update in updates])
    best = max(
        np.unique(labels),
        key=lambda label: (sizes[label], -client_ids[labels == label].min()),
    )
    members = np.flatnonzero(labels == best)
    if members.shape[0] < n // 2 + 1:
        return None
    return members


def flame(
    updates: Sequence[SubmittedUpdate], lam: float, rng: np.random.Generator
) -> tuple[list[SubmittedUpdate], DefenseDiagnostics]:
    """Filter, clip to the admitted median norm S, then add N(0, (lam*S)^2) noise."""

    n = len(updates)
    if n < 3:
        logger.warning("flame skipped: needs at least 3 updates, got %d", n)
        return list(updates), DefenseDiagnostics.passthrough(updates, notes=(f"flame_skipped(n={n})",))

    members = majority_cluster(updates)
    notes: tuple[str, ...] = ()
    if members is None:
        logger.info("flame found no majority cluster; admitting all %d updates", n)
        members = np.arange(n)
        notes = (DEGRADED,)
    admitted = [updates[index] for index in members]

    median_norm = float(np.median([update.delta.norm() for update in admitted]))
    clipped = []
    clip_count = 0
    for update in admitted:
        values, was_clipped = project_to_ball(update.delta.values, median_norm)
        if was_clipped:
            clip_count += 1
            update = update.with_delta(update.delta.with_values(values))
        clipped.append(update)

    sigma = lam * median_norm
    noisy = add_gaussian_noise(clipped, sigma, rng)
    diagnostics = DefenseDiagnostics.selection(
        updates, noisy, clip_count=clip_count, noise_sigma_applied=sigma, notes=notes
    )
    logger.info("flame admitted %d/%d updates, S=%.4f", len(noisy), n, median_norm)
    return noisy, diagnostics
