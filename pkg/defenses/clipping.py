"""Norm clipping and weak differential privacy."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from defenses.diagnostics import DefenseDiagnostics
from federation.updates import SubmittedUpdate
from utils import ConfigurationError, project_to_ball


def norm_clip(updates: Sequence[SubmittedUpdate], bound: float) -> tuple[list[SubmittedUpdate], DefenseDiagnostics]:
    """Rescale every delta longer than `bound` to norm `bound`."""

    if bound <= 0:
        raise ConfigurationError(f"norm_clip bound must be positive, got {bound}")
    clipped = []
    clip_count = 0
    for update in updates:
        values, was_clipped = project_to_ball(update.delta.values, bound)
        if was_clipped:
            clip_count += 1
            update = update.with_delta(update.delta.with_values(values))
        clipped.append(update)
    return clipped, DefenseDiagnostics.passthrough(updates, clip_count=clip_count)


def add_gaussian_noise(
    updates: Sequence[SubmittedUpdate], sigma: float, rng: np.random.Generator
) -> list[SubmittedUpdate]:
    """Add N(0, sigma^2) noise to every coordinate of every delta, in update order."""

    if sigma == 0:
        return list(updates)
    noisy = []
    for update in updates:
        noise = rng.normal(0.0, sigma, size=len(update.delta))
        noisy.append(update.with_delta(update.delta.with_values(update.delta.values + noise)))
    return noisy


def weak_dp(
    updates: Sequence[SubmittedUpdate], bound: float, sigma: float, rng: np.random.Generator
) -> tuple[list[SubmittedUpdate], DefenseDiagnostics]:
    """Norm clipping followed by per-update Gaussian noise from the server stream."""

    if sigma < 0:
        raise ConfigurationError(f"weak_dp sigma must be non-negative, got {sigma}")
    clipped, diagnostics = norm_clip(updates, bound)
    noisy = add_gaussian_noise(clipped, sigma, rng)
    return noisy, DefenseDiagnostics.passthrough(updates, clip_count=diagnostics.clip_count, noise_sigma_applied=sigma)
