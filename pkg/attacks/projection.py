"""Projection of a malicious update onto the defense's L2 norm ball."""

from __future__ import annotations

from nn_core.params import ParamVector
from utils import ConfigurationError, project_to_ball


def pgd_project(delta: ParamVector, bound: float) -> ParamVector:
    """Rescale `delta` to norm `bound` when it is longer; otherwise return it as is.

    Direction is preserved, and projecting an already projected vector is a
    bitwise no-op. A zero vector comes back unchanged.
    """

    if bound <= 0:
        raise ConfigurationError(f"PGD bound must be positive, got {bound}")
    values, _ = project_to_ball(delta.values, bound)
    return delta if values is delta.values else delta.with_values(values)
