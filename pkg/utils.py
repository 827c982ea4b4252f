"""Shared helpers used by the simulator packages.

This file keeps common tasks in one place so the individual packages can focus
on the federated-learning logic. The helpers here handle practical details such
as:

- the exception types raised across the project;
- seeded random streams keyed by (seed, round, purpose, client);
- percent-to-count conversion used by every masking rule;
- projecting a vector onto an L2 ball without breaking idempotence;
- logging setup and the argparse help formatter used by the command line.
"""

from __future__ import annotations

import argparse
import logging
import math

import numpy as np


# Stream tags keep independent random streams from colliding when they share a
# seed and round number.
STREAM_SAMPLING = 11
STREAM_CLIENT_DATA = 23
STREAM_DEFENSE = 37
STREAM_CORPUS = 41
STREAM_POISON = 53
STREAM_TESTSET = 67

# Norms this close to the bound count as inside the ball. Without the slack a
# rescaled vector can land one ulp above the bound and get rescaled again.
BALL_TOLERANCE = 1e-12


class RichHelpFormatter(argparse.ArgumentDefaultsHelpFormatter, argparse.RawDescriptionHelpFormatter):
    """Argparse formatter that shows defaults and preserves readable examples."""


class SimulationError(Exception):
    """Base class for every error the simulator raises on purpose."""


class ConfigurationError(SimulationError, ValueError):
    """Raised when a configuration value or combination is invalid."""


class ConfigParseError(ConfigurationError):
    """Raised when a key=value configuration file cannot be parsed."""

    def __init__(self, message: str, *, key: str | None = None, line: int | None = None):
        location = []
        if line is not None:
            location.append(f"line {line}")
        if key is not None:
            location.append(f"key '{key}'")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(prefix + message)
        self.key = key
        self.line = line


class DataError(SimulationError, ValueError):
    """Raised when token data does not fit the model or corpus."""


class TrainingDivergenceError(SimulationError, RuntimeError):
    """Raised when local training produces a non-finite loss."""

    def __init__(self, step: int, loss: float):
        super().__init__(f"Training diverged at step {step} (loss={loss})")
        self.step = step
        self.loss = loss


class ProtocolError(SimulationError):
    """Raised when client updates do not match the global model layout."""


class EvaluationError(SimulationError):
    """Raised when a model cannot be evaluated on the given test set."""


class LifespanQueryError(SimulationError, ValueError):
    """Raised when a lifespan query does not fit the recorded rounds."""


class ComparisonError(SimulationError):
    """Raised when experiment configs cannot be compared side by side."""

    def __init__(self, message: str, differing_keys: list[str]):
        super().__init__(f"{message}: {', '.join(differing_keys)}")
        self.differing_keys = differing_keys


def stream_rng(seed: int, *keys: int) -> np.random.Generator:
    """Return a generator for one (seed, keys...) stream.

    Keys are typically (round, stream tag, client id). The same keys always
    produce the same stream, whatever order clients are trained in.
    """

    return np.random.default_rng([int(seed), *(int(key) for key in keys)])


def percent_count(percent: float, size: int) -> int:
    """Number of coordinates selected by `percent` of `size`, rounded up."""

    if percent <= 0 or size <= 0:
        return 0
    # Round before ceil: 5 percent of 200 must be 10, not 11 through float noise.
    return min(size, math.ceil(round(percent * size / 100.0, 9)))


def project_to_ball(values: np.ndarray, bound: float) -> tuple[np.ndarray, bool]:
    """Rescale `values` onto the L2 ball of radius `bound` when it lies outside.

    Returns the (possibly unchanged) array and whether rescaling happened. The
    input array is never modified.
    """

    norm = float(np.linalg.norm(values))
    if norm == 0.0 or norm <= bound * (1.0 + BALL_TOLERANCE):
        return values, False
    return values * (bound / norm), True


def configure_logging(*, quiet: bool = False, verbose: bool = False) -> None:
    """Send project logs to stderr with one consistent format."""

    level = logging.WARNING if quiet else logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)-7s %(name)s: %(message)s",
        datefmt="%H:%M:%S",
        force=True,
    )
