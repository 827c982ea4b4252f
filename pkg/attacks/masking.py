"""Gradient masks used by the attacks.

All masks zero coordinates and leave the rest bit-for-bit untouched. When a
rule picks the largest-magnitude coordinates, ties go to the lower coordinate
index first.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np

from nn_core.params import LayerSchema, ParamVector
from utils import ConfigurationError, percent_count


@dataclass(frozen=True, eq=False)
class GradientMask:
    """Boolean keep-vector aligned with a ParamVector."""

    keep: np.ndarray

    @classmethod
    def for_layers(cls, schema: LayerSchema, selected: Iterable[str]) -> GradientMask:
        """Keep only the coordinates of the selected layers."""

        keep = np.zeros(schema.total, dtype=bool)
        keep[schema.index_of(selected)] = True
        return cls(keep)

    @classmethod
    def drop_largest(cls, magnitudes: np.ndarray, scope: np.ndarray, percent: float) -> GradientMask:
        """Drop the top `percent` of `scope` coordinates ranked by `magnitudes`."""

        keep = np.ones(magnitudes.shape[0], dtype=bool)
        count = percent_count(percent, scope.shape[0])
        if count:
            # Stable sort on negated magnitude keeps equal values in index order.
            ranked = np.argsort(-np.abs(magnitudes[scope]), kind="stable")
            keep[scope[ranked[:count]]] = False
        return cls(keep)

    def apply(self, vector: ParamVector) -> ParamVector:
        if self.keep.shape[0] != len(vector):
            raise ConfigurationError(f"Mask of length {self.keep.shape[0]} does not fit a vector of length {len(vector)}")
        return vector.with_values(np.where(self.keep, vector.values, 0.0))

    def combine(self, other: GradientMask) -> GradientMask:
        return GradientMask(self.keep & other.keep)

    @property
    def zeroed_count(self) -> int:
        return int((~self.keep).sum())


def layer_wise_mask(grad: ParamVector, selected: Iterable[str]) -> ParamVector:
    """Zero every layer that is not selected."""

    return GradientMask.for_layers(grad.schema, selected).apply(grad)


def topk_mask(grad: ParamVector, k_percent: float, scope: Iterable[str]) -> ParamVector:
    """Zero the k% largest-magnitude coordinates inside the scoped layers."""

    if not 0.0 <= k_percent <= 100.0:
        raise ConfigurationError(f"k_percent must be in [0, 100], got {k_percent}")
    scope = list(scope)
    if not scope and k_percent > 0:
        raise ConfigurationError("topk_mask needs at least one scoped layer when k > 0")
    index = grad.schema.index_of(scope)
    return GradientMask.drop_largest(grad.values, index, k_percent).apply(grad)


def neurotoxin_mask(grad: ParamVector, benign_direction: ParamVector, mask_percent: float) -> ParamVector:
    """Zero `grad` where the benign direction moves most, across the whole model."""

    grad.check_compatible(benign_direction)
    return neurotoxin_keep_mask(benign_direction, mask_percent).apply(grad)


def neurotoxin_keep_mask(benign_direction: ParamVector, mask_percent: float) -> GradientMask:
    everything = np.arange(len(benign_direction))
    return GradientMask.drop_largest(benign_direction.values, everything, mask_percent)
