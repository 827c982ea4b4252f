"""Flat parameter vectors partitioned into named layer segments.

Every client update, attack mask and defense in the simulator works on the same
currency: one float64 vector plus the schema that says which slice belongs to
which layer. Layer names follow the models' own taxonomy (`encoder`, `ih`, `hh`,
`decoder` for the LSTM; GPT-2 style names for the transformer).
"""

from __future__ import annotations

import struct
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from nn_core.config import ModelConfig
from utils import ConfigurationError, DataError, ProtocolError


MAGIC = b"PVEC"


@dataclass(frozen=True)
class LayerSchema:
    """Ordered (layer name, length) table describing a ParamVector."""

    layers: tuple[tuple[str, int], ...]
    config: ModelConfig | None = None

    def __post_init__(self) -> None:
        names = [name for name, _ in self.layers]
        if not names:
            raise ConfigurationError("A layer schema needs at least one layer")
        if len(set(names)) != len(names):
            raise ConfigurationError(f"Layer names must be unique, got {names}")
        for name, length in self.layers:
            if length < 1:
                raise ConfigurationError(f"Layer '{name}' must have positive length, got {length}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.layers)

    @cached_property
    def offsets(self) -> dict[str, slice]:
        """Slice of the flat vector owned by each layer."""

        offsets = {}
        start = 0
        for name, length in self.layers:
            offsets[name] = slice(start, start + length)
            start += length
        return offsets

    @property
    def total(self) -> int:
        return sum(length for _, length in self.layers)

    def resolve(self, selectors: Iterable[str]) -> tuple[str, ...]:
        """Map layer selectors to schema names, in schema order.

        A selector matches a layer with the same name or whose name ends with
        `.<selector>`, so `mlp.c_fc` selects `h.0.mlp.c_fc` and `h.1.mlp.c_fc`.
        """

        selected = set()
        for selector in selectors:
            matches = [name for name in self.names if name == selector or name.endswith("." + selector)]
            if not matches:
                raise ConfigurationError(f"Unknown layer '{selector}'. Layers: {', '.join(self.names)}")
            selected.update(matches)
        return tuple(name for name in self.names if name in selected)

    def index_of(self, selectors: Iterable[str]) -> np.ndarray:
        """Flat coordinate indices covered by the selected layers, ascending."""

        parts = [np.arange(self.offsets[name].start, self.offsets[name].stop) for name in self.resolve(selectors)]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class ParamVector:
    """Model parameters (or a gradient, or a delta) as one flat float64 vector."""

    values: np.ndarray
    schema: LayerSchema

    def __post_init__(self) -> None:
        # Copy so freezing the buffer never freezes the caller's array.
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1 or values.shape[0] != self.schema.total:
            raise ProtocolError(f"Vector of shape {values.shape} does not match schema length {self.schema.total}")
        if not np.all(np.isfinite(values)):
            raise DataError("Parameter vector contains NaN or Inf")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_segments(cls, segments: Mapping[str, Iterable[float]], config: ModelConfig | None = None) -> ParamVector:
        """Build a vector from named segments, keeping the mapping order."""

        arrays = {name: np.asarray(values, dtype=np.float64).ravel() for name, values in segments.items()}
        schema = LayerSchema(tuple((name, array.size) for name, array in arrays.items()), config)
        return cls(np.concatenate(list(arrays.values())), schema)

    def segment(self, name: str) -> np.ndarray:
        return self.values[self.schema.offsets[name]]

    def with_values(self, values: np.ndarray) -> ParamVector:
        """Same schema, new values."""

        return ParamVector(values, self.schema)

    def check_compatible(self, other: ParamVector) -> None:
        if self.schema.layers != other.schema.layers:
            raise ProtocolError("Parameter vectors have different layer schemas")

    def __add__(self, other: ParamVector) -> ParamVector:
        self.check_compatible(other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: ParamVector) -> ParamVector:
        self.check_compatible(other)
        return self.with_values(self.values - other.values)

    def scaled(self, factor: float) -> ParamVector:
        return self.with_values(self.values * factor)

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def zeros_like(self) -> ParamVector:
        return self.with_values(np.zeros_like(self.values))

    def __len__(self) -> int:
        return self.values.shape[0]


def write_param_vector(vector: ParamVector, path: str | Path) -> Path:
    """Write the schema table and little-endian float64 values to `path`."""

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    chunks = [MAGIC, struct.pack("<I", len(vector.schema.layers))]
    for name, length in vector.schema.layers:
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<Q", length))
    chunks.append(vector.values.astype("<f8").tobytes())
    path.write_bytes(b"".join(chunks))
    return path


def read_param_vector(path: str | Path, config: ModelConfig | None = None) -> ParamVector:
    """Read a vector written by `write_param_vector`.

    The file stores only names and lengths; pass the model config to get a
    vector the model functions can evaluate.
    """

    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise DataError(f"{path} is not a parameter vector file")
    (count,) = struct.unpack_from("<I", blob, 4)
    position = 8
    layers = []
    for _ in range(count):
        (name_length,) = struct.unpack_from("<H", blob, position)
        position += 2
        name = blob[position : position + name_length].decode("utf-8")
        position += name_length
        (length,) = struct.unpack_from("<Q", blob, position)
        position += 8
        layers.append((name, int(length)))
    values = np.frombuffer(blob, dtype="<f8", offset=position).astype(np.float64)
    return ParamVector(values, LayerSchema(tuple(layers), config))
