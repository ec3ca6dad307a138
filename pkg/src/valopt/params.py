"""Flat parameter vectors with a named tensor layout and text checkpoints."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

Layout = tuple[tuple[str, tuple[int, ...]], ...]


def layout_size(layout: Layout) -> int:
    return sum(math.prod(shape) for _, shape in layout)


@dataclass(frozen=True)
class ParamVector:
    """All parameters of one model flattened into a single float64 vector.

    The layout (ordered tensor names and shapes) is fixed when the model is
    built and shared by every parameter/gradient vector of that model, so
    vectors can be combined with plain array arithmetic.
    """

    values: np.ndarray
    layout: Layout
    _offsets: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        values = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if values.ndim != 1:
            raise ValueError("shape: parameter values must be one-dimensional")
        expected = layout_size(self.layout)
        if values.size != expected:
            raise ValueError(f"shape: got {values.size} values, layout holds {expected}")
        object.__setattr__(self, "values", values)
        offsets = {}
        pos = 0
        for name, shape in self.layout:
            n = math.prod(shape)
            if name in offsets:
                raise ValueError(f"layout: duplicate tensor name {name!r}")
            offsets[name] = (pos, pos + n, shape)
            pos += n
        object.__setattr__(self, "_offsets", offsets)

    @property
    def size(self) -> int:
        return self.values.size

    def slot(self, name: str) -> slice:
        """Index range of one named tensor inside the flat vector."""
        lo, hi, _ = self._offsets[name]
        return slice(lo, hi)

    def tensor(self, name: str) -> np.ndarray:
        """View of one named tensor, reshaped; shares memory with values."""
        lo, hi, shape = self._offsets[name]
        return self.values[lo:hi].reshape(shape)

    def with_values(self, values: np.ndarray) -> "ParamVector":
        return ParamVector(values, self.layout)

    def copy(self) -> "ParamVector":
        return ParamVector(self.values.copy(), self.layout)

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def dot(self, other: "ParamVector") -> float:
        if other.layout != self.layout:
            raise ValueError("layout: mismatched parameter layouts")
        return float(np.dot(self.values, other.values))


def zeros_like(layout: Layout) -> ParamVector:
    return ParamVector(np.zeros(layout_size(layout)), layout)


def _format_layout(layout: Layout) -> str:
    return ",".join(f"{name}:{'x'.join(str(d) for d in shape)}" for name, shape in layout)


def _parse_layout(header: str) -> Layout:
    entries = []
    for item in header.strip().split(","):
        name, _, dims = item.partition(":")
        if not dims:
            raise ValueError(f"layout: malformed checkpoint header entry {item!r}")
        entries.append((name, tuple(int(d) for d in dims.split("x"))))
    return tuple(entries)


def save_checkpoint(params: ParamVector, path: str | Path) -> None:
    """Write a checkpoint: layout header, then one decimal value per line.

    Values are written with ``repr`` so a load reproduces them bit-exactly.
    """
    with open(path, "w") as fh:
        fh.write(_format_layout(params.layout) + "\n")
        for v in params.values:
            fh.write(repr(float(v)) + "\n")


def load_checkpoint(path: str | Path) -> ParamVector:
    with open(path) as fh:
        layout = _parse_layout(fh.readline())
        values = np.array([float(line) for line in fh if line.strip()], dtype=np.float64)
    return ParamVector(values, layout)
