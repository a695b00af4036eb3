"""Fixed-step traces of named channels, plus the whitespace text format.

Trace files: one header line with channel names, one whitespace-separated
row per timestep, and a ``# dt=<seconds>`` comment line anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Trace", "BatchTrace", "DiffTrace", "load_trace", "dump_trace"]


@dataclass(frozen=True)
class Trace:
    """Channels-by-timesteps matrix with a fixed step size in seconds."""

    schema: tuple
    values: np.ndarray  # (channels, timesteps) float64
    dt: float = 1.0
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "schema", tuple(self.schema))
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise ValueError("trace values must be a 2-D channels x timesteps array")
        if vals.shape[0] != len(self.schema):
            raise ValueError("row count must match the schema")
        if vals.shape[1] < 1:
            raise ValueError("a trace needs at least one timestep")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "_index", {c: i for i, c in enumerate(self.schema)})

    @property
    def timesteps(self) -> int:
        return self.values.shape[1]

    def channel_index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown channel {name!r}; trace has {list(self.schema)}") from None

    def get(self, channel_idx: int, t: int):
        return self.values[channel_idx, t]

    def channel(self, name: str) -> np.ndarray:
        return self.values[self.channel_index(name)]


@dataclass(frozen=True)
class BatchTrace:
    """A stack of equally-shaped traces: (channels, batch, timesteps)."""

    schema: tuple
    values: np.ndarray
    dt: float = 1.0
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "schema", tuple(self.schema))
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 3:
            raise ValueError("batch trace values must be (channels, batch, timesteps)")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "_index", {c: i for i, c in enumerate(self.schema)})

    @property
    def timesteps(self) -> int:
        return self.values.shape[2]

    @property
    def batch(self) -> int:
        return self.values.shape[1]

    def channel_index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown channel {name!r}; trace has {list(self.schema)}") from None

    def get(self, channel_idx: int, t: int):
        return self.values[channel_idx, :, t]

    def single(self, b: int) -> Trace:
        return Trace(self.schema, self.values[:, b, :], self.dt)


class DiffTrace:
    """Trace whose cells live on a differentiation tape.

    ``grid[c][t]`` is the DiffValue of channel ``c`` at step ``t`` (scalar or
    one batch vector per cell).
    """

    def __init__(self, schema, grid, dt=1.0):
        self.schema = tuple(schema)
        self.grid = grid
        self.dt = dt
        self._index = {c: i for i, c in enumerate(self.schema)}
        if len(grid) != len(self.schema):
            raise ValueError("grid row count must match the schema")

    @property
    def timesteps(self) -> int:
        return len(self.grid[0])

    def channel_index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown channel {name!r}; trace has {list(self.schema)}") from None

    def get(self, channel_idx: int, t: int):
        return self.grid[channel_idx][t]

    @classmethod
    def from_trace(cls, tape, trace: Trace) -> "DiffTrace":
        grid = [[tape.const(float(trace.values[c, t])) for t in range(trace.timesteps)]
                for c in range(len(trace.schema))]
        return cls(trace.schema, grid, trace.dt)


def load_trace(source) -> Trace:
    """Read a trace from a file path or an open text stream."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    dt = 1.0
    header = None
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("dt="):
                try:
                    dt = float(body[3:])
                except ValueError:
                    raise ValueError(f"line {lineno}: bad dt comment {line!r}") from None
            continue
        fields = line.split()
        if header is None:
            header = fields
            continue
        try:
            rows.append([float(x) for x in fields])
        except ValueError:
            raise ValueError(f"line {lineno}: non-numeric value in {line!r}") from None
        if len(fields) != len(header):
            raise ValueError(f"line {lineno}: expected {len(header)} values, got {len(fields)}")
    if header is None:
        raise ValueError("trace file has no header line")
    if not rows:
        raise ValueError("trace file has no data rows")
    values = np.asarray(rows, dtype=np.float64).T
    return Trace(tuple(header), values, dt)


def dump_trace(trace: Trace, path) -> None:
    lines = ["# dt=" + repr(trace.dt), " ".join(trace.schema)]
    for t in range(trace.timesteps):
        lines.append(" ".join(repr(float(v)) for v in trace.values[:, t]))
    text = "\n".join(lines) + "\n"
    if hasattr(path, "write"):
        path.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
