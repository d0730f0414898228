"""Flat parameter vectors, memory-unit partitions and per-unit drift."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import ConfigurationError, ShapeError

MAGIC = "LONGCL-PV"
FORMAT_VERSION = "v1"


@dataclass(frozen=True)
class Segment:
    label: str
    start: int
    stop: int

    @property
    def size(self):
        return self.stop - self.start


@dataclass(frozen=True, eq=False)
class ParamVector:
    """Immutable float64 parameter state split into labelled segments."""

    values: np.ndarray
    segments: tuple

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True).ravel()
        if not np.all(np.isfinite(values)):
            raise ValueError("ParamVector values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        segs = tuple(self.segments) or (Segment("params", 0, values.size),)
        pos = 0
        for seg in segs:
            if seg.start != pos or seg.stop <= seg.start:
                raise ShapeError(f"segment {seg.label!r} is not contiguous at offset {pos}")
            pos = seg.stop
        if pos != values.size:
            raise ShapeError(f"segments cover {pos} values, vector has {values.size}")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def from_arrays(cls, named):
        """Build from an ordered mapping ``label -> array`` (flattened C-order)."""
        chunks, segs, pos = [], [], 0
        for label, arr in named.items():
            flat = np.asarray(arr, dtype=np.float64).ravel()
            segs.append(Segment(label, pos, pos + flat.size))
            chunks.append(flat)
            pos += flat.size
        return cls(np.concatenate(chunks), tuple(segs))

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, ParamVector):
            return NotImplemented
        return self.segments == other.segments and np.array_equal(self.values, other.values)

    __hash__ = None

    def segment(self, label):
        for seg in self.segments:
            if seg.label == label:
                return self.values[seg.start:seg.stop]
        raise KeyError(label)

    def with_values(self, values):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != self.values.shape:
            raise ShapeError(f"expected {self.values.size} values, got {values.size}")
        return ParamVector(values, self.segments)

    def check_combinable(self, other):
        if len(self) != len(other):
            raise ShapeError(f"length mismatch: {len(self)} vs {len(other)}")
        if self.segments != other.segments:
            raise ShapeError("segment tables differ")


@dataclass(frozen=True, eq=False)
class UnitPartition:
    """Disjoint, sorted, contiguous index ranges covering ``[0, size)``."""

    starts: np.ndarray
    stops: np.ndarray
    granularity: str

    def __post_init__(self):
        starts = np.asarray(self.starts, dtype=np.int64).copy()
        stops = np.asarray(self.stops, dtype=np.int64).copy()
        if starts.size == 0 or starts.shape != stops.shape:
            raise ShapeError("partition needs at least one unit")
        if starts[0] != 0 or np.any(stops <= starts) or np.any(starts[1:] != stops[:-1]):
            raise ShapeError("units must be disjoint, sorted and contiguous from 0")
        starts.setflags(write=False)
        stops.setflags(write=False)
        object.__setattr__(self, "starts", starts)
        object.__setattr__(self, "stops", stops)

    @property
    def n_units(self):
        return int(self.starts.size)

    @property
    def size(self):
        return int(self.stops[-1])

    def units(self):
        return [(int(a), int(b)) for a, b in zip(self.starts, self.stops)]


def parse_granularity(spec):
    """Accepts ``"scalar"``, ``"segment"``, ``"row:<w>"`` or a ``(kind, width)`` pair."""
    if isinstance(spec, (tuple, list)):
        kind, width = spec
    elif isinstance(spec, str) and spec.startswith("row"):
        kind, _, w = spec.partition(":")
        try:
            width = int(w)
        except ValueError:
            raise ConfigurationError(f"row granularity needs an integer width, got {spec!r}") from None
    else:
        kind, width = spec, None
    if kind not in ("scalar", "row", "segment"):
        raise ConfigurationError(f"unknown granularity {kind!r}")
    if kind == "row" and (width is None or width < 1):
        raise ConfigurationError("row granularity needs a positive width")
    return kind, width


def make_partition(param_len, granularity="scalar", segments=None):
    """Split ``param_len`` scalars into memory units.

    ``segments`` (defaults to a single segment) bounds ``row`` and
    ``segment`` units; a row width must divide every segment length.
    """
    if param_len < 1:
        raise ConfigurationError("param_len must be >= 1")
    kind, width = parse_granularity(granularity)
    if segments is None:
        bounds = [(0, param_len)]
    else:
        bounds = [(s.start, s.stop) for s in segments]
        if bounds[-1][1] != param_len:
            raise ShapeError("segments do not cover param_len")
    if kind == "scalar":
        starts = np.arange(param_len)
        return UnitPartition(starts, starts + 1, "scalar")
    if kind == "segment":
        return UnitPartition([a for a, _ in bounds], [b for _, b in bounds], "segment")
    starts = []
    for a, b in bounds:
        if (b - a) % width:
            raise ConfigurationError(f"row width {width} does not divide segment length {b - a}")
        starts.extend(range(a, b, width))
    starts = np.asarray(starts, dtype=np.int64)
    return UnitPartition(starts, starts + width, f"row:{width}")


def compute_drift(prev, curr, part):
    """Per-unit Euclidean distance between two snapshots."""
    prev.check_combinable(curr)
    if part.size != len(prev):
        raise ShapeError(f"partition covers {part.size} values, vectors have {len(prev)}")
    return kernels.unit_drift(prev.values, curr.values, part.starts, part.stops)


def save_snapshot(pv, path):
    path = Path(path)
    table = " ".join(f"{s.label}:{s.start}:{s.stop}" for s in pv.segments)
    with open(path, "wb") as fh:
        fh.write(f"{MAGIC} {FORMAT_VERSION} {len(pv)}\n".encode())
        fh.write(f"{table}\n".encode())
        fh.write(pv.values.astype("<f8").tobytes())
    return path


def load_snapshot(path):
    with open(path, "rb") as fh:
        header = fh.readline().decode().split()
        if len(header) != 3 or header[0] != MAGIC or header[1] != FORMAT_VERSION:
            raise ValueError(f"{path}: not a {MAGIC} {FORMAT_VERSION} snapshot")
        n = int(header[2])
        segs = []
        for item in fh.readline().decode().split():
            label, start, stop = item.rsplit(":", 2)
            segs.append(Segment(label, int(start), int(stop)))
        payload = fh.read()
    if len(payload) != 8 * n:
        raise ValueError(f"{path}: expected {8 * n} payload bytes, found {len(payload)}")
    return ParamVector(np.frombuffer(payload, dtype="<f8"), tuple(segs))
