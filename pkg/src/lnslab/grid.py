"""Periodic-box discretization, field containers and snapshot I/O."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SNAPSHOT_MAGIC = b"LNSF"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sIId")


class GridError(ValueError):
    pass


class NonFiniteSampleError(ValueError):
    """Raised when a sampled function is NaN/Inf at a grid node."""

    def __init__(self, index, point):
        self.index = tuple(int(i) for i in index)
        self.point = tuple(float(c) for c in point)
        super().__init__(f"non-finite sample at node {self.index}, x = {self.point}")


class SnapshotError(ValueError):
    pass


class BadMagicError(SnapshotError):
    pass


class VersionMismatchError(SnapshotError):
    pass


class TruncatedSnapshotError(SnapshotError):
    pass


@dataclass(frozen=True)
class Grid:
    n: int
    box_len: float

    @property
    def spacing(self) -> float:
        return self.box_len / self.n

    @property
    def cell_measure(self) -> float:
        return self.spacing**3

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    def axis(self, offset: float = 0.0) -> np.ndarray:
        """Node coordinates -L/2 + j h + offset along one axis."""
        return -0.5 * self.box_len + np.arange(self.n) * self.spacing + offset

    def coords(self, offset=(0.0, 0.0, 0.0)):
        """Broadcastable coordinate arrays (x, y, z)."""
        ox, oy, oz = offset
        return (
            self.axis(ox)[:, None, None],
            self.axis(oy)[None, :, None],
            self.axis(oz)[None, None, :],
        )

    def rescaled(self, factor: float) -> "Grid":
        """Same node count on a box shrunk by ``factor`` (x -> x / factor)."""
        return Grid(self.n, self.box_len / factor)


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def build_grid(n: int, box_len: float) -> Grid:
    if int(n) != n or not _is_pow2(int(n)):
        raise GridError(f"n must be a power of two, got {n}")
    if n < 8:
        raise GridError(f"n must be at least 8, got {n}")
    if not box_len > 0:
        raise GridError(f"box_len must be positive, got {box_len}")
    return Grid(int(n), float(box_len))


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("scalar field has non-finite entries")
        object.__setattr__(self, "values", _freeze(v))


@dataclass(frozen=True, eq=False)
class VectorField3:
    """Three real components on a grid, array shape (3, n, n, n), z fastest."""

    grid: Grid
    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float64)
        if d.shape != (3,) + self.grid.shape:
            raise ValueError(f"expected shape {(3,) + self.grid.shape}, got {d.shape}")
        if not np.all(np.isfinite(d)):
            raise ValueError("vector field has non-finite entries")
        object.__setattr__(self, "data", _freeze(d))

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField3":
        return cls(grid, np.zeros((3,) + grid.shape))

    def magnitude(self) -> np.ndarray:
        d = self.data
        return np.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])

    def __add__(self, other: "VectorField3") -> "VectorField3":
        _same_grid(self.grid, other.grid)
        return VectorField3(self.grid, self.data + other.data)

    def __sub__(self, other: "VectorField3") -> "VectorField3":
        _same_grid(self.grid, other.grid)
        return VectorField3(self.grid, self.data - other.data)

    def scaled(self, c: float) -> "VectorField3":
        return VectorField3(self.grid, c * self.data)


def _same_grid(a: Grid, b: Grid):
    if a != b:
        raise GridError(f"grid mismatch: {a} vs {b}")


def sample_field(grid: Grid, f, center_offset=(0.0, 0.0, 0.0)) -> VectorField3:
    """Evaluate ``f(x, y, z) -> (fx, fy, fz)`` at the grid nodes.

    ``f`` receives broadcastable coordinate arrays and must be vectorised.
    """
    x, y, z = grid.coords(center_offset)
    comps = f(x, y, z)
    data = np.empty((3,) + grid.shape)
    for c in range(3):
        data[c] = np.broadcast_to(np.asarray(comps[c], dtype=np.float64), grid.shape)
    bad = ~np.isfinite(data)
    if bad.any():
        idx = np.argwhere(bad.any(axis=0))[0]
        pt = (x[idx[0], 0, 0], y[0, idx[1], 0], z[0, 0, idx[2]])
        raise NonFiniteSampleError(idx, pt)
    return VectorField3(grid, data)


def write_snapshot(field: VectorField3, path) -> None:
    g = field.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, g.n, g.box_len))
        fh.write(field.data.astype("<f8", copy=False).tobytes(order="C"))


def read_snapshot(path) -> VectorField3:
    raw = Path(path).read_bytes()
    if len(raw) < 4 or raw[:4] != SNAPSHOT_MAGIC:
        raise BadMagicError(f"{path}: bad magic {raw[:4]!r}")
    if len(raw) < _HEADER.size:
        raise TruncatedSnapshotError(f"{path}: header truncated")
    _, version, n, box_len = _HEADER.unpack_from(raw)
    if version != SNAPSHOT_VERSION:
        raise VersionMismatchError(f"{path}: version {version}, expected {SNAPSHOT_VERSION}")
    need = 3 * n**3 * 8
    payload = raw[_HEADER.size:]
    if len(payload) < need:
        raise TruncatedSnapshotError(f"{path}: payload has {len(payload)} bytes, expected {need}")
    data = np.frombuffer(payload[:need], dtype="<f8").reshape(3, n, n, n)
    return VectorField3(Grid(n, box_len), data.astype(np.float64))
