"""Grid geometry and the container types shared by every other module.

Conventions
-----------
World axes are ``(x, y, z)``. A grid holds one density slab per particle
type ("channel") as a dense ``(channels, H, W, D)`` tensor, stored
image-style: ``H`` counts voxels along y, ``W`` along x, ``D`` along z,
and the innermost (z) axis is contiguous. For box extents ``(A, B, C)``
the voxel sizes are ``dx = A / W``, ``dy = B / H``, ``dz = C / D``;
voxels need not be cubic.

Voxel index tuples are always written in world order ``(i, j, k)`` with
``i`` along x, ``j`` along y, ``k`` along z, so the tensor element for
voxel ``(i, j, k)`` of channel ``c`` is ``data[c, j, i, k]``. Use
:meth:`Grid.value_at` when in doubt.

All types here are immutable after construction and safe to share across
threads; only a grid's data buffer is mutated, and only while it is
being generated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "BoundingBox",
    "LatticeCell",
    "GridSpec",
    "ParticleSet",
    "Grid",
    "bounding_box_of",
    "voxel_to_world",
    "world_to_voxel",
]

Vec3 = tuple[float, float, float]


def _as_vec3(value: Sequence[float], name: str) -> Vec3:
    vec = tuple(float(v) for v in value)
    if len(vec) != 3:
        raise ValueError(f"{name} must have exactly 3 components, got {len(vec)}")
    if not all(np.isfinite(vec)):
        raise ValueError(f"{name} must be finite, got {vec}")
    return vec  # type: ignore[return-value]


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box: ``origin`` corner plus strictly positive ``extents``."""

    origin: Vec3
    extents: Vec3

    def __post_init__(self):
        object.__setattr__(self, "origin", _as_vec3(self.origin, "origin"))
        object.__setattr__(self, "extents", _as_vec3(self.extents, "extents"))
        if min(self.extents) <= 0.0:
            raise ValueError(f"box extents must be strictly positive, got {self.extents}")

    @property
    def max_corner(self) -> Vec3:
        return tuple(o + e for o, e in zip(self.origin, self.extents))  # type: ignore[return-value]

    def translate(self, shift: Sequence[float]) -> "BoundingBox":
        s = _as_vec3(shift, "shift")
        return BoundingBox(tuple(o + d for o, d in zip(self.origin, s)), self.extents)

    def contains(self, point: Sequence[float], margin: float = 0.0) -> bool:
        return all(
            o + margin <= p <= o + e - margin
            for p, o, e in zip(point, self.origin, self.extents)
        )


@dataclass(frozen=True)
class LatticeCell:
    """Orthorhombic lattice cell given by its edge lengths ``(a, b, c)``."""

    edges: Vec3

    def __post_init__(self):
        object.__setattr__(self, "edges", _as_vec3(self.edges, "edges"))
        if min(self.edges) <= 0.0:
            raise ValueError(f"cell edges must be strictly positive, got {self.edges}")


@dataclass(frozen=True)
class GridSpec:
    """Geometry of a grid: voxel counts, channels, box, Gaussian width.

    Parameters
    ----------
    shape:
        ``(H, W, D)`` voxel counts (H along y, W along x, D along z).
    channels:
        Number of particle types.
    box:
        World-space bounding box of the grid.
    sigma:
        Standard deviation of the per-particle Gaussian density.
    periodic:
        Optional lattice cell. When set, the box extents must equal the
        cell edges and densities wrap around the cell boundaries.
    """

    shape: tuple[int, int, int]
    channels: int
    box: BoundingBox
    sigma: float
    periodic: LatticeCell | None = None

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        if len(shape) != 3 or min(shape) < 1:
            raise ValueError(f"shape must be 3 positive voxel counts, got {self.shape}")
        object.__setattr__(self, "shape", shape)
        if int(self.channels) < 1:
            raise ValueError(f"channels must be >= 1, got {self.channels}")
        object.__setattr__(self, "channels", int(self.channels))
        sigma = float(self.sigma)
        if not (np.isfinite(sigma) and sigma > 0.0):
            raise ValueError(f"sigma must be a positive real, got {self.sigma}")
        object.__setattr__(self, "sigma", sigma)
        if self.periodic is not None:
            for edge, extent in zip(self.periodic.edges, self.box.extents):
                if abs(edge - extent) > 1e-9 * max(edge, extent):
                    raise ValueError(
                        "periodic grids require box extents equal to the cell "
                        f"edges, got extents {self.box.extents} vs edges "
                        f"{self.periodic.edges}"
                    )

    @classmethod
    def cubic(
        cls,
        size: int,
        channels: int,
        box: BoundingBox,
        sigma: float,
        periodic: LatticeCell | None = None,
    ) -> "GridSpec":
        return cls((size, size, size), channels, box, sigma, periodic)

    @property
    def voxel_sizes(self) -> Vec3:
        """Voxel edge lengths ``(dx, dy, dz)``."""
        H, W, D = self.shape
        A, B, C = self.box.extents
        return (A / W, B / H, C / D)

    @property
    def voxel_count(self) -> int:
        H, W, D = self.shape
        return H * W * D

    def axis_params(self) -> tuple[tuple[int, float, float], ...]:
        """Per world axis (x, y, z): ``(voxel count, origin, voxel size)``."""
        H, W, D = self.shape
        A, B, C = self.box.extents
        ox, oy, oz = self.box.origin
        return ((W, ox, A / W), (H, oy, B / H), (D, oz, C / D))


@dataclass(frozen=True)
class ParticleSet:
    """Typed point cloud: channel indices plus world positions.

    ``channels`` is an ``(n,)`` integer array and ``positions`` an
    ``(n, 3)`` float array. Under a lattice, positions are canonicalized
    into ``[0, edge)`` per axis at construction.
    """

    channels: np.ndarray
    positions: np.ndarray
    lattice: LatticeCell | None = None

    def __post_init__(self):
        channels = np.atleast_1d(np.asarray(self.channels))
        if channels.size and not np.issubdtype(channels.dtype, np.integer):
            as_int = channels.astype(np.int64)
            if not np.array_equal(as_int, channels):
                raise ValueError("channel indices must be integers")
            channels = as_int
        channels = channels.astype(np.int64, copy=False)
        if channels.size and channels.min() < 0:
            raise ValueError("channel indices must be nonnegative")
        positions = np.asarray(self.positions, dtype=np.float64)
        positions = positions.reshape(-1, 3) if positions.size else positions.reshape(0, 3)
        if positions.shape[0] != channels.shape[0]:
            raise ValueError(
                f"channel/position count mismatch: {channels.shape[0]} vs {positions.shape[0]}"
            )
        if positions.size and not np.all(np.isfinite(positions)):
            raise ValueError("particle positions must be finite")
        if self.lattice is not None and positions.size:
            positions = np.mod(positions, np.asarray(self.lattice.edges))
        channels.setflags(write=False)
        positions.setflags(write=False)
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "positions", positions)

    @classmethod
    def from_rows(
        cls, rows: Iterable[Sequence[float]], lattice: LatticeCell | None = None
    ) -> "ParticleSet":
        """Build from ``(channel, x, y, z)`` rows."""
        rows = list(rows)
        if not rows:
            return cls(np.zeros(0, dtype=np.int64), np.zeros((0, 3)), lattice)
        arr = np.asarray(rows, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 4:
            raise ValueError(f"expected (channel, x, y, z) rows, got shape {arr.shape}")
        return cls(arr[:, 0], arr[:, 1:4], lattice)

    def to_rows(self) -> np.ndarray:
        """``(n, 4)`` float array of ``(channel, x, y, z)`` rows."""
        out = np.empty((len(self), 4), dtype=np.float64)
        out[:, 0] = self.channels
        out[:, 1:4] = self.positions
        return out

    def __len__(self) -> int:
        return int(self.channels.shape[0])

    def __iter__(self) -> Iterator[tuple[int, Vec3]]:
        for c, p in zip(self.channels, self.positions):
            yield int(c), (float(p[0]), float(p[1]), float(p[2]))

    @property
    def n_channels(self) -> int:
        """Smallest channel count that covers every index."""
        return int(self.channels.max()) + 1 if len(self) else 0

    def channel_counts(self, channels: int) -> np.ndarray:
        return np.bincount(self.channels, minlength=channels)


@dataclass
class Grid:
    """Dense multi-channel density grid over a :class:`GridSpec`.

    ``data`` has shape ``(channels, H, W, D)``, C-contiguous, 32-bit by
    default (a 64-bit mode exists for gradient verification in tests).
    """

    spec: GridSpec
    data: np.ndarray

    def __post_init__(self):
        expected = (self.spec.channels, *self.spec.shape)
        if self.data.shape != expected:
            raise ValueError(f"grid data shape {self.data.shape} != spec shape {expected}")
        if not self.data.flags.c_contiguous:
            raise ValueError("grid data must be C-contiguous")

    @classmethod
    def zeros(cls, spec: GridSpec, dtype=np.float32) -> "Grid":
        dtype = np.dtype(dtype)
        if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
            raise ValueError(f"grid dtype must be float32 or float64, got {dtype}")
        return cls(spec, np.zeros((spec.channels, *spec.shape), dtype=dtype))

    def value_at(self, channel: int, index: Sequence[int]) -> float:
        """Voxel value at world-order index ``(i, j, k)``."""
        i, j, k = index
        return float(self.data[channel, j, i, k])

    def channel_sums(self) -> np.ndarray:
        return self.data.sum(axis=(1, 2, 3), dtype=np.float64)

    def total_sum(self) -> float:
        return float(self.data.sum(dtype=np.float64))

    def nonzero_voxels(self) -> int:
        return int(np.count_nonzero(self.data))


def bounding_box_of(
    points: ParticleSet,
    sigma: float,
    padding_sigmas: float = 4.0,
    min_extent: float = 0.0,
) -> BoundingBox:
    """Axis-aligned box covering ``points`` with a ``padding_sigmas * sigma``
    margin on every face.

    Degenerate axes (all points coplanar) end up with extent
    ``2 * padding_sigmas * sigma``; if that is still zero the axis is
    floored at ``min_extent``, and a zero extent is rejected.
    """
    if len(points) == 0:
        raise ValueError("cannot compute a bounding box of an empty particle set")
    if padding_sigmas < 0.0:
        raise ValueError(f"padding_sigmas must be >= 0, got {padding_sigmas}")
    pad = padding_sigmas * float(sigma)
    lo = points.positions.min(axis=0) - pad
    hi = points.positions.max(axis=0) + pad
    extents = np.maximum(hi - lo, min_extent)
    if extents.min() <= 0.0:
        raise ValueError(
            "degenerate bounding box (zero extent on some axis); "
            "use padding_sigmas > 0 or a positive min_extent"
        )
    # Recenter the floor expansion so the points stay centered on the axis.
    centers = 0.5 * (lo + hi)
    origin = centers - 0.5 * extents
    return BoundingBox(tuple(origin), tuple(extents))


def voxel_to_world(spec: GridSpec, index: Sequence[int]) -> Vec3:
    """Left-corner world coordinates ``(x_i, y_j, z_k)`` of voxel ``(i, j, k)``."""
    i, j, k = (int(v) for v in index)
    (nx, ox, dx), (ny, oy, dy), (nz, oz, dz) = spec.axis_params()
    if not (0 <= i < nx and 0 <= j < ny and 0 <= k < nz):
        raise IndexError(f"voxel index {(i, j, k)} out of range for counts {(nx, ny, nz)}")
    return (ox + i * dx, oy + j * dy, oz + k * dz)


def world_to_voxel(spec: GridSpec, point: Sequence[float]) -> tuple[int, int, int]:
    """Index ``(i, j, k)`` of the voxel whose half-open cell contains ``point``.

    Valid for points strictly inside the box.
    """
    out = []
    for p, (n, origin, delta) in zip(point, spec.axis_params()):
        idx = int(np.floor((float(p) - origin) / delta))
        if not 0 <= idx < n:
            raise ValueError(f"point {tuple(point)} lies outside the grid box")
        out.append(idx)
    return (out[0], out[1], out[2])
