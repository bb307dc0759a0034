"""Input validation helpers for array-facing entry points."""

from __future__ import annotations

import numpy as np

from .core import ParticleSet

__all__ = ["check_points_array", "check_grid_tensor", "points_to_particle_set"]


def check_points_array(X, name: str = "points") -> np.ndarray:
    """Validate an ``(n, 4)`` array of ``(channel, x, y, z)`` rows.

    Returns a float64 copy; channels must be nonnegative integers and all
    coordinates finite. An empty input becomes a ``(0, 4)`` array.
    """
    arr = np.asarray(X, dtype=np.float64)
    if arr.size == 0:
        return arr.reshape(0, 4)
    if arr.ndim == 1 and arr.shape[0] == 4:
        arr = arr.reshape(1, 4)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ValueError(f"{name} must have shape (n, 4), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    channels = arr[:, 0]
    if not np.array_equal(channels, np.round(channels)) or channels.min() < 0:
        raise ValueError(f"{name}[:, 0] must be nonnegative integer channels")
    return arr


def points_to_particle_set(X, lattice=None) -> ParticleSet:
    arr = check_points_array(X)
    return ParticleSet(arr[:, 0].astype(np.int64), arr[:, 1:4], lattice)


def check_grid_tensor(G, name: str = "grids") -> np.ndarray:
    """Validate a batch of grids shaped ``(n, channels, H, W, D)``.

    A single ``(channels, H, W, D)`` grid is promoted to a batch of one.
    """
    arr = np.asarray(G)
    if arr.ndim == 4:
        arr = arr[None]
    if arr.ndim != 5:
        raise ValueError(
            f"{name} must be (n, channels, H, W, D) or (channels, H, W, D), got {arr.shape}"
        )
    if not np.issubdtype(arr.dtype, np.floating):
        raise ValueError(f"{name} must be a floating tensor, got dtype {arr.dtype}")
    return arr
