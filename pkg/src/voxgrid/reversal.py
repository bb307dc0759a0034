"""Recover particle coordinates from a density grid.

Two stages, per channel:

1. Peak detection by 0-dimensional superlevel-set persistence. Voxels are
   processed in decreasing value order while a union-find tracks
   26-connected components; a component is born at its highest voxel and
   dies when it merges into an older (higher-born) one. Peaks whose
   persistence (birth minus death) reaches a fraction of the channel
   maximum become seeds, placed at their voxel centers.

2. Coordinate refinement by gradient descent on the mean squared
   difference between the reference grid and the grid regenerated from
   the candidate coordinates. Gradients are analytic: the per-voxel mass
   is a product of three 1D axis masses, so each partial derivative is
   the axis-gradient table times the other two value tables, accumulated
   only over the particle's support box.

The descent uses a fixed step with halving backoff on loss increases;
backoff only ever shrinks the step, and the best visited state is always
the one returned.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .core import Grid, ParticleSet
from .gridgen import generate_grid
from .kernels import axis_gradient, axis_table, AxisTable

__all__ = [
    "Peak",
    "PeakSet",
    "ReversalConfig",
    "ReversalState",
    "CountMismatchWarning",
    "detect_peaks",
    "loss",
    "loss_gradient",
    "refine_coords",
    "reverse_grid",
]


class CountMismatchWarning(UserWarning):
    """A channel's integrated mass disagrees with its detected peak count."""


@dataclass(frozen=True)
class Peak:
    channel: int
    index: tuple[int, int, int]  # world-order (i, j, k)
    value: float
    persistence: float
    seed: tuple[float, float, float]  # voxel-center world coordinates


@dataclass(frozen=True)
class PeakSet:
    peaks: tuple[Peak, ...]

    def __len__(self) -> int:
        return len(self.peaks)

    def __iter__(self) -> Iterator[Peak]:
        return iter(self.peaks)

    def for_channel(self, channel: int) -> list[Peak]:
        return [p for p in self.peaks if p.channel == channel]


@dataclass(frozen=True)
class ReversalConfig:
    """Knobs for grid reversal.

    ``learning_rate`` is dimensionless: the actual descent step is scaled
    by (mean voxel width)^2 / (grid peak value) and by the voxel count
    (the loss being a per-voxel mean), so the default behaves across grid
    sizes and resolutions. ``tolerance`` is an absolute mean-squared-error
    stop. ``persistence_threshold`` is the fraction of the channel
    maximum a peak must persist to seed a particle.
    """

    learning_rate: float = 0.1
    tolerance: float = 1e-12
    max_iters: int = 5000
    persistence_threshold: float = 0.05

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if not self.max_iters >= 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not 0.0 < self.persistence_threshold < 1.0:
            raise ValueError(
                f"persistence_threshold must lie in (0, 1), got {self.persistence_threshold}"
            )


@dataclass
class ReversalState:
    """Candidate coordinates plus the loss they achieve."""

    channels: np.ndarray  # (m,)
    positions: np.ndarray  # (m, 3)
    loss: float = np.inf
    iterations: int = 0
    converged: bool = False
    diverged: bool = False

    def __len__(self) -> int:
        return int(self.channels.shape[0])

    def to_particle_set(self) -> ParticleSet:
        return ParticleSet(self.channels.copy(), self.positions.copy())


# 26-connectivity offsets, fixed order.
_NEIGHBOR_OFFSETS = tuple(
    (dj, di, dk)
    for dj in (-1, 0, 1)
    for di in (-1, 0, 1)
    for dk in (-1, 0, 1)
    if (dj, di, dk) != (0, 0, 0)
)


def _channel_persistence(values: np.ndarray) -> list[tuple[int, float, float]]:
    """0-dim superlevel persistence classes of one (H, W, D) channel.

    Returns ``(flat_index_of_maximum, birth, death)`` per class, death
    being 0.0 for classes that never merge. Voxels are processed in
    decreasing value order with ties broken toward the lower flat index;
    on a merge the surviving class is the older one: higher birth value,
    then lower flat index. Zero-valued voxels are skipped, which leaves
    every class separated by empty space alive with death 0 - exactly
    what processing the zeros would have produced.
    """
    shape = values.shape
    flat = values.ravel()
    candidates = np.flatnonzero(flat > 0)
    if candidates.size == 0:
        return []
    order = candidates[np.argsort(-flat[candidates], kind="stable")]

    parent = np.full(flat.shape[0], -1, dtype=np.int64)  # -1: unprocessed
    rep = np.empty(flat.shape[0], dtype=np.int64)  # root -> birth voxel

    def find(x: int) -> int:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def older(a: int, b: int) -> bool:
        # Is root a's class older than root b's?
        ra, rb = rep[a], rep[b]
        if flat[ra] != flat[rb]:
            return flat[ra] > flat[rb]
        return ra < rb

    H, W, D = shape
    classes: list[tuple[int, float, float]] = []
    for v in order:
        vj, rem = divmod(int(v), W * D)
        vi, vk = divmod(rem, D)
        parent[v] = v
        rep[v] = v
        for dj, di, dk in _NEIGHBOR_OFFSETS:
            nj, ni, nk = vj + dj, vi + di, vk + dk
            if not (0 <= nj < H and 0 <= ni < W and 0 <= nk < D):
                continue
            nb = (nj * W + ni) * D + nk
            if parent[nb] < 0:
                continue
            ra, rb = find(v), find(nb)
            if ra == rb:
                continue
            winner, loser = (ra, rb) if older(ra, rb) else (rb, ra)
            classes.append((int(rep[loser]), float(flat[rep[loser]]), float(flat[v])))
            parent[loser] = winner
    # Survivors never die; their death level is the all-zero floor.
    roots = {find(int(v)) for v in order}
    for root in roots:
        classes.append((int(rep[root]), float(flat[rep[root]]), 0.0))
    return classes


def detect_peaks(grid: Grid, threshold: float = 0.05) -> PeakSet:
    """Persistent local maxima of every channel.

    Keeps one peak per persistence class whose persistence is at least
    ``threshold`` times the channel maximum; the global maximum of a
    nonempty channel therefore always survives. Seeds are voxel centers.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    if grid.data.size and float(grid.data.min()) < 0.0:
        raise ValueError("peak detection expects a nonnegative grid")
    (_, ox, dx), (_, oy, dy), (_, oz, dz) = grid.spec.axis_params()
    H, W, D = grid.spec.shape
    peaks: list[Peak] = []
    for channel in range(grid.spec.channels):
        values = grid.data[channel]
        channel_max = float(values.max()) if values.size else 0.0
        if channel_max <= 0.0:
            continue
        cutoff = threshold * channel_max
        for flat_idx, birth, death in _channel_persistence(values):
            persistence = birth - death
            if persistence < cutoff:
                continue
            j, rem = divmod(flat_idx, W * D)
            i, k = divmod(rem, D)
            seed = (ox + (i + 0.5) * dx, oy + (j + 0.5) * dy, oz + (k + 0.5) * dz)
            peaks.append(Peak(channel, (i, j, k), birth, persistence, seed))
    peaks.sort(key=lambda p: (p.channel, -p.persistence, p.index))
    return PeakSet(tuple(peaks))


def _check_reference(reference: Grid):
    if reference.spec.periodic is not None:
        raise NotImplementedError(
            "reversal of periodic grids is not supported; the coordinate "
            "gradients assume open boundaries"
        )


def _coerce_theta(theta) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(theta, ReversalState):
        return theta.channels, theta.positions
    if isinstance(theta, PeakSet):
        channels = np.array([p.channel for p in theta], dtype=np.int64)
        positions = np.array([p.seed for p in theta], dtype=np.float64).reshape(-1, 3)
        return channels, positions
    if isinstance(theta, ParticleSet):
        return theta.channels, theta.positions
    raise TypeError(f"expected ReversalState, PeakSet or ParticleSet, got {type(theta)!r}")


def _regenerate(reference: Grid, channels: np.ndarray, positions: np.ndarray) -> Grid:
    candidate = ParticleSet(channels, positions)
    grid, _ = generate_grid(candidate, reference.spec, mode="sparse", dtype=reference.data.dtype)
    return grid


def _mse(reference: Grid, regenerated: Grid) -> float:
    diff = regenerated.data.astype(np.float64) - reference.data.astype(np.float64)
    return float(np.mean(diff * diff))


def loss(reference: Grid, theta) -> float:
    """Mean squared voxel difference between ``reference`` and the grid
    regenerated from ``theta``. Zero exactly when they coincide."""
    _check_reference(reference)
    channels, positions = _coerce_theta(theta)
    if len(channels) and channels.max() >= reference.spec.channels:
        raise ValueError("candidate channel out of range for the reference grid")
    return _mse(reference, _regenerate(reference, channels, positions))


def _gradient_from_diff(
    reference: Grid, diff: np.ndarray, channels: np.ndarray, positions: np.ndarray
) -> np.ndarray:
    """Analytic gradient of the mean loss given ``diff = regen - ref``."""
    spec = reference.spec
    dtype = reference.data.dtype
    params = spec.axis_params()
    scale = 2.0 / reference.data.size
    grad = np.zeros((len(channels), 3), dtype=np.float64)
    for a, (channel, pos) in enumerate(zip(channels, positions)):
        tables: list[AxisTable] = []
        grads: list[np.ndarray] = []
        for mu, (n, origin, delta) in zip(pos, params):
            tables.append(axis_table(mu, origin, delta, n, spec.sigma, dtype))
            grads.append(np.asarray(axis_gradient(mu, origin, delta, n, spec.sigma, dtype)))
        tx, ty, tz = tables
        gx, gy, gz = grads
        slab = diff[channel]
        for axis in range(3):
            # Value supports on the other two axes, gradient support on this one.
            gtab = grads[axis]
            gnz = np.flatnonzero(gtab)
            if gnz.size == 0:
                continue
            glo, ghi = int(gnz[0]), int(gnz[-1]) + 1
            spans = [list(t.support) for t in (tx, ty, tz)]
            spans[axis] = [glo, ghi]
            (xlo, xhi), (ylo, yhi), (zlo, zhi) = spans
            if xhi <= xlo or yhi <= ylo or zhi <= zlo:
                continue
            block = slab[ylo:yhi, xlo:xhi, zlo:zhi].astype(np.float64)
            fx = (gx[xlo:xhi] if axis == 0 else tx.values[xlo:xhi]).astype(np.float64)
            fy = (gy[ylo:yhi] if axis == 1 else ty.values[ylo:yhi]).astype(np.float64)
            fz = (gz[zlo:zhi] if axis == 2 else tz.values[zlo:zhi]).astype(np.float64)
            grad[a, axis] = scale * np.einsum("jik,i,j,k->", block, fx, fy, fz)
    return grad


def loss_gradient(reference: Grid, theta) -> np.ndarray:
    """Gradient of :func:`loss` with respect to every candidate coordinate,
    shape ``(m, 3)``."""
    _check_reference(reference)
    channels, positions = _coerce_theta(theta)
    if len(channels) and channels.max() >= reference.spec.channels:
        raise ValueError("candidate channel out of range for the reference grid")
    regen = _regenerate(reference, channels, positions)
    diff = regen.data.astype(np.float64) - reference.data.astype(np.float64)
    return _gradient_from_diff(reference, diff, channels, positions)


_BACKOFF_HALVINGS = 10
_DIVERGENCE_PATIENCE = 10


def refine_coords(
    reference: Grid, seeds, config: ReversalConfig | None = None
) -> ReversalState:
    """Descend the grid-space loss from ``seeds`` to refined coordinates.

    Runs fixed-step gradient descent (step scaled as described on
    :class:`ReversalConfig`) with halving backoff on loss increases.
    Stops when the loss drops below the tolerance, on step exhaustion, or
    after 10 consecutive backoff-exhausted (forced) steps, which is
    reported as divergence. The returned state is always the best one
    visited, so its loss never exceeds the seeds' loss.
    """
    config = config or ReversalConfig()
    _check_reference(reference)
    channels, positions = _coerce_theta(seeds)
    if len(channels) == 0:
        raise ValueError("refine_coords needs at least one seed")
    if channels.max() >= reference.spec.channels:
        raise ValueError("seed channel out of range for the reference grid")
    channels = np.asarray(channels, dtype=np.int64).copy()
    positions = np.asarray(positions, dtype=np.float64).copy()

    peak_value = float(reference.data.max())
    if peak_value <= 0.0:
        raise ValueError("cannot refine against an all-zero grid")
    mean_width = float(np.mean(reference.spec.voxel_sizes))
    # Loss is a per-voxel mean, so undo the 1/N in the step scale.
    step0 = (
        config.learning_rate * mean_width**2 / peak_value * reference.data.size
    )

    regen = _regenerate(reference, channels, positions)
    current_loss = _mse(reference, regen)
    best_positions = positions.copy()
    best_loss = current_loss
    iterations = 0
    diverged = False
    forced_streak = 0

    while iterations < config.max_iters:
        if current_loss < config.tolerance:
            break
        diff = regen.data.astype(np.float64) - reference.data.astype(np.float64)
        grad = _gradient_from_diff(reference, diff, channels, positions)
        if not np.any(grad):
            break  # flat spot; nothing further to do
        step = step0
        accepted = False
        for _ in range(_BACKOFF_HALVINGS + 1):
            candidate = positions - step * grad
            cand_regen = _regenerate(reference, channels, candidate)
            cand_loss = _mse(reference, cand_regen)
            if cand_loss <= current_loss:
                accepted = True
                break
            step *= 0.5
        positions, regen, current_loss = candidate, cand_regen, cand_loss
        iterations += 1
        forced_streak = 0 if accepted else forced_streak + 1
        if current_loss < best_loss:
            best_loss = current_loss
            best_positions = positions.copy()
        if forced_streak >= _DIVERGENCE_PATIENCE:
            diverged = True
            break

    return ReversalState(
        channels=channels,
        positions=best_positions,
        loss=best_loss,
        iterations=iterations,
        converged=best_loss < config.tolerance,
        diverged=diverged,
    )


def reverse_grid(grid: Grid, config: ReversalConfig | None = None) -> ParticleSet:
    """Full reversal: detect peaks, refine their coordinates, return
    particles.

    Channels are reversed independently. When a channel's integrated mass
    rounds to a different particle count than the number of detected
    peaks, the peaks win and a :class:`CountMismatchWarning` is emitted.
    """
    config = config or ReversalConfig()
    _check_reference(grid)
    peaks = detect_peaks(grid, config.persistence_threshold)

    channel_sums = grid.channel_sums()
    for channel in range(grid.spec.channels):
        detected = len(peaks.for_channel(channel))
        expected = int(round(float(channel_sums[channel])))
        if detected != expected:
            warnings.warn(
                f"channel {channel}: integrated mass {channel_sums[channel]:.3f} "
                f"suggests {expected} particles but {detected} peaks were detected",
                CountMismatchWarning,
                stacklevel=2,
            )

    if len(peaks) == 0:
        return ParticleSet(np.zeros(0, dtype=np.int64), np.zeros((0, 3)))
    state = refine_coords(grid, peaks, config)
    return state.to_particle_set()
