"""Scikit-learn style front end over grid generation and reversal.

``GaussianVoxelizer`` turns a list of ``(channel, x, y, z)`` point arrays
into a stacked ``(n, channels, H, W, D)`` float32 tensor in
:meth:`transform` and recovers coordinates from such tensors in
:meth:`inverse_transform`, so the pipeline composes with the usual
sklearn machinery (``get_params`` / ``set_params`` / ``clone`` /
``fit_transform``).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .core import BoundingBox, GridSpec, LatticeCell, ParticleSet, bounding_box_of
from .gridgen import generate_batch
from .reversal import ReversalConfig, reverse_grid
from .io import grid_from_array
from .validation import check_grid_tensor, check_points_array

__all__ = ["GaussianVoxelizer"]


class GaussianVoxelizer(BaseEstimator, TransformerMixin):
    """Voxelize typed point clouds into Gaussian-density grids.

    Parameters
    ----------
    grid_size : int or (int, int, int)
        Voxel counts, cubic when a single integer.
    sigma : float
        Gaussian width of each particle.
    n_channels : int or None
        Channel count; inferred from the fitted data when None.
    box : None, "per-sample", or ((ox, oy, oz), (ax, ay, az))
        None learns one shared padded bounding box from the fitted data;
        "per-sample" fits each sample its own box at transform time;
        an explicit (origin, extents) pair is used as given.
    padding_sigmas : float
        Margin, in units of sigma, added around learned boxes.
    periodic : (a, b, c) or None
        Orthorhombic cell edges; incompatible with learned boxes.
    mode : "sparse" or "dense"
        Generation path; both produce identical grids.
    n_jobs : int
        Molecules generated concurrently in transform.
    learning_rate, tolerance, max_iters, persistence_threshold
        Reversal knobs, see :class:`voxgrid.ReversalConfig`.
    """

    def __init__(
        self,
        grid_size=32,
        sigma=0.5,
        n_channels=None,
        box=None,
        padding_sigmas=4.0,
        periodic=None,
        mode="sparse",
        n_jobs=1,
        learning_rate=0.1,
        tolerance=1e-12,
        max_iters=5000,
        persistence_threshold=0.05,
    ):
        self.grid_size = grid_size
        self.sigma = sigma
        self.n_channels = n_channels
        self.box = box
        self.padding_sigmas = padding_sigmas
        self.periodic = periodic
        self.mode = mode
        self.n_jobs = n_jobs
        self.learning_rate = learning_rate
        self.tolerance = tolerance
        self.max_iters = max_iters
        self.persistence_threshold = persistence_threshold

    # ------------------------------------------------------------------
    def _shape(self) -> tuple[int, int, int]:
        if np.isscalar(self.grid_size):
            n = int(self.grid_size)
            return (n, n, n)
        shape = tuple(int(v) for v in self.grid_size)
        if len(shape) != 3:
            raise ValueError(f"grid_size must be an int or 3 ints, got {self.grid_size}")
        return shape

    def _lattice(self) -> LatticeCell | None:
        return None if self.periodic is None else LatticeCell(tuple(self.periodic))

    def _sets(self, X) -> list[ParticleSet]:
        lattice = self._lattice()
        return [
            ParticleSet(arr[:, 0].astype(np.int64), arr[:, 1:4], lattice)
            for arr in (check_points_array(x) for x in X)
        ]

    def fit(self, X, y=None):
        """Learn the channel count and, unless configured away, a shared
        bounding box from the point arrays in ``X``."""
        sets = self._sets(X)
        if self.n_channels is not None:
            self.channels_ = int(self.n_channels)
        else:
            self.channels_ = max((ps.n_channels for ps in sets), default=0) or 1
        lattice = self._lattice()
        if lattice is not None:
            if self.box is not None:
                raise ValueError("periodic grids derive their box from the cell edges")
            self.box_ = BoundingBox((0.0, 0.0, 0.0), lattice.edges)
        elif self.box is None:
            merged = ParticleSet(
                np.concatenate([ps.channels for ps in sets if len(ps)] or [np.zeros(0, int)]),
                np.concatenate(
                    [ps.positions for ps in sets if len(ps)] or [np.zeros((0, 3))]
                ),
            )
            if len(merged) == 0:
                raise ValueError("cannot learn a bounding box from empty data")
            self.box_ = bounding_box_of(merged, self.sigma, self.padding_sigmas)
        elif self.box == "per-sample":
            self.box_ = None
        else:
            origin, extents = self.box
            self.box_ = BoundingBox(tuple(origin), tuple(extents))
        return self

    def _spec(self) -> GridSpec:
        box = self.box_ if self.box_ is not None else BoundingBox((0, 0, 0), (1, 1, 1))
        return GridSpec(self._shape(), self.channels_, box, self.sigma, self._lattice())

    def transform(self, X) -> np.ndarray:
        """Generate one grid per sample; returns ``(n, C, H, W, D)`` float32."""
        if not hasattr(self, "channels_"):
            raise RuntimeError("GaussianVoxelizer is not fitted yet; call fit first")
        sets = self._sets(X)
        policy = "per-molecule-bbox" if self.box_ is None else "fixed"
        batch = generate_batch(
            sets,
            self._spec(),
            spec_policy=policy,
            parallelism=self.n_jobs,
            mode=self.mode,
            padding_sigmas=self.padding_sigmas,
        )
        grids = batch.grids()
        return np.stack([g.data for g in grids]) if grids else np.zeros(
            (0, self.channels_, *self._shape()), dtype=np.float32
        )

    def inverse_transform(self, G) -> list[np.ndarray]:
        """Recover ``(m_i, 4)`` point arrays from a batch of grids.

        Only meaningful with a fixed box (shared or explicit): per-sample
        boxes are not recoverable from bare tensors.
        """
        if not hasattr(self, "channels_"):
            raise RuntimeError("GaussianVoxelizer is not fitted yet; call fit first")
        if self.box_ is None:
            raise ValueError("inverse_transform requires a fixed box, not box='per-sample'")
        tensors = check_grid_tensor(G)
        config = ReversalConfig(
            learning_rate=self.learning_rate,
            tolerance=self.tolerance,
            max_iters=self.max_iters,
            persistence_threshold=self.persistence_threshold,
        )
        out = []
        for tensor in tensors:
            grid = grid_from_array(
                np.ascontiguousarray(tensor, dtype=np.float32), self.box_, self.sigma
            )
            out.append(reverse_grid(grid, config).to_rows())
        return out
