"""voxgrid: Gaussian-density voxel grids for molecules and crystals.

Typed 3D point clouds become multi-channel density grids by exact
per-voxel integration of a Gaussian around every particle (the integral
separates into three per-axis error-function differences), and grids go
back to coordinates via persistence-based peak seeding plus gradient
descent on the grid-space reconstruction error.
"""

from .core import (
    BoundingBox,
    Grid,
    GridSpec,
    LatticeCell,
    ParticleSet,
    bounding_box_of,
    voxel_to_world,
    world_to_voxel,
)
from .kernels import (
    ERF_C1,
    ERF_C2,
    AxisTable,
    axis_gradient,
    axis_table,
    axis_table_periodic,
    erf_approx,
    erf_approx_derivative,
)
from .gridgen import BatchResult, GenStats, generate_batch, generate_grid, splat_atom
from .reversal import (
    CountMismatchWarning,
    Peak,
    PeakSet,
    ReversalConfig,
    ReversalState,
    detect_peaks,
    loss,
    loss_gradient,
    refine_coords,
    reverse_grid,
)
from .io import (
    ELEMENT_SYMBOLS,
    MoleculeFile,
    ParseError,
    grid_from_array,
    parse_points_csv,
    parse_xyz,
    read_npy,
    write_npy,
)
from .bench import BenchConfig, BenchReport, run_benchmark, synth_corpus
from .cli import cli_main

__version__ = "0.1.0"


def __getattr__(name):
    # deferred: the estimator pulls in scikit-learn, which the CLI never needs
    if name == "GaussianVoxelizer":
        from .estimator import GaussianVoxelizer

        return GaussianVoxelizer
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")

__all__ = [
    "BoundingBox",
    "Grid",
    "GridSpec",
    "LatticeCell",
    "ParticleSet",
    "bounding_box_of",
    "voxel_to_world",
    "world_to_voxel",
    "ERF_C1",
    "ERF_C2",
    "AxisTable",
    "axis_gradient",
    "axis_table",
    "axis_table_periodic",
    "erf_approx",
    "erf_approx_derivative",
    "BatchResult",
    "GenStats",
    "generate_batch",
    "generate_grid",
    "splat_atom",
    "CountMismatchWarning",
    "Peak",
    "PeakSet",
    "ReversalConfig",
    "ReversalState",
    "detect_peaks",
    "loss",
    "loss_gradient",
    "refine_coords",
    "reverse_grid",
    "GaussianVoxelizer",
    "ELEMENT_SYMBOLS",
    "MoleculeFile",
    "ParseError",
    "grid_from_array",
    "parse_points_csv",
    "parse_xyz",
    "read_npy",
    "write_npy",
    "BenchConfig",
    "BenchReport",
    "run_benchmark",
    "synth_corpus",
    "cli_main",
    "__version__",
]
