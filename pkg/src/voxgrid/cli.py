"""Command-line interface: ``grid``, ``reverse`` and ``bench`` subcommands."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bench import BenchConfig, run_benchmark
from .core import BoundingBox, GridSpec, LatticeCell, ParticleSet, bounding_box_of
from .gridgen import generate_grid
from .io import grid_from_array, parse_points_csv, parse_xyz, read_npy, write_npy
from .reversal import ReversalConfig, reverse_grid

__all__ = ["cli_main", "main"]


def _parse_floats(text: str, count: int, flag: str) -> tuple[float, ...]:
    parts = [p for p in text.split(",") if p.strip()]
    if len(parts) != count:
        raise argparse.ArgumentTypeError(f"{flag} needs {count} comma-separated values")
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"{flag}: {exc}") from None


def _grid_size(text: str) -> tuple[int, int, int]:
    parts = [p for p in text.split(",") if p.strip()]
    if len(parts) not in (1, 3):
        raise argparse.ArgumentTypeError("--grid-size takes N or H,W,D")
    try:
        values = [int(p) for p in parts]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"--grid-size: {exc}") from None
    if len(values) == 1:
        values = values * 3
    if min(values) < 1:
        raise argparse.ArgumentTypeError("--grid-size values must be >= 1")
    return tuple(values)  # type: ignore[return-value]


def _box(text: str) -> BoundingBox:
    vals = _parse_floats(text, 6, "--box")
    return BoundingBox(vals[:3], vals[3:])


def _periodic(text: str) -> LatticeCell:
    return LatticeCell(_parse_floats(text, 3, "--periodic"))


def _csv_ints(text: str) -> tuple[int, ...]:
    return tuple(int(p) for p in text.split(",") if p.strip())


def _csv_floats(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.split(",") if p.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="voxgrid",
        description="Gaussian-density voxel grids from typed point clouds, and back.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("grid", help="voxelize an XYZ or CSV point file into an NPY grid")
    g.add_argument("--input", required=True, help="input .xyz or .csv file")
    g.add_argument("--grid-size", type=_grid_size, default=(32, 32, 32), metavar="N[,N,N]")
    g.add_argument(
        "--variance",
        type=float,
        required=True,
        metavar="SIGMA",
        help="Gaussian width (standard deviation) of each particle",
    )
    g.add_argument(
        "--channels",
        default="auto",
        help="'auto' (distinct elements / max CSV channel), 'single', or a count",
    )
    g.add_argument(
        "--padding-sigmas",
        type=float,
        default=None,
        help="bounding-box margin in sigmas when no --box is given (default 4)",
    )
    g.add_argument("--box", type=_box, default=None, metavar="OX,OY,OZ,AX,AY,AZ")
    g.add_argument("--periodic", type=_periodic, default=None, metavar="A,B,C")
    g.add_argument("--mode", choices=("dense", "sparse"), default="sparse")
    g.add_argument("--output", required=True, help="output .npy path")
    g.add_argument("--stats", default=None, help="optional stats JSON path")

    r = sub.add_parser("reverse", help="recover (channel,x,y,z) rows from an NPY grid")
    r.add_argument("--input", required=True, help="input .npy grid")
    r.add_argument("--variance", type=float, required=True, metavar="SIGMA")
    r.add_argument(
        "--box",
        type=_box,
        default=BoundingBox((0.0, 0.0, 0.0), (1.0, 1.0, 1.0)),
        metavar="OX,OY,OZ,AX,AY,AZ",
        help="world box of the grid (default unit box at the origin)",
    )
    r.add_argument("--learning-rate", type=float, default=0.1)
    r.add_argument("--tolerance", type=float, default=1e-12)
    r.add_argument("--max-iters", type=int, default=5000)
    r.add_argument("--persistence-threshold", type=float, default=0.05)
    r.add_argument("--output", required=True, help="output .csv path")

    b = sub.add_parser("bench", help="dense-vs-sparse throughput benchmark")
    b.add_argument("--sizes", type=_csv_ints, default=(16, 32, 64, 128))
    b.add_argument("--variances", type=_csv_floats, default=(0.05, 0.1, 0.25, 0.5))
    b.add_argument("--repeats", type=int, default=10)
    b.add_argument("--molecules", type=int, default=100)
    b.add_argument("--corpus", default=None, help="directory of .xyz files")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--output", default=None, help="report JSON path")
    return parser


def _load_points(path: Path, channels_flag: str, lattice: LatticeCell | None):
    """Read an input file into a (ParticleSet, channel count) pair."""
    text = path.read_text()
    suffix = path.suffix.lower()
    if suffix == ".xyz":
        mol = parse_xyz(text)
        policy: str | int = (
            channels_flag if channels_flag in ("auto", "single") else int(channels_flag)
        )
        return mol.to_particle_set(policy, lattice), mol.n_channels(policy) or 1
    if suffix == ".csv":
        rows = parse_points_csv(text).to_rows()
        if channels_flag == "single":
            rows[:, 0] = 0
            n_channels = 1
        elif channels_flag == "auto":
            n_channels = (int(rows[:, 0].max()) + 1) if len(rows) else 1
        else:
            n_channels = int(channels_flag)
            if len(rows) and rows[:, 0].max() >= n_channels:
                raise ValueError(
                    f"CSV uses channel {int(rows[:, 0].max())} but --channels is {n_channels}"
                )
        points = ParticleSet(rows[:, 0].astype(np.int64), rows[:, 1:4], lattice)
        return points, n_channels
    raise ValueError(f"cannot infer format of {path}: expected .xyz or .csv")


def _cmd_grid(args) -> int:
    if args.periodic is not None and args.box is not None:
        raise ValueError("--periodic and --box are mutually exclusive")
    if args.periodic is not None and args.padding_sigmas is not None:
        raise ValueError("--padding-sigmas is meaningless with --periodic (the cell is the box)")
    lattice = args.periodic
    points, n_channels = _load_points(Path(args.input), args.channels, lattice)
    if lattice is not None:
        box = BoundingBox((0.0, 0.0, 0.0), lattice.edges)
    elif args.box is not None:
        box = args.box
    else:
        padding = 4.0 if args.padding_sigmas is None else args.padding_sigmas
        box = bounding_box_of(points, args.variance, padding)
    spec = GridSpec(args.grid_size, n_channels, box, args.variance, lattice)
    grid, stats = generate_grid(points, spec, args.mode)
    write_npy(grid, args.output)

    if args.stats:
        payload = {
            "sum": grid.total_sum(),
            "per_channel_sums": [float(s) for s in grid.channel_sums()],
            "nonzero_voxels": stats.nonzero_voxels,
            "erf_evals": stats.erf_evals,
            "elapsed_ms": stats.elapsed * 1e3,
            "voxel_writes": stats.voxel_writes,
            "shape": list(grid.data.shape),
            "sigma": spec.sigma,
            "box": {"origin": list(box.origin), "extents": list(box.extents)},
        }
        Path(args.stats).write_text(json.dumps(payload, indent=2) + "\n")
    return 0


def _cmd_reverse(args) -> int:
    tensor = read_npy(args.input)
    if tensor.ndim != 4:
        raise ValueError(f"{args.input}: expected a (channels, H, W, D) grid, got {tensor.shape}")
    grid = grid_from_array(tensor, args.box, args.variance)
    config = ReversalConfig(
        learning_rate=args.learning_rate,
        tolerance=args.tolerance,
        max_iters=args.max_iters,
        persistence_threshold=args.persistence_threshold,
    )
    particles = reverse_grid(grid, config)
    lines = [
        f"{channel},{pos[0]:.9g},{pos[1]:.9g},{pos[2]:.9g}"
        for channel, pos in particles
    ]
    Path(args.output).write_text("\n".join(lines) + ("\n" if lines else ""))
    return 0


def _cmd_bench(args) -> int:
    config = BenchConfig(
        sizes=tuple(args.sizes),
        variances=tuple(args.variances),
        repeats=args.repeats,
        molecules=args.molecules,
        corpus=args.corpus,
        seed=args.seed,
        jobs=args.jobs,
    )
    report = run_benchmark(config)
    print(report.format_table())
    if args.output:
        Path(args.output).write_text(report.to_json() + "\n")
    return 0


_COMMANDS = {"grid": _cmd_grid, "reverse": _cmd_reverse, "bench": _cmd_bench}


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError, NotImplementedError) as exc:
        print(f"voxgrid: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
