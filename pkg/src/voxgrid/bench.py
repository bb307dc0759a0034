"""Throughput benchmark: dense vs sparse generation across sizes and widths.

The protocol times full corpus passes (after an untimed warm-up pass) for
every (grid size, sigma, mode) cell and reports mean time per molecule,
throughput, mean nonzero voxel fraction, and speedup against the dense
baseline at the same cell. Corpus construction and I/O stay outside the
timed region. Timings aside, every reported figure is deterministic in
the seed.

The default corpus is synthetic: molecule-like random walks (bond-length
steps) dropped in the middle of a fixed cubic box, so sparsity numbers
are reproducible without chemistry dependencies. Point a ``corpus``
directory of XYZ files at the runner to benchmark real molecules.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import BoundingBox, GridSpec, ParticleSet
from .gridgen import generate_batch, generate_grid

__all__ = ["BenchConfig", "BenchCell", "BenchReport", "synth_corpus", "run_benchmark"]

_DEFAULT_BOX_SCALE = 48.0
_DEFAULT_CHANNELS = 4
_BOND_LENGTH = 1.5


@dataclass(frozen=True)
class BenchConfig:
    sizes: tuple[int, ...] = (16, 32, 64, 128)
    variances: tuple[float, ...] = (0.05, 0.1, 0.25, 0.5)
    repeats: int = 10
    molecules: int = 100
    corpus: str | None = None  # directory of .xyz files; None -> synthetic
    atoms_range: tuple[int, int] = (8, 40)
    box_scale: float = _DEFAULT_BOX_SCALE
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if not self.sizes or min(self.sizes) < 8:
            raise ValueError(f"sizes must all be >= 8, got {self.sizes}")
        if not self.variances or min(self.variances) <= 0:
            raise ValueError(f"variances must be positive, got {self.variances}")
        if self.repeats < 1 or self.molecules < 1 or self.jobs < 1:
            raise ValueError("repeats, molecules and jobs must be >= 1")
        lo, hi = self.atoms_range
        if not 1 <= lo <= hi:
            raise ValueError(f"degenerate atoms_range {self.atoms_range}")
        if self.box_scale <= 0:
            raise ValueError(f"box_scale must be positive, got {self.box_scale}")


@dataclass
class BenchCell:
    size: int
    variance: float
    mode: str
    mean_time: float
    throughput: float
    nonzero_fraction: float
    speedup: float
    batch_throughput: float | None = None

    def to_dict(self) -> dict:
        return {
            "size": self.size,
            "variance": self.variance,
            "mode": self.mode,
            "mean_time_s": self.mean_time,
            "throughput_mol_per_s": self.throughput,
            "nonzero_fraction": self.nonzero_fraction,
            "speedup_vs_dense": self.speedup,
            "batch_throughput_mol_per_s": self.batch_throughput,
        }


@dataclass
class BenchReport:
    cells: list[BenchCell]
    config: BenchConfig
    meta: dict = field(default_factory=dict)

    def cell(self, size: int, variance: float, mode: str) -> BenchCell:
        for c in self.cells:
            if c.size == size and c.variance == variance and c.mode == mode:
                return c
        raise KeyError(f"no cell for ({size}, {variance}, {mode})")

    def to_json(self) -> str:
        payload = {
            "config": {
                "sizes": list(self.config.sizes),
                "variances": list(self.config.variances),
                "repeats": self.config.repeats,
                "molecules": self.config.molecules,
                "corpus": self.config.corpus,
                "seed": self.config.seed,
                "jobs": self.config.jobs,
            },
            "meta": self.meta,
            "cells": [c.to_dict() for c in self.cells],
        }
        return json.dumps(payload, indent=2)

    def format_table(self) -> str:
        header = (
            f"{'size':>5} {'sigma':>6} {'mode':>7} {'ms/mol':>10} "
            f"{'mol/s':>10} {'nonzero%':>9} {'speedup':>8}"
        )
        lines = [header, "-" * len(header)]
        for c in self.cells:
            lines.append(
                f"{c.size:>5} {c.variance:>6.3g} {c.mode:>7} "
                f"{c.mean_time * 1e3:>10.3f} {c.throughput:>10.1f} "
                f"{c.nonzero_fraction * 100:>9.3f} {c.speedup:>8.2f}"
            )
        return "\n".join(lines)


def synth_corpus(
    n: int,
    atoms_range: tuple[int, int] = (8, 40),
    box_scale: float = _DEFAULT_BOX_SCALE,
    seed: int = 0,
    channels: int = _DEFAULT_CHANNELS,
) -> list[ParticleSet]:
    """Deterministic molecule-like random point sets.

    Atoms are laid out by a jittered random walk with bond-length steps,
    softly clamped to a molecule-sized ball and centered in a cube of
    edge ``box_scale``, so every set clears the default 4-sigma margins
    with room to spare.
    """
    if n < 1:
        raise ValueError(f"need n >= 1 molecules, got {n}")
    lo, hi = atoms_range
    if not 1 <= lo <= hi:
        raise ValueError(f"degenerate atoms_range {atoms_range}")
    if channels < 1:
        raise ValueError(f"channels must be >= 1, got {channels}")
    rng = np.random.default_rng(seed)
    center = np.full(3, box_scale / 2.0)
    corpus = []
    for _ in range(n):
        count = int(rng.integers(lo, hi + 1))
        radius = 1.6 * count ** (1 / 3) + 1.0
        pos = np.zeros((count, 3))
        here = np.zeros(3)
        for a in range(count):
            step = rng.normal(size=3)
            step *= _BOND_LENGTH / np.linalg.norm(step)
            here = here + step + rng.normal(scale=0.1, size=3)
            dist = np.linalg.norm(here)
            if dist > radius:  # fold back into the molecule ball
                here *= radius / dist
            pos[a] = here
        pos = pos - pos.mean(axis=0) + center
        chans = rng.integers(0, channels, size=count)
        corpus.append(ParticleSet(chans, pos))
    return corpus


def _load_xyz_corpus(directory: str, limit: int, channels: int) -> list[ParticleSet]:
    from .io import parse_xyz

    paths = sorted(Path(directory).glob("*.xyz"))[:limit]
    if not paths:
        raise ValueError(f"no .xyz files found under {directory}")
    corpus = []
    for path in paths:
        mol = parse_xyz(path.read_text())
        corpus.append(mol.to_particle_set(policy=channels))
    return corpus


def run_benchmark(config: BenchConfig) -> BenchReport:
    """Run the full dense-vs-sparse timing protocol for ``config``."""
    if config.corpus is not None:
        corpus = _load_xyz_corpus(config.corpus, config.molecules, _DEFAULT_CHANNELS)
        boxes = None
    else:
        corpus = synth_corpus(
            config.molecules, config.atoms_range, config.box_scale, config.seed
        )
        boxes = BoundingBox((0.0, 0.0, 0.0), (config.box_scale,) * 3)

    if boxes is None:
        # Real molecules: share one box covering the whole corpus with margin.
        allpos = np.vstack([ps.positions for ps in corpus])
        lo = allpos.min(axis=0) - 4.0 * max(config.variances)
        hi = allpos.max(axis=0) + 4.0 * max(config.variances)
        boxes = BoundingBox(tuple(lo), tuple(np.maximum(hi - lo, 1e-6)))

    cells: list[BenchCell] = []
    for size in config.sizes:
        for variance in config.variances:
            spec = GridSpec.cubic(size, _DEFAULT_CHANNELS, boxes, variance)
            dense_mean = None
            for mode in ("dense", "sparse"):
                # Warm-up pass, untimed; also yields the nonzero fractions.
                fractions = []
                for points in corpus:
                    grid, stats = generate_grid(points, spec, mode)
                    fractions.append(stats.nonzero_voxels / grid.data.size)
                start = time.perf_counter()
                for _ in range(config.repeats):
                    for points in corpus:
                        generate_grid(points, spec, mode)
                elapsed = time.perf_counter() - start
                mean_time = elapsed / (config.repeats * len(corpus))
                if mode == "dense":
                    dense_mean = mean_time
                batch_throughput = None
                if config.jobs > 1:
                    t0 = time.perf_counter()
                    generate_batch(corpus, spec, parallelism=config.jobs, mode=mode)
                    batch_elapsed = time.perf_counter() - t0
                    batch_throughput = len(corpus) / batch_elapsed
                cells.append(
                    BenchCell(
                        size=size,
                        variance=variance,
                        mode=mode,
                        mean_time=mean_time,
                        throughput=1.0 / mean_time,
                        nonzero_fraction=float(np.mean(fractions)),
                        speedup=dense_mean / mean_time,
                        batch_throughput=batch_throughput,
                    )
                )
    meta = {"corpus_molecules": len(corpus)}
    return BenchReport(cells, config, meta)
