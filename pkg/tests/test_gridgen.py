import numpy as np
import pytest

from voxgrid import (
    BoundingBox,
    Grid,
    GridSpec,
    LatticeCell,
    ParticleSet,
    bounding_box_of,
    generate_batch,
    generate_grid,
    splat_atom,
)

from oracles import naive_splat


def random_molecule(rng, count, box, margin, channels=2, lattice=None):
    lo = np.asarray(box.origin) + margin
    hi = np.asarray(box.max_corner) - margin
    pts = rng.uniform(lo, hi, size=(count, 3))
    return ParticleSet(rng.integers(0, channels, size=count), pts, lattice)


def test_splat_center_octants():
    spec = GridSpec((2, 2, 2), 1, BoundingBox((0, 0, 0), (1, 1, 1)), 0.05)
    grid = Grid.zeros(spec)
    splat_atom(grid, 0, (0.5, 0.5, 0.5))
    assert np.all(np.abs(grid.data - 0.125) <= 1e-4)


def test_splat_adds_unit_mass_with_margin():
    spec = GridSpec((16, 16, 16), 2, BoundingBox((0, 0, 0), (8, 8, 8)), 0.5)
    grid = Grid.zeros(spec)
    splat_atom(grid, 1, (3.7, 4.2, 4.0))
    assert abs(grid.total_sum() - 1.0) <= 1e-3
    assert grid.channel_sums()[0] == 0.0


def test_splat_validation():
    spec = GridSpec((4, 4, 4), 1, BoundingBox((0, 0, 0), (1, 1, 1)), 0.1)
    grid = Grid.zeros(spec)
    with pytest.raises(ValueError):
        splat_atom(grid, 1, (0.5, 0.5, 0.5))
    with pytest.raises(ValueError):
        splat_atom(grid, 0, (np.nan, 0.5, 0.5))
    with pytest.raises(ValueError):
        splat_atom(grid, 0, (0.5, 0.5, 0.5), mode="fast")


def test_splat_sparse_equals_dense_and_visits_fewer_voxels():
    spec = GridSpec((64, 64, 64), 1, BoundingBox((0, 0, 0), (12, 12, 12)), 0.5)
    dense = Grid.zeros(spec)
    sparse = Grid.zeros(spec)
    st_dense = splat_atom(dense, 0, (6.0, 6.0, 6.0), mode="dense")
    st_sparse = splat_atom(sparse, 0, (6.0, 6.0, 6.0), mode="sparse")
    assert np.array_equal(dense.data, sparse.data)
    assert st_dense.voxel_writes == 64**3
    assert st_sparse.voxel_writes < st_dense.voxel_writes
    # saturation support is about +-5.7 sigma, i.e. ~11% of this box...
    assert st_sparse.voxel_writes <= 0.15 * 64**3
    # ...and well under 5% once the box is roomier, which is the regime
    # the sparsity pays off in
    spec_big = GridSpec((64, 64, 64), 1, BoundingBox((0, 0, 0), (24, 24, 24)), 0.5)
    big = Grid.zeros(spec_big)
    st_big = splat_atom(big, 0, (12.0, 12.0, 12.0), mode="sparse")
    assert st_big.voxel_writes <= 0.05 * 64**3


def test_splat_matches_naive_triple_loop_bitwise():
    rng = np.random.default_rng(2)
    spec = GridSpec((7, 6, 5), 1, BoundingBox((-1, 0, 2), (3, 4, 2.5)), 0.4)
    for _ in range(5):
        pos = rng.uniform([-1, 0, 2], [2, 4, 4.5])
        for mode in ("dense", "sparse"):
            grid = Grid.zeros(spec)
            splat_atom(grid, 0, pos, mode=mode)
            expected = naive_splat(spec, pos)
            assert np.array_equal(grid.data[0], expected)


def test_erf_eval_counts_shared_endpoints():
    H, W, D = 10, 12, 14
    spec = GridSpec((H, W, D), 1, BoundingBox((0, 0, 0), (6, 5, 7)), 0.5)
    grid = Grid.zeros(spec)
    stats = splat_atom(grid, 0, (3.0, 2.5, 3.5))
    assert stats.erf_evals == (W + 1) + (H + 1) + (D + 1)


def test_generate_empty_set_gives_zero_grid():
    spec = GridSpec((8, 8, 8), 2, BoundingBox((0, 0, 0), (4, 4, 4)), 0.3)
    grid, stats = generate_grid(ParticleSet.from_rows([]), spec)
    assert not np.any(grid.data)
    assert stats.nonzero_voxels == 0
    assert stats.voxel_writes == 0


def test_generate_normalization_per_channel():
    rng = np.random.default_rng(4)
    sigma = 0.4
    box = BoundingBox((0, 0, 0), (10, 10, 10))
    spec = GridSpec((25, 25, 25), 3, box, sigma)
    points = random_molecule(rng, 10, box, margin=4 * sigma, channels=3)
    grid, _ = generate_grid(points, spec)
    counts = points.channel_counts(3)
    sums = grid.channel_sums()
    assert float(grid.data.min()) >= 0.0
    assert abs(grid.total_sum() - 10) <= 1e-2
    for c in range(3):
        assert abs(sums[c] - counts[c]) <= 1e-3 * max(counts[c], 1)


def test_generate_sparse_equals_dense_bitwise():
    rng = np.random.default_rng(8)
    box = BoundingBox((-2, -2, -2), (9, 9, 9))
    spec = GridSpec((32, 32, 32), 2, box, 0.25)
    points = random_molecule(rng, 20, box, margin=0.5)
    g_sparse, _ = generate_grid(points, spec, mode="sparse")
    g_dense, _ = generate_grid(points, spec, mode="dense")
    assert np.array_equal(g_sparse.data, g_dense.data)


def test_generate_threshold_truncation_bounded_difference():
    rng = np.random.default_rng(15)
    box = BoundingBox((0, 0, 0), (8, 8, 8))
    spec = GridSpec((24, 24, 24), 1, box, 0.5)
    points = random_molecule(rng, 6, box, margin=2.0, channels=1)
    eps = 1e-6  # exaggerated threshold so the difference is visible
    g_dense, _ = generate_grid(points, spec, mode="dense")
    g_thresh, st = generate_grid(points, spec, mode="sparse", threshold=eps)
    diff = np.abs(g_dense.data.astype(np.float64) - g_thresh.data.astype(np.float64))
    assert diff.max() <= 3 * eps * len(points)
    assert diff.max() > 0  # the threshold actually dropped something
    g_sat, st_sat = generate_grid(points, spec, mode="sparse")
    assert st.voxel_writes <= st_sat.voxel_writes


def test_generate_out_of_box_particles_allowed():
    spec = GridSpec((8, 8, 8), 1, BoundingBox((0, 0, 0), (4, 4, 4)), 0.3)
    points = ParticleSet([0, 0], [[-10.0, 2.0, 2.0], [2.0, 2.0, 2.0]])
    grid, _ = generate_grid(points, spec)
    # far-away particle contributes nothing; in-box one contributes ~1
    assert abs(grid.total_sum() - 1.0) <= 1e-3


def test_generate_periodic_mass_conserved_at_boundary():
    cell = LatticeCell((6.0, 6.0, 6.0))
    box = BoundingBox((0, 0, 0), (6, 6, 6))
    spec = GridSpec((24, 24, 24), 1, box, 0.4, cell)
    points = ParticleSet([0, 0], [[0.0, 0.0, 0.0], [5.9, 3.0, 0.05]], cell)
    grid, _ = generate_grid(points, spec)
    assert abs(grid.total_sum() - 2.0) <= 1e-3 * 2


def test_generate_periodic_requires_matching_lattice():
    cell = LatticeCell((6.0, 6.0, 6.0))
    spec = GridSpec((8, 8, 8), 1, BoundingBox((0, 0, 0), (6, 6, 6)), 0.3, cell)
    with pytest.raises(ValueError):
        generate_grid(ParticleSet([0], [[1, 1, 1]]), spec)  # no lattice on points
    spec_open = GridSpec((8, 8, 8), 1, BoundingBox((0, 0, 0), (6, 6, 6)), 0.3)
    with pytest.raises(ValueError):
        generate_grid(ParticleSet([0], [[1, 1, 1]], cell), spec_open)


def test_generate_rejects_out_of_range_channel():
    spec = GridSpec((4, 4, 4), 1, BoundingBox((0, 0, 0), (1, 1, 1)), 0.1)
    with pytest.raises(ValueError):
        generate_grid(ParticleSet([1], [[0.5, 0.5, 0.5]]), spec)


def test_translation_equivariance_bitwise():
    rng = np.random.default_rng(12)
    box = BoundingBox((0.0, 0.0, 0.0), (8.0, 8.0, 8.0))
    spec = GridSpec((16, 16, 16), 1, box, 0.5)
    points = ParticleSet([0, 0], [[2.25, 3.5, 4.125], [5.0, 2.75, 6.5]])
    base, _ = generate_grid(points, spec)
    for shift in [(1.5, -2.25, 4.0), (0.1, 0.37, -1.234), tuple(rng.uniform(-3, 3, 3))]:
        moved = ParticleSet([0, 0], points.positions + np.asarray(shift))
        spec_moved = GridSpec((16, 16, 16), 1, box.translate(shift), 0.5)
        grid, _ = generate_grid(moved, spec_moved)
        assert np.array_equal(base.data, grid.data)


def test_monotone_work_sparse_never_exceeds_dense():
    rng = np.random.default_rng(19)
    box = BoundingBox((0, 0, 0), (6, 6, 6))
    spec = GridSpec((16, 16, 16), 1, box, 0.2)
    for _ in range(10):
        points = random_molecule(rng, 5, box, margin=0.0, channels=1)
        _, st_sparse = generate_grid(points, spec, mode="sparse")
        _, st_dense = generate_grid(points, spec, mode="dense")
        assert st_sparse.voxel_writes <= st_dense.voxel_writes


def test_batch_of_one_equals_generate_grid():
    rng = np.random.default_rng(23)
    box = BoundingBox((0, 0, 0), (8, 8, 8))
    spec = GridSpec((16, 16, 16), 2, box, 0.4)
    points = random_molecule(rng, 8, box, margin=1.6)
    single, _ = generate_grid(points, spec)
    batch = generate_batch([points], spec)
    assert not batch.errors
    assert np.array_equal(batch.grids()[0].data, single.data)


def test_batch_parallelism_is_bitwise_deterministic():
    rng = np.random.default_rng(29)
    box = BoundingBox((0, 0, 0), (8, 8, 8))
    spec = GridSpec((16, 16, 16), 2, box, 0.4)
    sets = [random_molecule(rng, 8, box, margin=1.6) for _ in range(6)]
    serial = generate_batch(sets, spec, parallelism=1)
    threaded = generate_batch(sets, spec, parallelism=8)
    for (ga, _), (gb, _) in zip(serial.results, threaded.results):
        assert np.array_equal(ga.data, gb.data)


def test_batch_reports_per_index_failures():
    box = BoundingBox((0, 0, 0), (4, 4, 4))
    spec = GridSpec((8, 8, 8), 1, box, 0.3)
    good = ParticleSet([0], [[2, 2, 2]])
    bad = ParticleSet([5], [[2, 2, 2]])  # channel out of range
    batch = generate_batch([good, bad, good], spec)
    assert list(batch.errors) == [1]
    assert batch.results[0] is not None and batch.results[2] is not None
    assert batch.results[1] is None
    with pytest.raises(ValueError):
        batch.grids()


def test_batch_per_molecule_bbox_policy():
    rng = np.random.default_rng(31)
    sigma = 0.4
    spec = GridSpec((16, 16, 16), 1, BoundingBox((0, 0, 0), (1, 1, 1)), sigma)
    sets = [
        ParticleSet([0], [[100.0, 100.0, 100.0]]),
        ParticleSet([0], [[-50.0, 0.0, 0.0]]),
    ]
    batch = generate_batch(sets, spec, spec_policy="per-molecule-bbox")
    assert not batch.errors
    for (grid, _), points in zip(batch.results, sets):
        expected_box = bounding_box_of(points, sigma, 4.0)
        assert grid.spec.box == expected_box
        assert abs(grid.total_sum() - 1.0) <= 1e-3


def test_grid_dtype_modes():
    spec = GridSpec((8, 8, 8), 1, BoundingBox((0, 0, 0), (4, 4, 4)), 0.4)
    points = ParticleSet([0], [[2, 2, 2]])
    g32, _ = generate_grid(points, spec)
    g64, _ = generate_grid(points, spec, dtype=np.float64)
    assert g32.data.dtype == np.float32
    assert g64.data.dtype == np.float64
    assert abs(g64.total_sum() - 1.0) <= 1e-3
