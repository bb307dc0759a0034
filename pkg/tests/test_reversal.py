import numpy as np
import pytest

from voxgrid import (
    BoundingBox,
    CountMismatchWarning,
    Grid,
    GridSpec,
    ParticleSet,
    ReversalConfig,
    ReversalState,
    detect_peaks,
    generate_grid,
    loss,
    loss_gradient,
    refine_coords,
    reverse_grid,
)
from voxgrid.reversal import _channel_persistence

from oracles import brute_force_peaks, brute_force_persistence, greedy_match, naive_mse


BOX = BoundingBox((0.0, 0.0, 0.0), (12.0, 12.0, 12.0))
SIGMA = 0.5
SPEC = GridSpec((24, 24, 24), 2, BOX, SIGMA)  # voxel width 0.5 = sigma


def separated_points(rng, count, min_dist=6 * SIGMA, margin=4 * SIGMA, channels=2):
    pts = []
    lo = margin + 0.05
    hi = 12.0 - margin - 0.05
    while len(pts) < count:
        p = rng.uniform(lo, hi, size=3)
        if all(np.linalg.norm(p - q) >= min_dist for q in pts):
            pts.append(p)
    return ParticleSet(rng.integers(0, channels, size=count), np.array(pts))


def test_config_validation():
    with pytest.raises(ValueError):
        ReversalConfig(learning_rate=0.0)
    with pytest.raises(ValueError):
        ReversalConfig(tolerance=-1)
    with pytest.raises(ValueError):
        ReversalConfig(max_iters=0)
    with pytest.raises(ValueError):
        ReversalConfig(persistence_threshold=1.0)


def test_detect_single_particle_peak():
    points = ParticleSet([0], [[5.2, 6.1, 7.3]])
    grid, _ = generate_grid(points, SPEC)
    peaks = detect_peaks(grid)
    assert len(peaks) == 1
    peak = peaks.peaks[0]
    assert peak.channel == 0
    # the peak voxel contains the particle
    from voxgrid import world_to_voxel

    assert peak.index == world_to_voxel(SPEC, (5.2, 6.1, 7.3))
    assert peak.persistence > 0


def test_detect_well_separated_particles():
    rng = np.random.default_rng(42)
    points = separated_points(rng, 6)
    grid, _ = generate_grid(points, SPEC)
    peaks = detect_peaks(grid)
    assert len(peaks) == 6
    deltas = np.asarray(SPEC.voxel_sizes)
    for c, pos in points:
        candidates = [p for p in peaks.for_channel(c)]
        dists = [
            np.linalg.norm((np.asarray(p.seed) - pos) / deltas) for p in candidates
        ]
        assert min(dists) <= 1.0  # within one voxel


def test_detect_merged_blob_resolution_limit():
    # closer than ~0.5 sigma two particles blur into one peak
    points = ParticleSet([0, 0], [[6.0, 6.0, 6.0], [6.0, 6.0, 6.2]])
    grid, _ = generate_grid(points, SPEC)
    peaks = detect_peaks(grid)
    assert len(peaks) == 1


def test_detect_all_zero_channel_yields_no_peaks():
    grid = Grid.zeros(SPEC)
    assert len(detect_peaks(grid)) == 0


def test_detect_rejects_negative_grid():
    grid = Grid.zeros(SPEC)
    grid.data[0, 0, 0, 0] = -1.0
    with pytest.raises(ValueError):
        detect_peaks(grid)


def test_detect_global_maximum_always_survives():
    rng = np.random.default_rng(77)
    data = rng.uniform(0.0, 1.0, size=(1, 8, 8, 8)).astype(np.float32)
    spec = GridSpec((8, 8, 8), 1, BoundingBox((0, 0, 0), (1, 1, 1)), 0.1)
    grid = Grid(spec, data)
    peaks = detect_peaks(grid, threshold=0.9)
    flat = data[0].ravel()
    best = int(np.argmax(flat))
    assert any(
        (p.index[1] * 8 + p.index[0]) * 8 + p.index[2] == best for p in peaks.peaks
    )


def _flatten_peaks(peaks, W, D):
    return {
        ((p.index[1] * W + p.index[0]) * D + p.index[2], p.value, p.persistence)
        for p in peaks.peaks
    }


def test_peak_detector_matches_brute_force_on_random_grids():
    rng = np.random.default_rng(123)
    spec = GridSpec((8, 8, 8), 1, BoundingBox((0, 0, 0), (1, 1, 1)), 0.1)
    for trial in range(20):
        data = rng.uniform(0.0, 1.0, size=(1, 8, 8, 8)).astype(np.float32)
        if trial % 3 == 0:
            data[data < 0.3] = 0.0  # exercise the zero floor
        if trial % 4 == 0:
            data = np.round(data, 1)  # force plateaus / ties
        threshold = float(rng.uniform(0.05, 0.6))
        grid = Grid(spec, np.ascontiguousarray(data))
        got = _flatten_peaks(detect_peaks(grid, threshold), 8, 8)
        expected = brute_force_peaks(data[0], threshold)
        assert got == expected, f"trial {trial}"


def test_persistence_classes_match_brute_force_exactly():
    rng = np.random.default_rng(321)
    for _ in range(5):
        values = rng.uniform(0, 1, size=(6, 5, 4)).astype(np.float32)
        values[values < 0.25] = 0.0
        ours = {
            (rep, birth, death)
            for rep, birth, death in _channel_persistence(values)
            if birth - death > 0  # brute force skips persistence-0 singletons
        }
        assert ours == brute_force_persistence(values)


def test_loss_zero_at_truth_and_positive_off_truth():
    points = ParticleSet([0, 1], [[4.0, 5.0, 6.0], [8.0, 7.0, 5.5]])
    grid, _ = generate_grid(points, SPEC)
    state = ReversalState(points.channels.copy(), points.positions.copy())
    assert loss(grid, state) < 1e-10
    shifted = ReversalState(
        points.channels.copy(), points.positions + np.array([0.5, 0.0, 0.0])
    )
    assert loss(grid, shifted) > loss(grid, state)


def test_loss_matches_naive_mse():
    points = ParticleSet([0], [[5.0, 6.0, 7.0]])
    grid, _ = generate_grid(points, SPEC)
    candidate = ReversalState(np.array([0]), np.array([[5.3, 5.8, 7.1]]))
    regen, _ = generate_grid(
        ParticleSet(candidate.channels, candidate.positions), SPEC
    )
    expected = naive_mse(grid.data, regen.data)
    assert loss(grid, candidate) == pytest.approx(expected, rel=1e-12)


def test_loss_rejects_bad_channels():
    grid, _ = generate_grid(ParticleSet([0], [[6, 6, 6]]), SPEC)
    with pytest.raises(ValueError):
        loss(grid, ReversalState(np.array([7]), np.array([[6.0, 6.0, 6.0]])))


def test_gradient_zero_at_truth():
    points = ParticleSet([0], [[5.0, 6.0, 7.0]])
    grid, _ = generate_grid(points, SPEC)
    grad = loss_gradient(grid, ReversalState(points.channels.copy(), points.positions.copy()))
    assert np.linalg.norm(grad) < 1e-6


def test_gradient_separable_symmetry():
    # reference particle on a voxel-center column; candidate offset in x only
    pos = np.array([[5.25, 6.25, 7.25]])  # voxel centers (delta = 0.5)
    points = ParticleSet([0], pos)
    grid, _ = generate_grid(points, SPEC, dtype=np.float64)
    candidate = ReversalState(np.array([0]), pos + np.array([0.7 * SIGMA, 0, 0]))
    grad = loss_gradient(grid, candidate)
    assert abs(grad[0, 0]) > 1e3 * abs(grad[0, 1])
    assert abs(grad[0, 0]) > 1e3 * abs(grad[0, 2])


def test_gradient_matches_finite_differences_fp64():
    rng = np.random.default_rng(55)
    spec = GridSpec((16, 16, 16), 2, BoundingBox((0, 0, 0), (8, 8, 8)), 0.45)
    for _ in range(5):
        n = int(rng.integers(1, 4))
        truth = ParticleSet(
            rng.integers(0, 2, size=n), rng.uniform(2.2, 5.8, size=(n, 3))
        )
        ref, _ = generate_grid(truth, spec, dtype=np.float64)
        cand_pos = truth.positions + rng.uniform(-0.3, 0.3, size=(n, 3))
        state = ReversalState(truth.channels.copy(), cand_pos)
        analytic = loss_gradient(ref, state)
        h = 1e-4 * spec.sigma
        for a in range(n):
            for axis in range(3):
                up = cand_pos.copy()
                dn = cand_pos.copy()
                up[a, axis] += h
                dn[a, axis] -= h
                fd = (
                    loss(ref, ReversalState(truth.channels.copy(), up))
                    - loss(ref, ReversalState(truth.channels.copy(), dn))
                ) / (2 * h)
                denom = max(abs(analytic[a, axis]), 1e-12)
                assert abs(fd - analytic[a, axis]) / denom < 1e-3


def test_refine_returns_immediately_at_truth():
    points = ParticleSet([0], [[5.0, 6.0, 7.0]])
    grid, _ = generate_grid(points, SPEC)
    state = refine_coords(grid, ReversalState(points.channels.copy(), points.positions.copy()))
    assert state.iterations == 0
    assert state.converged
    assert state.loss < ReversalConfig().tolerance


def test_refine_single_particle_from_voxel_center_seed():
    from voxgrid import world_to_voxel, voxel_to_world

    rng = np.random.default_rng(99)
    for _ in range(3):
        truth = rng.uniform(4.0, 8.0, size=3)
        points = ParticleSet([0], [truth])
        grid, _ = generate_grid(points, SPEC)
        idx = world_to_voxel(SPEC, truth)
        corner = voxel_to_world(SPEC, idx)
        seed = np.array(corner) + 0.5 * np.asarray(SPEC.voxel_sizes)
        state = refine_coords(grid, ReversalState(np.array([0]), seed[None, :]))
        err = np.linalg.norm(state.positions[0] - truth)
        assert err <= 0.1 * min(SPEC.voxel_sizes)
        assert state.loss <= loss(grid, ReversalState(np.array([0]), seed[None, :]))


def test_refine_multi_particle_round_trip():
    rng = np.random.default_rng(101)
    points = separated_points(rng, 5)
    grid, _ = generate_grid(points, SPEC)
    peaks = detect_peaks(grid)
    state = refine_coords(grid, peaks)
    assert len(state) == 5
    # match per channel
    for c in (0, 1):
        truth = points.positions[points.channels == c]
        got = state.positions[state.channels == c]
        assert truth.shape == got.shape
        if len(truth):
            dists = greedy_match(truth, got)
            rmsd = np.sqrt((dists**2).mean())
            assert rmsd < 0.5 * min(SPEC.voxel_sizes)


def test_refine_needs_seeds():
    grid, _ = generate_grid(ParticleSet([0], [[6, 6, 6]]), SPEC)
    with pytest.raises(ValueError):
        refine_coords(grid, ReversalState(np.zeros(0, dtype=int), np.zeros((0, 3))))


def test_reverse_grid_round_trip():
    rng = np.random.default_rng(7)
    points = separated_points(rng, 4)
    grid, _ = generate_grid(points, SPEC)
    recovered = reverse_grid(grid)
    assert len(recovered) == 4
    assert np.array_equal(
        np.sort(recovered.channels), np.sort(points.channels)
    )
    for c in (0, 1):
        truth = points.positions[points.channels == c]
        got = recovered.positions[recovered.channels == c]
        if len(truth):
            dists = greedy_match(truth, got)
            assert np.sqrt((dists**2).mean()) < 0.5 * min(SPEC.voxel_sizes)


def test_reverse_all_zero_grid():
    grid = Grid.zeros(SPEC)
    recovered = reverse_grid(grid)
    assert len(recovered) == 0


def test_reverse_warns_on_count_mismatch():
    # two overlapping particles merge into one peak: mass ~2, peaks = 1
    points = ParticleSet([0, 0], [[6.0, 6.0, 6.0], [6.0, 6.0, 6.15]])
    grid, _ = generate_grid(points, SPEC)
    with pytest.warns(CountMismatchWarning):
        recovered = reverse_grid(grid)
    assert len(recovered) == 1


def test_reverse_periodic_not_supported():
    from voxgrid import LatticeCell

    cell = LatticeCell((6.0, 6.0, 6.0))
    spec = GridSpec((12, 12, 12), 1, BoundingBox((0, 0, 0), (6, 6, 6)), 0.4, cell)
    points = ParticleSet([0], [[3.0, 3.0, 3.0]], cell)
    grid, _ = generate_grid(points, spec)
    with pytest.raises(NotImplementedError):
        reverse_grid(grid)


def test_descent_loss_never_worse_than_seed():
    rng = np.random.default_rng(63)
    points = separated_points(rng, 3)
    grid, _ = generate_grid(points, SPEC)
    peaks = detect_peaks(grid)
    seed_loss = loss(grid, peaks)
    state = refine_coords(grid, peaks, ReversalConfig(max_iters=40))
    assert state.loss <= seed_loss
