import numpy as np
import pytest

from rbmsim.core import BoxGeometry, minimal_image
from rbmsim.neighbor import build_cell_list, pairs_within


def brute_force_pairs(positions, box, radius):
    """O(N^2) oracle returning {(i, j): displacement}."""
    n = positions.shape[0]
    out = {}
    for i in range(n):
        for j in range(i + 1, n):
            disp = minimal_image(positions[i] - positions[j], box)
            if float(np.sum(disp**2)) < radius**2:
                out[(i, j)] = disp
    return out


def test_build_geometry():
    box = BoxGeometry(10.0, cutoff=5.0)
    pos = np.zeros((1, 3))
    cl = build_cell_list(pos, box, 2.0 ** (1 / 6))
    assert cl.cells_per_side == 8  # floor(10 / 1.1225)
    assert cl.cell_size == pytest.approx(1.25)
    assert cl.cell_size >= cl.radius

    assert build_cell_list(pos, box, 5.0).cells_per_side == 2


def test_build_rejects_bad_radius():
    box = BoxGeometry(10.0, cutoff=5.0)
    with pytest.raises(ValueError):
        build_cell_list(np.zeros((1, 3)), box, 5.5)
    with pytest.raises(ValueError):
        build_cell_list(np.zeros((1, 3)), box, 0.0)


def test_single_particle():
    box = BoxGeometry(10.0, cutoff=5.0)
    cl = build_cell_list(np.array([[1.0, 2.0, 3.0]]), box, 1.0)
    assert np.sum(cl.occupancy >= 0) == 1
    i, j, disp = pairs_within(cl, 1.0)
    assert i.size == j.size == 0 and disp.shape == (0, 3)


def test_two_particles_close():
    box = BoxGeometry(10.0, cutoff=5.0)
    pos = np.array([[1.0, 1.0, 1.0], [1.0, 1.0, 1.9]])
    i, j, disp = pairs_within(build_cell_list(pos, box, 1.0), 1.0)
    assert i.tolist() == [0] and j.tolist() == [1]
    assert disp[0] == pytest.approx([0.0, 0.0, -0.9])


def test_pair_across_boundary():
    box = BoxGeometry(10.0, cutoff=5.0)
    pos = np.array([[0.3, 5.0, 5.0], [9.7, 5.0, 5.0]])
    i, j, disp = pairs_within(build_cell_list(pos, box, 1.0), 1.0)
    assert i.tolist() == [0] and j.tolist() == [1]
    assert np.linalg.norm(disp[0]) == pytest.approx(0.6)


def test_matches_brute_force_random_configs():
    rng = np.random.default_rng(42)
    for _ in range(25):
        n = int(rng.integers(2, 120))
        length = float(rng.uniform(4.0, 9.0))
        box = BoxGeometry(length, cutoff=length / 2)
        radius = float(rng.uniform(0.5, length / 2))
        pos = rng.uniform(0, length, (n, 3))
        cl = build_cell_list(pos, box, radius)
        i, j, disp = pairs_within(cl, radius)
        oracle = brute_force_pairs(pos, box, radius)
        got = dict(zip(zip(i.tolist(), j.tolist()), disp))
        assert set(got) == set(oracle)
        for key, d in got.items():
            assert np.allclose(d, oracle[key], atol=1e-12)


def test_radius_equal_half_box_degenerate_grid():
    # m = 2: wrapped neighborhoods hit the same cells repeatedly; pairs
    # must still come out deduplicated and complete
    rng = np.random.default_rng(3)
    length = 6.0
    box = BoxGeometry(length, cutoff=3.0)
    pos = rng.uniform(0, length, (40, 3))
    cl = build_cell_list(pos, box, 3.0)
    i, j, _ = pairs_within(cl, 3.0)
    pairs = list(zip(i.tolist(), j.tolist()))
    assert len(pairs) == len(set(pairs))
    assert set(pairs) == set(brute_force_pairs(pos, box, 3.0))


def test_query_radius_capped_by_build_radius():
    box = BoxGeometry(10.0, cutoff=5.0)
    cl = build_cell_list(np.zeros((2, 3)) + 1.0, box, 1.0)
    with pytest.raises(ValueError):
        pairs_within(cl, 2.0)


def test_pairs_sorted_deterministically():
    rng = np.random.default_rng(4)
    box = BoxGeometry(8.0, cutoff=4.0)
    pos = rng.uniform(0, 8.0, (60, 3))
    cl = build_cell_list(pos, box, 2.0)
    i, j, _ = pairs_within(cl, 2.0)
    keys = i * 60 + j
    assert np.all(np.diff(keys) > 0)


def test_build_and_query_near_linear_complexity():
    import time

    box_times = []
    sizes = [1000, 10_000, 100_000]
    rng = np.random.default_rng(5)
    for n in sizes:
        length = (n / 0.5) ** (1 / 3)
        box = BoxGeometry(length, cutoff=length / 2)
        pos = rng.uniform(0, length, (n, 3))
        radius = 2.0 ** (1 / 6)
        t0 = time.perf_counter()
        for _ in range(3):
            cl = build_cell_list(pos, box, radius)
            pairs_within(cl, radius)
        box_times.append((time.perf_counter() - t0) / 3)
    slope = np.polyfit(np.log(sizes), np.log(box_times), 1)[0]
    assert slope <= 1.3
