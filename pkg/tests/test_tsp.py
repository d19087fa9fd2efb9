from math import sqrt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crossquad import tsp

SQUARE = tsp.TspInstance(np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float))


def test_instance_generation():
    a, b = tsp.generate_instance(500, seed=3), tsp.generate_instance(500, seed=3)
    assert np.array_equal(a.coords, b.coords)
    assert a.coords.shape == (500, 2)
    assert np.all((a.coords >= 0) & (a.coords <= 1))
    assert np.all(np.abs(a.coords.mean(axis=0) - 0.5) < 3 / sqrt(12 * 500))


def test_instance_validation():
    with pytest.raises(ValueError):
        tsp.TspInstance(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        tsp.TspInstance(np.zeros((5, 3)))


def test_square_lengths():
    assert tsp.tour_length(SQUARE, [0, 1, 2, 3]) == pytest.approx(4.0)
    assert tsp.tour_length(SQUARE, [0, 2, 1, 3]) == pytest.approx(2 + 2 * sqrt(2))
    with pytest.raises(ValueError):
        tsp.tour_length(SQUARE, [0, 1, 1, 3])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 29))
def test_length_dihedral_invariance(seed, shift):
    inst = tsp.generate_instance(30, seed=seed)
    t = tsp.random_tours(30, 1, seed=seed)[0]
    base = tsp.tour_length(inst, t)
    assert tsp.tour_length(inst, t[::-1]) == pytest.approx(base)
    assert tsp.tour_length(inst, np.roll(t, shift)) == pytest.approx(base)


def test_instance_file_roundtrip(tmp_path):
    inst = tsp.generate_instance(25, seed=1)
    path = tmp_path / "cities.txt"
    tsp.write_instance(inst, path, comment="test set")
    assert np.array_equal(tsp.read_instance(path).coords, inst.coords)
    path.write_text("0 0\n1 2 3\n")
    with pytest.raises(ValueError):
        tsp.read_instance(path)


def test_normalizer_degenerate():
    with pytest.raises(tsp.DegenerateInstance):
        tsp.fit_normalizer(tsp.TspInstance(np.ones((10, 2))), 200, seed=0)


def test_normalizer_centers_random_tours():
    inst = tsp.generate_instance(100, seed=2)
    norm = tsp.fit_normalizer(inst, 5000, seed=3)
    fresh = tsp.random_tours(100, 5000, seed=4)
    z = norm(np.array([tsp.tour_length(inst, t) for t in fresh]))
    assert abs(z.mean()) < 3 / sqrt(5000) * 1.5
    assert z.std() == pytest.approx(1.0, abs=0.06)


def test_normalizer_resampling_agreement():
    inst = tsp.generate_instance(500, seed=5)
    a = tsp.fit_normalizer(inst, 10_000, seed=6)
    b = tsp.fit_normalizer(inst, 10_000, seed=7)
    se = sqrt(a.sigma**2 / a.sample_count + b.sigma**2 / b.sample_count)
    assert abs(a.mu - b.mu) < 3 * se


def test_two_opt_uncrosses_square():
    tour, length, steps = tsp.two_opt_descend(SQUARE, [0, 2, 1, 3])
    assert length == pytest.approx(4.0) and steps == 1
    assert tsp.tour_length(SQUARE, tour) == pytest.approx(4.0)


def _no_improving_pair(inst, tour):
    n = len(tour)
    d = tsp._distance_matrix(inst)
    for i in range(n - 1):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            a, b, c, e = tour[i], tour[i + 1], tour[j], tour[(j + 1) % n]
            if d[a, c] + d[b, e] < d[a, b] + d[c, e] - 1e-12:
                return False
    return True


def test_two_opt_is_local_and_improves():
    inst = tsp.generate_instance(100, seed=8)
    strict = 0
    for t0 in tsp.random_tours(100, 100, seed=9):
        start = tsp.tour_length(inst, t0)
        tour, length, _ = tsp.two_opt_descend(inst, t0)
        assert length <= start
        strict += length < start
    assert strict >= 99
    assert _no_improving_pair(inst, tour)


def test_route_crossover_identical_parents():
    inst = tsp.generate_instance(40, seed=0)
    p = tsp.random_tours(40, 1, seed=1)[0]
    kid = tsp.route_crossover(inst, p, p, 0.0, seed=2)
    edges = lambda t: {frozenset(e) for e in zip(t, np.roll(t, -1))}
    assert edges(kid) == edges(p)


def test_route_crossover_gamma_zero_prefers_parent1():
    inst = tsp.generate_instance(60, seed=3)
    p1, p2 = tsp.random_tours(60, 2, seed=4)
    kid = tsp.route_crossover(inst, p1, p2, 0.0, seed=5)
    nb1 = tsp._neighbours(p1)
    visited = {int(kid[0])}
    for cur, nxt in zip(kid[:-1], kid[1:]):
        free = [c for c in nb1[cur] if c not in visited]
        if free:
            assert nxt in free
        visited.add(int(nxt))


def test_route_crossover_valid_tours_fuzz():
    inst = tsp.generate_instance(30, seed=6)
    rng = np.random.default_rng(7)
    pairs = tsp.random_tours(30, 2 * 10_000, seed=8).reshape(10_000, 2, 30)
    for k, (p1, p2) in enumerate(pairs):
        kid = tsp.route_crossover(inst, p1, p2, float(rng.uniform(0, 0.5)), seed=k)
        assert np.array_equal(np.sort(kid), np.arange(30))


def test_pipeline_small():
    inst = tsp.generate_instance(60, seed=10)
    s = tsp.run_tsp_pipeline(inst, M=40, gamma=0.05, pool_size=10, seed=11, normalizer_samples=2000)
    assert s.offspring_mean < s.parent_mean
    assert s.offspring_min <= s.parent_min
    assert s.parent_trajectory.shape == (40,)
    assert np.all(np.diff(s.parent_trajectory) <= 0)
    again = tsp.run_tsp_pipeline(inst, M=40, gamma=0.05, pool_size=10, seed=11, normalizer_samples=2000)
    assert again.offspring_min == s.offspring_min
