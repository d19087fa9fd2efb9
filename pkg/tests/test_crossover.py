from math import log, sqrt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crossquad import cost as cm
from crossquad import crossover as cx
from crossquad import theory as th


def test_weightdist_validation():
    with pytest.raises(ValueError):
        cx.WeightDist([0.5, 0.6])
    with pytest.raises(ValueError):
        cx.WeightDist([-0.1, 1.1])
    with pytest.raises(ValueError):
        cx.WeightDist([])


def test_one_hot_mean_is_state():
    X = cm.random_states(10, 4, seed=0)
    plan = cx.offspring_mean(X, cx.WeightDist([0, 0, 1, 0]))
    assert np.array_equal(plan.mean, X[2])


def test_two_parent_mean():
    X = cm.random_states(30, 2, seed=1)
    g = 0.2
    plan = cx.offspring_mean(X, cx.WeightDist([1 - g, g]))
    agree = X[0] == X[1]
    np.testing.assert_allclose(plan.mean[agree], X[0][agree])
    np.testing.assert_allclose(plan.mean[~agree], (1 - 2 * g) * X[0][~agree])


def test_uniform_mean_shrinks():
    M = 400
    worst = []
    for seed in range(100):
        X = cm.random_states(20, M, seed=seed)
        worst.append(np.abs(cx.offspring_mean(X, cx.WeightDist(np.full(M, 1 / M))).mean).max())
    # max of 20 coordinates of a N(0, 1/M) variable stays within a few sigma
    assert np.mean(worst) < 4 / sqrt(M)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=2, max_size=12), st.integers(0, 2**32 - 1))
def test_mean_stays_in_cube(raw, seed):
    w = np.array(raw) + 1e-3
    f = cx.WeightDist(w / w.sum())
    X = cm.random_states(7, len(raw), seed=seed)
    m = cx.offspring_mean(X, f).mean
    assert np.all(np.abs(m) <= 1.0)


def test_biased_pair_weights():
    np.testing.assert_allclose(cx.biased_pair_weights([3, 1, 2], 0.1).weights, [0, 0.9, 0.1])
    np.testing.assert_allclose(cx.biased_pair_weights([3, 1, 2], 0.5).weights, [0, 0.5, 0.5])
    np.testing.assert_allclose(cx.biased_pair_weights([1, 1, 1, 1], 0.3).weights, [0.7, 0.3, 0, 0])
    with pytest.raises(ValueError):
        cx.biased_pair_weights([1, 2], 0.6)


@given(st.lists(st.floats(-100, 100), min_size=2, max_size=20), st.floats(0, 0.5))
def test_biased_pair_weights_simplex(costs, g):
    w = cx.biased_pair_weights(costs, g).weights
    assert w.sum() == pytest.approx(1.0) and np.all(w >= 0)
    assert np.count_nonzero(w) <= 2


def test_degenerate_sampling():
    x = cm.random_states(12, 1, seed=0)[0]
    kids = cx.sample_offspring(cx.CrossoverPlan(mean=x.astype(float), parents=x[None]), 50, seed=1)
    assert np.all(kids == x)


def test_bernoulli_frequency_at_disagreements():
    p1, p2 = cm.random_states(200, 2, seed=3)
    g, count = 0.15, 5000
    kids = cx.sample_offspring(cx.pair_plan(p1, p2, g), count, seed=4)
    dis = p1 != p2
    freq = (kids[:, dis] == p1[dis]).mean(axis=0)
    band = 3 * sqrt(g * (1 - g) / count)
    assert np.mean(np.abs(freq - (1 - g)) <= band) > 0.98
    assert np.all(kids[:, ~dis] == p1[~dis])


def test_empirical_mean_matches_plan():
    p1, p2 = cm.random_states(64, 2, seed=5)
    plan = cx.pair_plan(p1, p2, 0.3)
    kids = cx.sample_offspring(plan, 10_000, seed=6)
    assert np.all(np.abs(kids.mean(axis=0) - plan.mean) < 4 / sqrt(10_000))


def test_objective_one_hot():
    c = cm.generate_cost(16, 3, seed=0)
    X = cm.random_states(16, 5, seed=1)
    L = cm.evaluate(c, X)
    f = cx.WeightDist(np.eye(5)[int(np.argmin(L))])
    assert cx.objective_of_f(c, X, f, 100) == pytest.approx(L.min())


def test_objective_formula():
    c = cm.generate_cost(24, 3, seed=2)
    X = cm.random_states(24, 6, seed=3)
    f = cx.biased_pair_weights(cm.evaluate(c, X), 0.2)
    l = cm.mean_vector_norm(c, cx.offspring_mean(X, f).mean)
    want = l * float(f.weights @ cm.evaluate(c, X)) - sqrt(2 * log(300) * (1 - l * l))
    assert cx.objective_of_f(c, X, f, 300) == pytest.approx(want)
    # at |l| = 1/sqrt(2) with parents at -sqrt(2 ln M) the form reduces to -2 sqrt(ln M)
    M = 300
    l = 1 / sqrt(2)
    assert l * -sqrt(2 * log(M)) - sqrt(2 * log(M) * (1 - l * l)) == pytest.approx(-2 * sqrt(log(M)))


def test_pair_norm_fn_monotone():
    c = cm.generate_cost(40, 3, seed=0)
    p1, p2 = cm.random_states(40, 2, seed=1)
    fn = cx.pair_norm_fn(c, p1, p2)
    vals = [fn(g) for g in np.linspace(0, 0.5, 21)]
    assert vals[0] == pytest.approx(1.0)
    assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))


def test_selection_crossover_parent_stats():
    c = cm.generate_cost(48, 3, seed=4)
    M = 3000
    s = cx.run_selection_crossover(c, M, "auto", seed=5)
    assert abs(s.parent_mean) < 3 / sqrt(M) * 1.5
    assert s.parent_std == pytest.approx(1.0, abs=0.06)
    assert s.parent_min == pytest.approx(th.predict_min_of_M(0, 1, M, "first_order").mean, rel=0.2)
    assert s.l_norm == pytest.approx(1 / sqrt(2), abs=1e-5)
    assert 0 < s.gamma < 0.5


def test_unbiased_crossover_is_worse():
    better = 0
    for seed in range(6):
        c = cm.generate_cost(48, 4, seed=seed)
        opt = cx.run_selection_crossover(c, 2000, "auto", seed=seed)
        half = cx.run_selection_crossover(c, 2000, 0.5, seed=seed)
        better += opt.offspring_min < half.offspring_min
    assert better >= 5


def test_selection_crossover_deterministic():
    c = cm.generate_cost(20, 3, seed=0)
    a = cx.run_selection_crossover(c, 200, 0.1, seed=9)
    b = cx.run_selection_crossover(c, 200, 0.1, seed=9)
    assert a == b


def test_combined_gamma_zero():
    c = cm.generate_cost(32, 3, seed=1)
    s = cx.run_combined(c, 30, 0.0, seed=2)
    assert s.offspring_min == s.parent_min
    assert s.offspring_std == 0.0


def test_combined_keeps_diversity():
    c = cm.generate_cost(32, 3, seed=3)
    s = cx.run_combined(c, 30, "auto", seed=4)
    assert s.gamma in cx.GAMMA_GRID
    assert s.offspring_std > 0
    with pytest.raises(ValueError):
        cx.run_combined(c, 30, 0.1, pool_rule="other")


def test_constant_sample_has_zero_spread():
    # numpy's std of identical values leaves rounding residue for this value
    vals = [-7.908028952285039] * 100
    assert float(np.std(vals, ddof=1)) > 0.0
    assert cx._stats(vals)[1] == 0.0


def test_proxy_norm_estimate():
    assert cx.proxy_norm_estimate(1.0, 1.0) == 0.0
    assert cx.proxy_norm_estimate(2.0, sqrt(2.0)) == pytest.approx(1 / sqrt(2))
    assert cx.proxy_norm_estimate(1.0, 0.0) == 1.0
