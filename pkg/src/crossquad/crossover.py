"""Offspring sampling from a weighted mix of past states, and the one-generation pipelines."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import log, sqrt

import numpy as np

from crossquad.cost import PolyCost, evaluate, mean_vector_norm, random_states
from crossquad.landscape import descend, restart_descents
from crossquad.theory import optimal_gamma

POOL_RULES = ("best_plus_rank_2_to_11",)
# candidate rates tried, in order, when run_combined picks gamma itself
GAMMA_GRID = tuple(round(0.05 * k, 2) for k in range(1, 11))


@dataclass(frozen=True)
class WeightDist:
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size < 1:
            raise ValueError("weights must be a non-empty vector")
        if np.any(w < 0.0) or np.any(w > 1.0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must lie in [0, 1] and sum to 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class CrossoverPlan:
    mean: np.ndarray
    parents: np.ndarray
    gamma: float | None = None


@dataclass
class RunSummary:
    parent_mean: float
    parent_std: float
    parent_min: float
    offspring_mean: float
    offspring_std: float
    offspring_min: float
    l_norm: float
    gamma: float
    M: int
    # E_f[L] over the selected parents, for the mean prediction
    weighted_parent_cost: float = float("nan")
    parent_trajectory: np.ndarray | None = field(default=None, repr=False)
    offspring_trajectory: np.ndarray | None = field(default=None, repr=False)

    @property
    def deviation_ratio(self) -> float:
        """``(parent_mean - offspring_min) / (parent_mean - parent_min)``."""
        return (self.parent_mean - self.offspring_min) / (self.parent_mean - self.parent_min)


def offspring_mean(states, f: WeightDist) -> CrossoverPlan:
    """Expected offspring ``sum_m f_m x^(m)``; bit ``i`` is +1 with probability ``(1 + mean_i) / 2``."""
    states = np.asarray(states)
    if states.ndim != 2:
        raise ValueError("states must be a (M, N) array")
    if states.shape[0] != f.weights.size:
        raise ValueError(f"{states.shape[0]} states but {f.weights.size} weights")
    mean = np.clip(f.weights @ states.astype(np.float64), -1.0, 1.0)
    used = np.flatnonzero(f.weights > 0.0)
    return CrossoverPlan(mean=mean, parents=states[used])


def _two_best(costs) -> tuple[int, int]:
    costs = np.asarray(costs, dtype=np.float64)
    if costs.size < 2:
        raise ValueError("need at least two states")
    order = np.argsort(costs, kind="stable")
    return int(order[0]), int(order[1])


def biased_pair_weights(costs, gamma: float) -> WeightDist:
    """Weight ``1 - gamma`` on the best state, ``gamma`` on the runner-up, 0 elsewhere."""
    if not 0.0 <= gamma <= 0.5:
        raise ValueError("gamma must lie in [0, 0.5]")
    best, second = _two_best(costs)
    w = np.zeros(len(costs))
    w[best] = 1.0 - gamma
    w[second] += gamma
    return WeightDist(w)


def pair_plan(best, partner, gamma: float) -> CrossoverPlan:
    best = np.asarray(best)
    partner = np.asarray(partner)
    mean = (1.0 - gamma) * best.astype(np.float64) + gamma * partner.astype(np.float64)
    return CrossoverPlan(mean=mean, parents=np.stack([best, partner]), gamma=gamma)


def sample_offspring(plan: CrossoverPlan, count: int, seed=None) -> np.ndarray:
    """``count`` independent offspring, shape ``(count, N)``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    p_up = (1.0 + plan.mean) / 2.0
    u = rng.random((count, plan.mean.size))
    return np.where(u < p_up, 1, -1).astype(np.int8)


def objective_of_f(cost: PolyCost, states, f: WeightDist, M: int) -> float:
    """Predicted minimum of ``M`` offspring: ``|l| E_f[L] - sqrt(2 ln M (1 - |l|^2))``."""
    if M < 2:
        raise ValueError("M must be >= 2")
    plan = offspring_mean(states, f)
    l_norm = min(mean_vector_norm(cost, plan.mean), 1.0)
    costs = evaluate(cost, np.asarray(states))
    mu_y = l_norm * float(f.weights @ costs)
    var_y = 1.0 - l_norm * l_norm
    return mu_y - sqrt(2.0 * log(M) * var_y)


def pair_norm_fn(cost: PolyCost, best, partner):
    """``gamma -> |l((1 - gamma) best + gamma partner)|``, non-increasing on [0, 0.5]."""
    best = np.asarray(best, dtype=np.float64)
    partner = np.asarray(partner, dtype=np.float64)

    def norm(gamma: float) -> float:
        return mean_vector_norm(cost, (1.0 - gamma) * best + gamma * partner)

    return norm


def _resolve_gamma(cost, best, partner, gamma) -> float:
    if gamma == "auto" or gamma is None:
        return optimal_gamma(pair_norm_fn(cost, best, partner))
    gamma = float(gamma)
    if not 0.0 <= gamma <= 0.5:
        raise ValueError("gamma must lie in [0, 0.5]")
    return gamma


def _stats(values) -> tuple[float, float, float]:
    values = np.asarray(values, dtype=np.float64)
    # a constant sample has spread exactly 0, not rounding residue
    std = 0.0 if np.all(values == values[0]) else float(values.std(ddof=1))
    return float(values.mean()), std, float(values.min())


def sample_parents(cost: PolyCost, M: int, seed=None) -> tuple[np.ndarray, np.ndarray]:
    states = random_states(cost.n_dims, M, seed)
    return states, evaluate(cost, states)


def crossover_from_parents(cost: PolyCost, states, costs, gamma, seed=None) -> RunSummary:
    """Select the two best parents, mix with rate ``gamma`` and score ``M`` offspring."""
    M = len(costs)
    best, second = _two_best(costs)
    g = _resolve_gamma(cost, states[best], states[second], gamma)
    plan = pair_plan(states[best], states[second], g)
    kids = sample_offspring(plan, M, seed)
    kid_costs = evaluate(cost, kids)
    pm, ps, pmin = _stats(costs)
    om, os_, omin = _stats(kid_costs)
    return RunSummary(
        parent_mean=pm, parent_std=ps, parent_min=pmin,
        offspring_mean=om, offspring_std=os_, offspring_min=omin,
        l_norm=mean_vector_norm(cost, plan.mean), gamma=g, M=M,
        weighted_parent_cost=(1.0 - g) * float(costs[best]) + g * float(costs[second]),
    )


def run_selection_crossover(cost: PolyCost, M: int, gamma, seed=None) -> RunSummary:
    """Random parents, biased two-best crossover, ``M`` offspring.

    ``gamma="auto"`` picks the rate that puts ``|l(y)|`` at ``1/sqrt(2)``.
    """
    if M < 2:
        raise ValueError("M must be >= 2")
    ss = np.random.SeedSequence(seed)
    parent_seed, child_seed = ss.spawn(2)
    states, costs = sample_parents(cost, M, parent_seed)
    return crossover_from_parents(cost, states, costs, gamma, child_seed)


def proxy_norm_estimate(parent_std: float, offspring_std: float) -> float:
    """``|l|`` for the proxy cost, read off the offspring spread: ``sigma_Y^2 = 1 - |l|^2``.

    Both spreads are taken relative to the parents', since the proxy cost is
    not unit-variance.
    """
    if parent_std <= 0.0:
        return float("nan")
    ratio = offspring_std / parent_std
    return sqrt(max(0.0, 1.0 - min(ratio * ratio, 1.0)))


def _proxy_gamma(cost: PolyCost, best, partner, parent_std: float, pilot: int,
                 seed: np.random.SeedSequence) -> float:
    """Smallest grid rate whose pilot offspring give an estimated proxy ``|l| <= 1/sqrt(2)``."""
    seeds = seed.spawn(len(GAMMA_GRID))
    for g, ss in zip(GAMMA_GRID, seeds):
        kids = sample_offspring(pair_plan(best, partner, g), pilot, ss)
        _, sd, _ = _stats([descend(cost, k).final_cost for k in kids])
        if proxy_norm_estimate(parent_std, sd) <= sqrt(0.5):
            return g
    return GAMMA_GRID[-1]


def run_combined(cost: PolyCost, M: int, gamma, pool_rule: str = POOL_RULES[0],
                 seed=None, pilot: int = 30) -> RunSummary:
    """Descent from ``M`` random starts, crossover of the best with one of ranks 2-11, descent of ``M`` offspring.

    Statistics are over proxy costs (descent end points). Duplicate end points
    are collapsed before ranking so the partner is a different local minimum.
    ``gamma="auto"`` walks up :data:`GAMMA_GRID`, descending ``pilot`` trial
    offspring per rate, and keeps the first rate whose spread-based ``|l|``
    estimate reaches ``1/sqrt(2)``; the reported offspring are drawn afresh.
    """
    if M < 12:
        raise ValueError("M must be >= 12")
    if pool_rule not in POOL_RULES:
        raise ValueError(f"unknown pool rule {pool_rule!r}")
    auto = gamma == "auto" or gamma is None
    if not auto:
        gamma = float(gamma)
        if not 0.0 <= gamma <= 0.5:
            raise ValueError("gamma must lie in [0, 0.5]")
    ss = np.random.SeedSequence(seed)
    start_seed, pick_seed, child_seed, pilot_seed = ss.spawn(4)
    results = restart_descents(cost, M, start_seed)
    costs = np.array([r.final_cost for r in results])
    finals = np.stack([r.final_state for r in results])
    _, first = np.unique(finals, axis=0, return_index=True)
    distinct = first[np.argsort(costs[first], kind="stable")]
    best = distinct[0]
    ranks = distinct[1:11]
    if ranks.size:
        partner = ranks[np.random.default_rng(pick_seed).integers(ranks.size)]
    else:
        partner = best
    pm, ps, pmin = _stats(costs)
    g = _proxy_gamma(cost, finals[best], finals[partner], ps, pilot, pilot_seed) if auto else gamma
    plan = pair_plan(finals[best], finals[partner], g)
    kids = sample_offspring(plan, M, child_seed)
    kid_costs = np.array([descend(cost, k).final_cost for k in kids])
    om, os_, omin = _stats(kid_costs)
    return RunSummary(
        parent_mean=pm, parent_std=ps, parent_min=pmin,
        offspring_mean=om, offspring_std=os_, offspring_min=omin,
        l_norm=proxy_norm_estimate(ps, os_), gamma=g, M=M,
        weighted_parent_cost=(1.0 - g) * float(costs[best]) + g * float(costs[partner]),
    )


__all__ = [
    "CrossoverPlan",
    "RunSummary",
    "WeightDist",
    "biased_pair_weights",
    "crossover_from_parents",
    "objective_of_f",
    "offspring_mean",
    "pair_norm_fn",
    "pair_plan",
    "run_combined",
    "run_selection_crossover",
    "sample_offspring",
    "sample_parents",
]
