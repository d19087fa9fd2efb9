"""Closed-form predictions: sample minima, local-minimum counts, crossover norms."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from math import comb, log, pi, sqrt
from typing import Callable

import numpy as np

from crossquad.cost import PolyCost, interaction_field, n_coefficients, random_states

INV_SQRT2 = 1.0 / sqrt(2.0)


class Order(str, Enum):
    LEADING = "leading"
    FIRST_ORDER = "first_order"


class NoCrossing(ValueError):
    pass


@dataclass(frozen=True)
class MinOfMPrediction:
    mean: float
    std: float
    order: Order


@dataclass(frozen=True)
class EffectiveDegree:
    k_hat: float
    method: str


def extreme_radius(M: float, order: Order | str = Order.LEADING) -> float:
    """How many standard deviations the minimum of ``M`` Gaussian draws sits below the mean."""
    order = Order(order)
    if M < 2:
        raise ValueError(f"M must be >= 2, got {M}")
    lm = log(M)
    if order is Order.LEADING:
        return sqrt(2.0 * lm)
    radicand = 2.0 * lm - log(4.0 * pi * lm)
    if radicand <= 0.0:
        raise ValueError(f"M={M} too small for the first-order correction")
    return sqrt(radicand)


def predict_min_of_M(mu: float, sigma: float, M: float,
                     order: Order | str = Order.LEADING) -> MinOfMPrediction:
    """Gaussian approximation to the minimum of ``M`` draws from N(mu, sigma^2)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    order = Order(order)
    mean = mu - sigma * extreme_radius(M, order)
    std = sigma * (pi / log(M)) ** 0.25
    return MinOfMPrediction(mean=mean, std=std, order=order)


def predict_global_min(n_dims: int, order: Order | str = Order.LEADING) -> float:
    """Expected global minimum, treating the ``2^N`` states as independent draws."""
    if n_dims < 2:
        raise ValueError("n_dims must be >= 2")
    # ln(2^N) computed directly so large N does not overflow
    lm = n_dims * log(2.0)
    order = Order(order)
    if order is Order.LEADING:
        return -sqrt(2.0 * lm)
    radicand = 2.0 * lm - log(4.0 * pi * lm)
    if radicand <= 0.0:
        raise ValueError(f"N={n_dims} too small for the first-order correction")
    return -sqrt(radicand)


def local_min_base(k_hat: float) -> float:
    if k_hat < 1:
        raise ValueError("k_hat must be >= 1")
    return 2.0 - (1.0 + 2.0 * (k_hat - 1.0) / pi) ** -0.5


def predict_local_min_count(n_dims: int, k_hat: float, with_prefactor: bool = True) -> float:
    """Expected number of single-flip local minima."""
    inv = (1.0 + 2.0 * (k_hat - 1.0) / pi) ** -0.5
    count = local_min_base(k_hat) ** n_dims
    return inv * count if with_prefactor else count


def effective_degree(cost: PolyCost, method: str = "iid_closed_form",
                     samples: int = 10_000, seed=None, pairs: int = 2000) -> EffectiveDegree:
    """Effective degree ``1 + (N - 1) * mean pairwise corr(b_i, b_j)``.

    ``iid_closed_form`` returns the degree ``K`` itself. ``mc_correlation``
    estimates the mean correlation of the interaction field over random
    states, averaged over a random subset of index pairs.
    """
    if method == "iid_closed_form":
        return EffectiveDegree(float(cost.degree), method)
    if method != "mc_correlation":
        raise ValueError(f"unknown method {method!r}")
    if samples < 100:
        raise ValueError("mc_correlation needs at least 100 samples")
    rng = np.random.default_rng(seed)
    n = cost.n_dims
    b = interaction_field(cost, random_states(n, samples, rng))
    b -= b.mean(axis=0)
    b /= b.std(axis=0)
    total = n * (n - 1)
    if total <= pairs:
        ii, jj = np.nonzero(~np.eye(n, dtype=bool))
    else:
        ii = rng.integers(0, n, size=pairs)
        jj = (ii + rng.integers(1, n, size=pairs)) % n
    r_bar = float(np.mean(np.einsum("si,si->i", b[:, ii], b[:, jj]) / samples))
    return EffectiveDegree(max(1.0, 1.0 + (n - 1) * r_bar), method)


def theorem1_bound(M: float, l_norm: float) -> float:
    """Predicted offspring minimum ``-sqrt(2 ln M) * (|l| + sqrt(1 - |l|^2))``."""
    if not 0.0 <= l_norm <= 1.0:
        raise ValueError("l_norm must lie in [0, 1]")
    return -extreme_radius(M) * (l_norm + sqrt(1.0 - l_norm * l_norm))


def large_n_crossover_norm(n_dims: int, degree: int, gamma: float, disagreement: float) -> float:
    """``|l(y)|`` for a two-parent mean with i.i.d. equal-variance coefficients.

    A monomial of degree ``a`` keeps squared weight ``q^a`` in expectation,
    with ``q = (1 - d) + d (1 - 2 gamma)^2`` the per-coordinate factor.
    """
    if not 0.0 <= gamma <= 0.5:
        raise ValueError("gamma must lie in [0, 0.5]")
    if not 0.0 <= disagreement <= 1.0:
        raise ValueError("disagreement must lie in [0, 1]")
    q = (1.0 - disagreement) + disagreement * (1.0 - 2.0 * gamma) ** 2
    total = n_coefficients(n_dims, degree)
    sq = sum(comb(n_dims, a) / total * q ** a for a in range(1, degree + 1))
    return sqrt(sq)


def optimal_gamma(norm_fn: Callable[[float], float], tolerance: float = 1e-6) -> float:
    """Solve ``norm_fn(gamma) = 1/sqrt(2)`` on ``[0, 0.5]`` by bisection.

    ``norm_fn`` must be non-increasing on the interval.
    """
    def excess(g):
        return norm_fn(g) ** 2 - 0.5

    eps = 1e-12
    lo, hi = 0.0, 0.5
    f_lo, f_hi = excess(lo), excess(hi)
    if f_hi > eps:
        raise NoCrossing(
            f"no crossing: |l(0.5)| = {sqrt(f_hi + 0.5):.6f} > 1/sqrt(2); parents too similar"
        )
    if f_lo < -eps:
        raise NoCrossing(f"no crossing: |l(0)| = {sqrt(max(f_lo + 0.5, 0.0)):.6f} < 1/sqrt(2)")
    if abs(f_lo) <= eps and abs(f_hi) <= eps:
        return 0.5 * (lo + hi)
    if abs(f_hi) <= eps:
        return hi
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def boltzmann_weights(costs, beta: float, l_norm: float) -> np.ndarray:
    """Weights ``f_m`` proportional to ``exp(-beta * |l| * L_m)``."""
    costs = np.asarray(costs, dtype=np.float64)
    if costs.size < 1:
        raise ValueError("need at least one cost")
    if not np.all(np.isfinite(costs)):
        raise ValueError("costs must be finite")
    if beta < 0:
        raise ValueError("beta must be non-negative")
    if not 0.0 <= l_norm <= 1.0:
        raise ValueError("l_norm must lie in [0, 1]")
    logits = -beta * l_norm * costs
    logits -= logits.max()
    w = np.exp(logits)
    return w / w.sum()
