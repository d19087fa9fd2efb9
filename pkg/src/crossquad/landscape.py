"""Single-flip descent, local minima, and exhaustive sweeps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from crossquad.cost import (
    PolyCost,
    _monomials,
    as_bits,
    interaction_field,
    random_states,
)

DEFAULT_EXHAUSTIVE_CAP = 24


class StepCapExceeded(RuntimeError):
    pass


class ExhaustiveCapExceeded(ValueError):
    pass


@dataclass(frozen=True)
class DescentResult:
    final_state: np.ndarray
    final_cost: float
    steps: int
    start_cost: float


@dataclass(frozen=True)
class LocalMinEstimate:
    count_estimate: float
    hits: int
    trials: int
    n_dims: int

    @property
    def std_error(self) -> float:
        """Binomial standard error of ``count_estimate``."""
        p = self.hits / self.trials
        return 2.0 ** self.n_dims * np.sqrt(p * (1.0 - p) / self.trials)


def is_local_minimum(cost: PolyCost, x) -> bool:
    """True iff every single flip strictly increases the cost."""
    x = as_bits(x, cost.n_dims)
    return bool(np.all(interaction_field(cost, x) < 0.0))


def _member_lists(cost: PolyCost, alpha: int):
    """Per variable, the flattened member indices of every monomial containing it."""
    key = ("members", alpha)
    if key not in cost._cache:
        inc = cost.incidence(alpha)
        flat = cost.index_table(alpha)[inc.indices].ravel().astype(np.intp)
        cost._cache[key] = (inc.indptr, inc.indices, flat)
    return cost._cache[key]


def descend(cost: PolyCost, x0, step_cap: int | None = None) -> DescentResult:
    """Steepest single-flip descent to a fixed point.

    Each step flips the bit with the largest positive ``b_i`` (the flip that
    lowers the cost most, lowest index on ties) and stops once no flip lowers
    the cost. The field ``b`` and every monomial value are updated in place,
    so a step costs one pass over the monomials containing the flipped bit.
    """
    n = cost.n_dims
    x = as_bits(x0, n).copy()
    if x.ndim != 1:
        raise ValueError("descend takes a single state")
    cap = 64 * n if step_cap is None else step_cap
    XT = x.astype(np.float64)[:, None]
    values = [
        (prods[:, 0] * cost.coeffs[a - 1])
        for a, prods in enumerate(_monomials(n, cost.degree, XT), start=1)
    ]
    b = np.zeros(n)
    for a, v in enumerate(values, start=1):
        b += cost.incidence(a) @ v
    start = float(sum(v.sum() for v in values))
    current = start
    steps = 0
    while True:
        j = int(np.argmax(b))
        if b[j] <= 0.0:
            break
        if steps >= cap:
            raise StepCapExceeded(f"descent exceeded {cap} steps (N={n})")
        current -= 2.0 * b[j]
        for a, v in enumerate(values, start=1):
            indptr, rows_all, flat = _member_lists(cost, a)
            lo, hi = indptr[j], indptr[j + 1]
            rows = rows_all[lo:hi]
            vals = v[rows]
            b -= 2.0 * np.bincount(flat[a * lo: a * hi], weights=np.repeat(vals, a), minlength=n)
            v[rows] = -vals
        x[j] = -x[j]
        steps += 1
    # recompute from scratch so the reported cost carries no drift
    final = float(sum(v.sum() for v in values))
    return DescentResult(final_state=x, final_cost=final, steps=steps, start_cost=start)


def proxy_cost(cost: PolyCost, x) -> float:
    """Cost of the local minimum that descent from ``x`` reaches."""
    return descend(cost, x).final_cost


def restart_search(cost: PolyCost, restarts: int, seed=None) -> tuple[DescentResult, list[float]]:
    """Descend from ``restarts`` random states; return the best run and all final costs."""
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    results = restart_descents(cost, restarts, seed)
    costs = [r.final_cost for r in results]
    return results[int(np.argmin(costs))], costs


def restart_descents(cost: PolyCost, restarts: int, seed=None) -> list[DescentResult]:
    starts = random_states(cost.n_dims, restarts, seed)
    return [descend(cost, s) for s in starts]


# ---------------------------------------------------------------------------
# exhaustive enumeration

def _check_cap(cost: PolyCost, cap: int) -> None:
    if cost.n_dims > cap:
        raise ExhaustiveCapExceeded(f"N={cost.n_dims} exceeds the exhaustive cap {cap}")


def index_to_state(index: int, n_dims: int) -> np.ndarray:
    """State for a table index: bit ``i`` of the index set means ``x_i = -1``."""
    bits = (int(index) >> np.arange(n_dims)) & 1
    return (1 - 2 * bits).astype(np.int8)


def all_state_costs(cost: PolyCost, cap: int = DEFAULT_EXHAUSTIVE_CAP) -> np.ndarray:
    """``L`` at all ``2^N`` states, indexed as in :func:`index_to_state`.

    Uses the fact that the cost is a Walsh expansion: placing each coefficient
    at the bitmask of its monomial and applying a fast Walsh-Hadamard
    transform yields every state's cost in ``O(N 2^N)``.
    """
    _check_cap(cost, cap)
    n = cost.n_dims
    table = np.zeros(1 << n)
    weights = np.int64(1) << np.arange(n, dtype=np.int64)
    for alpha in range(1, cost.degree + 1):
        idx = cost.index_table(alpha).astype(np.int64)
        masks = (weights[idx]).sum(axis=1)
        table[masks] += cost.coeffs[alpha - 1]
    h = 1
    while h < table.size:
        view = table.reshape(-1, 2, h)
        lo = view[:, 0, :].copy()
        hi = view[:, 1, :]
        view[:, 0, :] += hi
        np.subtract(lo, hi, out=view[:, 1, :])
        h *= 2
    return table


def _gray_rank(index: np.ndarray) -> np.ndarray:
    """Position of each table index in the reflected Gray-code sequence."""
    r = np.array(index, dtype=np.int64)
    shift = 1
    while shift < 64:
        r ^= r >> shift
        shift *= 2
    return r


def local_minimum_mask(costs: np.ndarray, n_dims: int) -> np.ndarray:
    """Boolean mask over the full table: every neighbour strictly costlier."""
    mask = np.ones(costs.size, dtype=bool)
    index = np.arange(costs.size)
    for i in range(n_dims):
        mask &= costs < costs[index ^ (1 << i)]
    return mask


def exhaustive_global_min(cost: PolyCost, cap: int = DEFAULT_EXHAUSTIVE_CAP) -> tuple[np.ndarray, float]:
    """Exact minimiser and minimum; ties go to the state met first in Gray-code order."""
    costs = all_state_costs(cost, cap)
    best = costs.min()
    ties = np.flatnonzero(costs == best)
    pick = ties[np.argmin(_gray_rank(ties))]
    return index_to_state(pick, cost.n_dims), float(best)


def exhaustive_local_min_count(cost: PolyCost, cap: int = DEFAULT_EXHAUSTIVE_CAP) -> int:
    costs = all_state_costs(cost, cap)
    return int(local_minimum_mask(costs, cost.n_dims).sum())


def mc_local_min_estimate(cost: PolyCost, trials: int, seed=None) -> LocalMinEstimate:
    """Estimate the local-minimum count as ``2^N * hits / trials`` from random states."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    hits = 0
    step = 1 << 14
    for lo in range(0, trials, step):
        batch = random_states(cost.n_dims, min(step, trials - lo), rng)
        b = interaction_field(cost, batch)
        hits += int(np.all(b < 0.0, axis=1).sum())
    return LocalMinEstimate(
        count_estimate=2.0 ** cost.n_dims * hits / trials,
        hits=hits,
        trials=trials,
        n_dims=cost.n_dims,
    )
