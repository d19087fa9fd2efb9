"""Euclidean TSP: instances, 2-opt descent, biased route crossover, and the crossover pipeline."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from crossquad.crossover import RunSummary, proxy_norm_estimate


class DegenerateInstance(ValueError):
    pass


@dataclass(frozen=True)
class TspInstance:
    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=np.float64)
        if c.ndim != 2 or c.shape[1] != 2:
            raise ValueError("coords must have shape (n, 2)")
        if c.shape[0] < 4:
            raise ValueError("need at least 4 cities")
        if not np.all(np.isfinite(c)):
            raise ValueError("coordinates must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def n_cities(self) -> int:
        return self.coords.shape[0]


@dataclass(frozen=True)
class CostNormalizer:
    mu: float
    sigma: float
    sample_count: int

    def __call__(self, length):
        return (np.asarray(length) - self.mu) / self.sigma


def generate_instance(n_cities: int, seed=None) -> TspInstance:
    if n_cities < 4:
        raise ValueError("need at least 4 cities")
    rng = np.random.default_rng(seed)
    return TspInstance(rng.random((n_cities, 2)))


def read_instance(path) -> TspInstance:
    """One ``x y`` pair per line; blank lines and ``#`` comments are skipped."""
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'x y', got {line!r}")
        rows.append((float(parts[0]), float(parts[1])))
    return TspInstance(np.array(rows))


def write_instance(inst: TspInstance, path, comment: str | None = None) -> None:
    lines = [f"# {comment}"] if comment else []
    lines += [f"{x:.17g} {y:.17g}" for x, y in inst.coords]
    Path(path).write_text("\n".join(lines) + "\n")


def check_tour(inst: TspInstance, order) -> np.ndarray:
    order = np.asarray(order)
    if order.shape != (inst.n_cities,) or not np.array_equal(np.sort(order), np.arange(inst.n_cities)):
        raise ValueError("tour must be a permutation of the cities")
    return order.astype(np.intp)


def tour_length(inst: TspInstance, order) -> float:
    order = check_tour(inst, order)
    pts = inst.coords[order]
    return float(np.linalg.norm(pts - np.roll(pts, -1, axis=0), axis=1).sum())


def _lengths(inst: TspInstance, orders: np.ndarray) -> np.ndarray:
    pts = inst.coords[orders]
    return np.linalg.norm(pts - np.roll(pts, -1, axis=1), axis=2).sum(axis=1)


def random_tours(n_cities: int, count: int, seed=None) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.permuted(np.tile(np.arange(n_cities), (count, 1)), axis=1)


def fit_normalizer(inst: TspInstance, samples: int = 10_000, seed=None) -> CostNormalizer:
    """Mean and spread of tour length over uniformly random tours."""
    if samples < 100:
        raise ValueError("samples must be >= 100")
    rng = np.random.default_rng(seed)
    lengths = np.concatenate([
        _lengths(inst, random_tours(inst.n_cities, min(2000, samples - lo), rng))
        for lo in range(0, samples, 2000)
    ])
    sigma = float(lengths.std(ddof=1))
    if not sigma > 1e-12 * max(1.0, abs(float(lengths.mean()))):
        raise DegenerateInstance("tour lengths have zero spread (coincident cities?)")
    return CostNormalizer(mu=float(lengths.mean()), sigma=sigma, sample_count=samples)


def _distance_matrix(inst: TspInstance) -> np.ndarray:
    diff = inst.coords[:, None, :] - inst.coords[None, :, :]
    return np.sqrt((diff * diff).sum(axis=2))


def two_opt_descend(inst: TspInstance, t0, dist: np.ndarray | None = None) -> tuple[np.ndarray, float, int]:
    """First-improvement 2-opt.

    Edge pairs ``(i, j)`` are scanned lexicographically; the first strictly
    improving exchange reverses ``tour[i+1..j]`` and the scan resumes at the
    same ``i``. Stops after a full pass without improvement.
    """
    tour = check_tour(inst, t0).copy()
    n = tour.size
    d = _distance_matrix(inst) if dist is None else dist
    steps = 0
    improved = True
    while improved:
        improved = False
        i = 0
        while i < n - 2:
            a, b = tour[i], tour[i + 1]
            # j ranges over i+2..n-1; the pair (0, n-1) shares a city
            j_hi = n - 1 if i == 0 else n
            c = tour[i + 2: j_hi]
            e = tour[(np.arange(i + 2, j_hi) + 1) % n]
            delta = d[a, c] + d[b, e] - d[a, b] - d[c, e]
            hit = np.flatnonzero(delta < -1e-12)
            if hit.size:
                j = i + 2 + int(hit[0])
                tour[i + 1: j + 1] = tour[i + 1: j + 1][::-1].copy()
                steps += 1
                improved = True
                continue
            i += 1
    return tour, tour_length(inst, tour), steps


def _neighbours(order: np.ndarray) -> np.ndarray:
    """``nb[c] = (prev, next)`` of city ``c`` in the tour."""
    nb = np.empty((order.size, 2), dtype=np.intp)
    nb[order, 0] = np.roll(order, 1)
    nb[order, 1] = np.roll(order, -1)
    return nb


def route_crossover(inst: TspInstance, p1, p2, gamma: float, seed=None) -> np.ndarray:
    """Edge-biased offspring tour.

    Starting at city 0, the next edge comes from parent 1 with probability
    ``1 - gamma`` and from parent 2 otherwise. The chosen parent's unvisited
    tour neighbours are candidates (one picked at random if both are free);
    if it has none the other parent is tried, and failing that the nearest
    unvisited city is taken.
    """
    if not 0.0 <= gamma <= 0.5:
        raise ValueError("gamma must lie in [0, 0.5]")
    p1 = check_tour(inst, p1)
    p2 = check_tour(inst, p2)
    rng = np.random.default_rng(seed)
    n = inst.n_cities
    nbs = (_neighbours(p1), _neighbours(p2))
    visited = np.zeros(n, dtype=bool)
    out = np.empty(n, dtype=np.intp)
    cur = 0
    visited[0] = True
    out[0] = 0
    coords = inst.coords
    choices = rng.random(n)
    picks = rng.random(n)
    for step in range(1, n):
        first = 0 if choices[step] >= gamma else 1
        nxt = -1
        for which in (first, 1 - first):
            cand = [c for c in nbs[which][cur] if not visited[c]]
            if len(cand) == 2 and cand[0] != cand[1]:
                nxt = cand[0] if picks[step] < 0.5 else cand[1]
                break
            if cand:
                nxt = cand[0]
                break
        if nxt < 0:
            free = np.flatnonzero(~visited)
            gap = coords[free] - coords[cur]
            nxt = int(free[np.argmin((gap * gap).sum(axis=1))])
        visited[nxt] = True
        out[step] = nxt
        cur = nxt
    return out


def running_min(values) -> np.ndarray:
    return np.minimum.accumulate(np.asarray(values, dtype=np.float64))


def run_tsp_pipeline(inst: TspInstance, M: int = 500, gamma: float = 0.05, pool_size: int = 10,
                     seed=None, normalizer: CostNormalizer | None = None,
                     normalizer_samples: int = 10_000) -> RunSummary:
    """2-opt from ``M`` random tours, then ``M`` 2-opt'd crossovers of pairs from the best ``pool_size``.

    Costs are normalised tour lengths. Each offspring uses a fresh uniformly
    chosen pair from the pool, with the shorter of the two as parent 1.
    """
    if not M >= pool_size >= 2:
        raise ValueError("need M >= pool_size >= 2")
    ss = np.random.SeedSequence(seed)
    norm_seed, start_seed, pair_seed, child_seed = ss.spawn(4)
    if normalizer is None:
        normalizer = fit_normalizer(inst, normalizer_samples, norm_seed)
    d = _distance_matrix(inst)
    parents = []
    parent_len = np.empty(M)
    for m, t0 in enumerate(random_tours(inst.n_cities, M, start_seed)):
        tour, length, _ = two_opt_descend(inst, t0, d)
        parents.append(tour)
        parent_len[m] = length
    pool = np.argsort(parent_len, kind="stable")[:pool_size]
    pair_rng = np.random.default_rng(pair_seed)
    child_seeds = child_seed.spawn(M)
    kid_len = np.empty(M)
    for m in range(M):
        a, b = pair_rng.choice(pool, size=2, replace=False)
        if parent_len[b] < parent_len[a]:
            a, b = b, a
        kid = route_crossover(inst, parents[a], parents[b], gamma, child_seeds[m])
        _, kid_len[m], _ = two_opt_descend(inst, kid, d)
    px = normalizer(parent_len)
    py = normalizer(kid_len)
    return RunSummary(
        parent_mean=float(px.mean()), parent_std=float(px.std(ddof=1)), parent_min=float(px.min()),
        offspring_mean=float(py.mean()), offspring_std=float(py.std(ddof=1)), offspring_min=float(py.min()),
        l_norm=proxy_norm_estimate(float(px.std(ddof=1)), float(py.std(ddof=1))),
        gamma=gamma, M=M,
        weighted_parent_cost=float(np.mean(px[pool])),
        parent_trajectory=running_min(px),
        offspring_trajectory=running_min(py),
    )
