"""K-degree pseudo-Boolean cost functions.

A cost is the multilinear polynomial

    L(x) = sum_i a_i x_i + sum_{i<j} a_ij x_i x_j + ... (up to degree K)

over ``x`` in ``{-1, +1}^N``. Coefficients are stored per degree as dense
arrays in colex order (see :mod:`crossquad.colex`) and rescaled to unit total
squared norm, which makes ``Var[L] = 1`` under uniformly random states.

States are plain numpy arrays. A *bit state* has entries in ``{-1, +1}``; a
*mean state* has entries in ``[-1, 1]`` and stands for the expected value of
a product distribution over bit states. ``evaluate`` accepts both, since the
expectation of a multilinear polynomial under a product distribution is the
polynomial evaluated at the mean.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from math import comb, isqrt
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy import stats

from crossquad import colex

DEFAULT_MAX_COEFFS = 2**31

_MAGIC = b"PBCF"
_VERSION = 1
_HEADER = struct.Struct("<4sIIIq")

# Working-set budget for batched evaluation temporaries.
_CHUNK_BYTES = 64 * 2**20


class CostTooLarge(MemoryError):
    pass


def n_coefficients(n_dims: int, degree: int) -> int:
    return sum(comb(n_dims, a) for a in range(1, degree + 1))


def _check_shape(n_dims: int, degree: int) -> None:
    if n_dims < 1:
        raise ValueError(f"n_dims must be positive, got {n_dims}")
    if not 1 <= degree <= n_dims:
        raise ValueError(f"degree must satisfy 1 <= K <= N, got K={degree}, N={n_dims}")


def _check_size(n_dims: int, degree: int, max_coeffs: int) -> None:
    n = n_coefficients(n_dims, degree)
    if n > max_coeffs:
        raise CostTooLarge(
            f"N={n_dims}, K={degree} needs {n} coefficients "
            f"({8 * n} bytes as float64); cap is {max_coeffs}"
        )


@dataclass(frozen=True, eq=False)
class PolyCost:
    """Coefficient table of a degree-``degree`` cost over ``n_dims`` bits.

    ``coeffs[a - 1]`` holds the degree-``a`` coefficients in colex order of
    their index tuples. Use :func:`generate_cost` or :meth:`from_coeffs`
    rather than calling the constructor directly.
    """

    n_dims: int
    degree: int
    coeffs: tuple[np.ndarray, ...]
    seed: int | None = None
    total_sq_norm: float = field(init=False)
    _cache: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        _check_shape(self.n_dims, self.degree)
        if len(self.coeffs) != self.degree:
            raise ValueError(f"expected {self.degree} coefficient blocks, got {len(self.coeffs)}")
        for a, block in enumerate(self.coeffs, start=1):
            want = comb(self.n_dims, a)
            if block.shape != (want,):
                raise ValueError(f"degree {a} block must have {want} entries, got {block.shape}")
            block.setflags(write=False)
        object.__setattr__(self, "total_sq_norm", float(sum(float(b @ b) for b in self.coeffs)))

    @classmethod
    def from_coeffs(cls, n_dims: int, coeffs, seed: int | None = None,
                    max_coeffs: int = DEFAULT_MAX_COEFFS) -> "PolyCost":
        """Build a cost from per-degree arrays, rescaling to unit norm."""
        degree = len(coeffs)
        _check_shape(n_dims, degree)
        _check_size(n_dims, degree, max_coeffs)
        blocks = [np.array(b, dtype=np.float64).ravel() for b in coeffs]
        sq = sum(float(b @ b) for b in blocks)
        if sq == 0.0:
            raise ValueError("all coefficients are zero")
        scale = 1.0 / np.sqrt(sq)
        for b in blocks:
            b *= scale
        return cls(n_dims, degree, tuple(blocks), seed)

    @classmethod
    def from_terms(cls, n_dims: int, degree: int, terms: dict) -> "PolyCost":
        """Sparse convenience constructor: ``{(i, j, ...): a}`` with 0-based indices."""
        blocks = [np.zeros(comb(n_dims, a)) for a in range(1, degree + 1)]
        for tup, value in terms.items():
            tup = tuple(sorted(tup))
            if not 1 <= len(tup) <= degree or tup[-1] >= n_dims:
                raise ValueError(f"bad monomial {tup} for N={n_dims}, K={degree}")
            blocks[len(tup) - 1][colex.rank(tup)] += value
        return cls.from_coeffs(n_dims, blocks)

    @property
    def n_terms(self) -> int:
        return sum(b.size for b in self.coeffs)

    def index_table(self, alpha: int) -> np.ndarray:
        return colex.index_table(self.n_dims, alpha)

    def incidence(self, alpha: int) -> sp.csr_matrix:
        """Variable-by-monomial 0/1 matrix for degree ``alpha`` (CSR, ``N x C(N, alpha)``).

        Row ``i`` lists the degree-``alpha`` monomials that contain index ``i``.
        """
        key = ("inc", alpha)
        if key not in self._cache:
            idx = self.index_table(alpha)
            n_mono = idx.shape[0]
            rows = idx.ravel().astype(np.int64)
            cols = np.repeat(np.arange(n_mono, dtype=np.int64), alpha)
            mat = sp.csr_matrix(
                (np.ones(rows.size), (rows, cols)), shape=(self.n_dims, n_mono)
            )
            mat.sort_indices()
            self._cache[key] = mat
        return self._cache[key]


# ---------------------------------------------------------------------------
# states

def as_bits(x, n_dims: int | None = None) -> np.ndarray:
    x = np.asarray(x)
    if n_dims is not None and x.shape[-1] != n_dims:
        raise ValueError(f"state has length {x.shape[-1]}, cost has N={n_dims}")
    if not np.all((x == 1) | (x == -1)):
        raise ValueError("bit states must have entries in {-1, +1}")
    return x.astype(np.int8)


def as_means(m, n_dims: int | None = None) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if n_dims is not None and m.shape[-1] != n_dims:
        raise ValueError(f"state has length {m.shape[-1]}, cost has N={n_dims}")
    if np.any(np.abs(m) > 1.0):
        raise ValueError("mean states must have entries in [-1, 1]")
    return m


def random_states(n_dims: int, count: int, seed=None) -> np.ndarray:
    """``count`` uniformly random bit states, shape ``(count, n_dims)``."""
    rng = np.random.default_rng(seed)
    return (2 * rng.integers(0, 2, size=(count, n_dims), dtype=np.int8) - 1).astype(np.int8)


def flip(x, i: int) -> np.ndarray:
    y = np.array(x, copy=True)
    y[..., i] = -y[..., i]
    return y


def _rows(x, n_dims: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != n_dims:
        raise ValueError(f"state has length {x.shape[-1]}, cost has N={n_dims}")
    if not np.all(np.abs(x) <= 1.0):
        raise ValueError("state entries must lie in [-1, 1]")
    if x.ndim == 1:
        return x[None, :], True
    if x.ndim != 2:
        raise ValueError("expected a state or a 2-D batch of states")
    return x, False


def _chunks(total: int, per_row_bytes: int):
    step = max(1, _CHUNK_BYTES // max(per_row_bytes, 1))
    for lo in range(0, total, step):
        yield lo, min(total, lo + step)


# ---------------------------------------------------------------------------
# evaluation

def _poly_eval(coeffs, n_dims: int, XT: np.ndarray, square: bool = False) -> np.ndarray:
    """Evaluate the polynomial on the columns of ``XT`` (shape ``(N, B)``).

    Degree-``a`` terms are summed block by block: the block with largest
    index ``c`` contributes ``x_c * <a_block, prefix products of degree a-1>``,
    so only products up to degree ``K - 1`` are ever materialised.
    ``square=True`` uses squared coefficients (for ``|l(m)|^2`` at ``m**2``).
    """
    B = XT.shape[1]
    out = np.zeros(B)
    prev = np.ones((1, B))
    degree = len(coeffs)
    for alpha in range(1, degree + 1):
        a = coeffs[alpha - 1]
        bnd = colex.block_bounds(n_dims, alpha)
        for c in range(alpha - 1, n_dims):
            lo, hi = int(bnd[c]), int(bnd[c + 1])
            blk = a[lo:hi]
            if square:
                blk = blk * blk
            out += XT[c] * (blk @ prev[: hi - lo])
        if alpha < degree:
            nxt = np.empty((comb(n_dims, alpha), B))
            for c in range(alpha - 1, n_dims):
                lo, hi = int(bnd[c]), int(bnd[c + 1])
                np.multiply(prev[: hi - lo], XT[c], out=nxt[lo:hi])
            prev = nxt
    return out


def _monomials(n_dims: int, degree: int, XT: np.ndarray) -> list[np.ndarray]:
    """Products over every index tuple, per degree, each shaped ``(C(N, a), B)``."""
    out = []
    prev = np.ones((1, XT.shape[1]))
    for alpha in range(1, degree + 1):
        bnd = colex.block_bounds(n_dims, alpha)
        cur = np.empty((comb(n_dims, alpha), XT.shape[1]))
        for c in range(alpha - 1, n_dims):
            lo, hi = int(bnd[c]), int(bnd[c + 1])
            np.multiply(prev[: hi - lo], XT[c], out=cur[lo:hi])
        out.append(cur)
        prev = cur
    return out


def evaluate(cost: PolyCost, x) -> float | np.ndarray:
    """``L(x)`` for one state or a ``(B, N)`` batch.

    Also valid for mean states, where it returns ``E[L(y)]`` for independent
    bits with ``E[y] = x``.
    """
    X, single = _rows(x, cost.n_dims)
    width = comb(cost.n_dims, max(cost.degree - 1, 0)) * 8 * 2
    out = np.empty(X.shape[0])
    for lo, hi in _chunks(X.shape[0], width):
        XT = np.ascontiguousarray(X[lo:hi].T)
        out[lo:hi] = _poly_eval(cost.coeffs, cost.n_dims, XT)
    return float(out[0]) if single else out


def interaction_field(cost: PolyCost, x) -> np.ndarray:
    """``b_i``: sum of the monomials containing ``i``, evaluated at ``x``.

    Flipping bit ``i`` changes the cost by exactly ``-2 * b_i``.
    Accepts a single state (returns ``(N,)``) or a batch (returns ``(B, N)``).
    """
    X, single = _rows(x, cost.n_dims)
    n = cost.n_dims
    width = cost.n_terms * 8
    out = np.empty_like(X)
    for lo, hi in _chunks(X.shape[0], width):
        XT = np.ascontiguousarray(X[lo:hi].T)
        bT = np.zeros((n, hi - lo))
        for alpha, prods in enumerate(_monomials(n, cost.degree, XT), start=1):
            prods *= cost.coeffs[alpha - 1][:, None]
            bT += cost.incidence(alpha) @ prods
        out[lo:hi] = bT.T
    return out[0] if single else out


def flip_delta(cost: PolyCost, x, i: int) -> float:
    """``L(D_i x) - L(x)``, touching only the monomials that contain ``i``."""
    n = cost.n_dims
    if not 0 <= i < n:
        raise IndexError(f"flip index {i} out of range for N={n}")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (n,):
        raise ValueError(f"state has shape {x.shape}, cost has N={n}")
    b_i = 0.0
    for alpha in range(1, cost.degree + 1):
        inc = cost.incidence(alpha)
        rows = inc.indices[inc.indptr[i]: inc.indptr[i + 1]]
        members = cost.index_table(alpha)[rows]
        b_i += float(cost.coeffs[alpha - 1][rows] @ x[members].prod(axis=1))
    return -2.0 * b_i


def mean_vector_norm(cost: PolyCost, m) -> float:
    """``|l(m)| = sqrt(sum over monomials of a^2 * prod m_j^2)``; in ``[0, 1]``."""
    m = as_means(m, cost.n_dims)
    if m.ndim != 1:
        raise ValueError("expected a single mean state")
    sq = _poly_eval(cost.coeffs, cost.n_dims, (m * m)[:, None], square=True)[0]
    return float(np.sqrt(max(sq, 0.0)))


# ---------------------------------------------------------------------------
# generation

def generate_cost(n_dims: int, degree: int, seed=None,
                  max_coeffs: int = DEFAULT_MAX_COEFFS) -> PolyCost:
    """I.i.d. standard-normal coefficients, globally rescaled to unit norm."""
    _check_shape(n_dims, degree)
    _check_size(n_dims, degree, max_coeffs)
    rng = np.random.default_rng(seed)
    blocks = []
    sq = 0.0
    for alpha in range(1, degree + 1):
        b = rng.standard_normal(comb(n_dims, alpha))
        sq += float(b @ b)
        blocks.append(b)
    scale = 1.0 / np.sqrt(sq)
    for b in blocks:
        b *= scale
    seed_tag = seed if isinstance(seed, (int, np.integer)) else None
    return PolyCost(n_dims, degree, tuple(blocks), seed_tag)


# ---------------------------------------------------------------------------
# statistics

@dataclass(frozen=True)
class CostMoments:
    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float
    sample_count: int


def cost_moments(cost: PolyCost, samples: int, seed=None) -> CostMoments:
    """Empirical moments of ``L`` over uniformly random bit states."""
    if samples < 2:
        raise ValueError("need at least 2 samples")
    rng = np.random.default_rng(seed)
    values = np.empty(samples)
    step = 4096
    for lo in range(0, samples, step):
        hi = min(samples, lo + step)
        values[lo:hi] = evaluate(cost, random_states(cost.n_dims, hi - lo, rng))
    return CostMoments(
        mean=float(values.mean()),
        variance=float(values.var(ddof=1)),
        skewness=float(stats.skew(values)),
        excess_kurtosis=float(stats.kurtosis(values)),
        sample_count=samples,
    )


def component_deviation(cost: PolyCost, omega, m) -> np.ndarray:
    """``l(omega) - l(m)`` as one flat vector over all monomials (degree-major, colex)."""
    omega = np.asarray(omega, dtype=np.float64)
    m = as_means(m, cost.n_dims)
    XT = np.stack([omega, m], axis=1)
    parts = []
    for alpha, prods in enumerate(_monomials(cost.n_dims, cost.degree, XT), start=1):
        parts.append(cost.coeffs[alpha - 1] * (prods[:, 0] - prods[:, 1]))
    return np.concatenate(parts)


def isotropy_diagnostic(cost: PolyCost, m, subset_trials: int, seed=None) -> tuple[float, float]:
    """Largest single and pairwise deviation sums over random index subsets.

    Each trial draws ``omega`` from the product distribution with mean ``m``,
    then sums ``l(omega) - l(m)`` over a random subset of about ``N^(K-1)``
    monomials, and sums products of deviations over all ordered pairs inside a
    random subset holding about ``N^(2K-1)`` pairs. Subset sizes are capped at
    what exists. Small maxima indicate isotropic coefficients; this reports the
    raw numbers and does not apply a threshold.
    """
    if subset_trials < 1:
        raise ValueError("subset_trials must be >= 1")
    m = as_means(m, cost.n_dims)
    rng = np.random.default_rng(seed)
    n, N, K = cost.n_terms, cost.n_dims, cost.degree
    s1 = min(N ** (K - 1), n)
    s2 = min(N ** (2 * K - 1), n * (n - 1))
    # smallest k with k(k-1) >= s2
    k2 = (1 + isqrt(1 + 4 * s2)) // 2
    while k2 * (k2 - 1) < s2:
        k2 += 1
    k2 = min(k2, n)
    p_up = (1.0 + m) / 2.0
    sum1 = sum2 = 0.0
    for _ in range(subset_trials):
        omega = np.where(rng.random(N) < p_up, 1.0, -1.0)
        dl = component_deviation(cost, omega, m)
        c1 = rng.choice(n, size=s1, replace=False)
        sum1 = max(sum1, abs(float(dl[c1].sum())))
        sub = dl[rng.choice(n, size=k2, replace=False)]
        tot = float(sub.sum())
        sum2 = max(sum2, abs(tot * tot - float(sub @ sub)))
    return sum1, sum2


# ---------------------------------------------------------------------------
# binary dump/load

def dumps(cost: PolyCost) -> bytes:
    buf = io.BytesIO()
    seed = -1 if cost.seed is None else int(cost.seed)
    buf.write(_HEADER.pack(_MAGIC, _VERSION, cost.n_dims, cost.degree, seed))
    for block in cost.coeffs:
        buf.write(block.astype("<f8").tobytes())
    return buf.getvalue()


def loads(data: bytes) -> PolyCost:
    if len(data) < _HEADER.size:
        raise ValueError("truncated cost file")
    magic, version, n_dims, degree, seed = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise ValueError("not a cost file (bad magic)")
    if version != _VERSION:
        raise ValueError(f"unsupported cost file version {version}")
    _check_shape(n_dims, degree)
    offset = _HEADER.size
    blocks = []
    for alpha in range(1, degree + 1):
        count = comb(n_dims, alpha)
        end = offset + 8 * count
        if end > len(data):
            raise ValueError("truncated cost file")
        blocks.append(np.frombuffer(data, dtype="<f8", count=count, offset=offset).astype(np.float64))
        offset = end
    return PolyCost(n_dims, degree, tuple(blocks), None if seed < 0 else seed)


def dump(cost: PolyCost, path) -> None:
    Path(path).write_bytes(dumps(cost))


def load(path) -> PolyCost:
    return loads(Path(path).read_bytes())


__all__ = [
    "CostMoments",
    "CostTooLarge",
    "PolyCost",
    "as_bits",
    "as_means",
    "component_deviation",
    "cost_moments",
    "dump",
    "dumps",
    "evaluate",
    "flip",
    "flip_delta",
    "generate_cost",
    "interaction_field",
    "isotropy_diagnostic",
    "load",
    "loads",
    "mean_vector_norm",
    "n_coefficients",
    "random_states",
]
