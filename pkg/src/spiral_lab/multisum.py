"""Multi-index random walks on the lattice {0..n}^m with values in R^d.

Increments and partial sums are stored as arrays of shape ``(n+1,)*m + (d,)``.
The walk includes its origin term: the partial sum at index 0 is X(0), not 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .increments import GeneratorSpec, SeedSpec, sample_increments
from .metricspace import Correspondence, PointCloud, cloud_to_space, gh_upper_bound
from .spiral import LebesgueCube, lattice_net, spiral_net

# E Q(n1)^2 counts every unordered pair {i, j} twice, once per ordering, so
# the constant in front of ((n+1)^{2m} - (n+1)^m) * sum_a (E X_a^2)^2 is 2.
# tests/test_multisum.py re-derives it by exhaustive enumeration.
Q_PAIR_MULTIPLICITY = 2


class MultisumError(ValueError):
    pass


def _check_lattice(data: np.ndarray, m: int) -> tuple:
    if data.ndim != m + 1:
        raise MultisumError(f"expected an array with {m} index axes plus one vector axis, got shape {data.shape}")
    sides = set(data.shape[:m])
    if len(sides) != 1:
        raise MultisumError(f"index axes must all have length n+1, got {data.shape[:m]}")
    if not np.isfinite(data).all():
        raise MultisumError("non-finite entries")
    return data.shape[0] - 1, data.shape[-1]


@dataclass(frozen=True, eq=False)
class IncrementTensor:
    data: np.ndarray
    m: int

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        _check_lattice(data, self.m)
        object.__setattr__(self, "data", data)

    @property
    def n(self) -> int:
        return self.data.shape[0] - 1

    @property
    def d(self) -> int:
        return self.data.shape[-1]

    @classmethod
    def sample(cls, gen: GeneratorSpec, m: int, n: int, seed: SeedSpec) -> "IncrementTensor":
        count = (n + 1) ** m
        flat = sample_increments(gen, count, seed.rng())
        return cls(flat.reshape((n + 1,) * m + (gen.dim,)), m)


@dataclass(frozen=True, eq=False)
class PrefixTensor:
    data: np.ndarray
    m: int

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        _check_lattice(data, self.m)
        object.__setattr__(self, "data", data)

    @property
    def n(self) -> int:
        return self.data.shape[0] - 1

    @property
    def d(self) -> int:
        return self.data.shape[-1]

    def sq_norms(self) -> np.ndarray:
        return np.einsum("...i,...i->...", self.data, self.data)


def _check_index(k, m: int, n: int) -> tuple:
    k = tuple(int(v) for v in np.atleast_1d(k))
    if len(k) != m or any(not (0 <= v <= n) for v in k):
        raise MultisumError(f"multi-index {k} outside {{0..{n}}}^{m}")
    return k


def prefix_sums(inc: IncrementTensor) -> PrefixTensor:
    """S_k = sum of X(i) over 0 <= i <= k componentwise.

    One cumulative pass per index axis; after all m passes each cell holds the
    full rectangle sum, the same result the inclusion-exclusion recurrence
    gives, in O(m (n+1)^m d).
    """
    out = inc.data
    for axis in range(inc.m):
        out = np.cumsum(out, axis=axis)
    if not np.isfinite(out).all():
        raise MultisumError("prefix sums overflowed")
    return PrefixTensor(out, inc.m)


def ms_cloud(pref: PrefixTensor) -> PointCloud:
    """All partial sums, scaled by n^(-m/2), in row-major index order."""
    if pref.n < 1:
        raise MultisumError("normalization needs n >= 1")
    scale = pref.n ** (-pref.m / 2.0)
    return PointCloud(pref.data.reshape(-1, pref.d) * scale)


def _corner_products(m: int, n: int, shift: int) -> np.ndarray:
    """Product of coordinates of min(k + shift, n) / n over the lattice."""
    ticks = np.minimum(np.arange(n + 1) + shift, n) / n
    out = ticks
    for _ in range(m - 1):
        out = np.multiply.outer(out, ticks)
    return out


def deviation_sup_exact(pref: PrefixTensor) -> float:
    """sup over u in [0,1]^m of | n^-m ||S_floor(nu)||^2 - u_1 ... u_m |, exactly.

    On the cell where floor(n u) = k the walk value is constant and the volume
    term is coordinatewise increasing and continuous, so the supremum over the
    cell is reached at (or approached towards) its lowest or highest corner.
    Cells with k_i = n collapse to the face u_i = 1.
    """
    m, n = pref.m, pref.n
    if n < 1:
        raise MultisumError("deviation statistic needs n >= 1")
    v = pref.sq_norms() / n**m
    lower = np.abs(v - _corner_products(m, n, 0))
    upper = np.abs(v - _corner_products(m, n, 1))
    return float(max(lower.max(), upper.max()))


def q_field(pref: PrefixTensor, inc: IncrementTensor) -> np.ndarray:
    """Q(k) for every k, via Q(k) = ||S_k||^2 - sum_{i<=k} ||X(i)||^2."""
    diag = np.einsum("...i,...i->...", inc.data, inc.data)
    for axis in range(inc.m):
        diag = np.cumsum(diag, axis=axis)
    return pref.sq_norms() - diag


def q_stat(pref: PrefixTensor, inc: IncrementTensor, k) -> float:
    """Cross term Q(k) = sum over i != j <= k of <X(i), X(j)>."""
    k = _check_index(k, inc.m, inc.n)
    box = inc.data[tuple(slice(0, v + 1) for v in k)].reshape(-1, inc.d)
    s = pref.data[k]
    return float(s @ s - np.einsum("ij,ij->", box, box))


def q_second_moment_closed_form(n: int, m: int, sigma4_sum: float) -> float:
    """E Q(n1)^2 for independent centred increments with uncorrelated coordinates.

    ``sigma4_sum`` is sum_a (E X_a^2)^2, e.g. 1/d for isotropic laws.
    """
    if n < 0 or m < 1:
        raise MultisumError("need n >= 0 and m >= 1")
    cells = (n + 1) ** m
    return Q_PAIR_MULTIPLICITY * (cells * cells - cells) * sigma4_sum


def ms_gh_report(pref: PrefixTensor) -> float:
    """GH upper bound between the normalized range and the lattice spiral net.

    Uses the index correspondence k <-> rect(k / n).
    """
    cloud_space = cloud_to_space(ms_cloud(pref))
    net_space = spiral_net(lattice_net(pref.m, pref.n), LebesgueCube(pref.m))
    return gh_upper_bound(cloud_space, net_space, Correspondence.identity(cloud_space.size))


@dataclass
class MSReplicate:
    dev_sup: float
    q_normalized: float
    gh_bound: float | None


def run_ms_replicate(gen: GeneratorSpec, m: int, n: int, seed: SeedSpec, with_gh: bool = True) -> MSReplicate:
    """Sample one walk and compute its deviation, normalized Q(n1)/n^m and GH bound."""
    inc = IncrementTensor.sample(gen, m, n, seed)
    pref = prefix_sums(inc)
    q = q_stat(pref, inc, (n,) * m) / n**m
    gh = ms_gh_report(pref) if with_gh else None
    return MSReplicate(deviation_sup_exact(pref), q, gh)


def default_n(d: int, m: int) -> int:
    return d if m == 1 else math.ceil(math.sqrt(d))
