"""Set-indexed sums S_n(A) = sum of x_i over items whose mark u_i lies in A."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .increments import GeneratorSpec, SeedSpec, sample_increments
from .metricspace import Correspondence, PointCloud, cloud_to_space, gh_upper_bound
from .spiral import LebesgueCube, MeasureSpec, RectSet, _membership, spiral_net
from .vcfam import LowerLeftRects


class SetsumError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MarkedSample:
    x: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        u = np.asarray(self.u, dtype=float)
        if u.ndim == 1:
            u = u[:, None]
        if x.shape[0] != u.shape[0] or x.shape[0] == 0:
            raise SetsumError(f"{x.shape[0]} vectors but {u.shape[0]} marks")
        if not (np.isfinite(x).all() and np.isfinite(u).all()):
            raise SetsumError("non-finite sample entries")
        if ((u < 0) | (u > 1)).any():
            raise SetsumError("marks must lie in the unit cube")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "u", u)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def p(self) -> int:
        return self.u.shape[1]


def sample_marked(gen: GeneratorSpec, mu: MeasureSpec, n: int, seed: SeedSpec) -> MarkedSample:
    """n independent (X, U) pairs; increments are drawn first, then marks, from one stream."""
    rng = seed.rng()
    x = sample_increments(gen, n, rng)
    u = mu.sample(n, rng)
    return MarkedSample(x, u)


def _check_rect(sample: MarkedSample, A: RectSet):
    if A.dim != sample.p:
        raise SetsumError(f"rectangle of dimension {A.dim} for marks in [0,1]^{sample.p}")


def set_sum(sample: MarkedSample, A: RectSet) -> np.ndarray:
    _check_rect(sample, A)
    return sample.x[A.contains(sample.u)].sum(axis=0)


def si_cross_term(sample: MarkedSample, A: RectSet) -> float:
    """sum over i != j with u_i, u_j in A of <x_i, x_j>."""
    _check_rect(sample, A)
    inside = sample.x[A.contains(sample.u)]
    s = inside.sum(axis=0)
    return float(s @ s - np.einsum("ij,ij->", inside, inside))


def set_sums(sample: MarkedSample, net: Sequence[RectSet]) -> np.ndarray:
    """Rows S_n(A) for each A in ``net``."""
    for A in net:
        _check_rect(sample, A)
    return _membership(net, sample.u).astype(float) @ sample.x


@dataclass
class SIDeviation:
    """Uniform deviation of the normalized set-indexed sum from the measure.

    ``sup_sq`` is sup |n^-1 ||S(A)||^2 - mu(A)| and ``sup_root`` is
    sup |n^-1/2 ||S(A)|| - mu(A)^1/2|. In ``net`` mode both are maxima over
    the supplied sets, hence lower bounds on the family supremum; ``net_width``
    then carries the grid resolution width p/N when the net is a lattice.
    """

    sup_sq: float
    sup_root: float
    mode: str
    net_width: float | None = None


def _cell_grid(coords: np.ndarray) -> tuple:
    """Breakpoints of t -> 1{u <= t} on [0,1] and the right end of each cell."""
    lo = np.unique(np.concatenate([[0.0], coords]))
    hi = np.append(lo[1:], 1.0)
    return lo, hi


def _corner_gaps(v: np.ndarray, lo_vol: np.ndarray, hi_vol: np.ndarray) -> tuple:
    sq = max(np.abs(v - lo_vol).max(), np.abs(v - hi_vol).max())
    rv = np.sqrt(v)
    root = max(np.abs(rv - np.sqrt(lo_vol)).max(), np.abs(rv - np.sqrt(hi_vol)).max())
    return float(sq), float(root)


def _exact_p1(sample: MarkedSample) -> tuple:
    u = sample.u[:, 0]
    lo, hi = _cell_grid(u)
    cell = np.searchsorted(lo, u, side="right") - 1
    binned = np.zeros((lo.size, sample.d))
    np.add.at(binned, cell, sample.x)
    S = np.cumsum(binned, axis=0)
    v = np.einsum("ij,ij->i", S, S) / sample.n
    return _corner_gaps(v, lo, hi)


def _exact_p2(sample: MarkedSample) -> tuple:
    lo1, hi1 = _cell_grid(sample.u[:, 0])
    lo2, hi2 = _cell_grid(sample.u[:, 1])
    c1 = np.searchsorted(lo1, sample.u[:, 0], side="right") - 1
    c2 = np.searchsorted(lo2, sample.u[:, 1], side="right") - 1
    v = np.empty((lo1.size, lo2.size))
    column = np.zeros((lo2.size, sample.d))
    order = np.argsort(c1, kind="stable")
    starts = np.searchsorted(c1[order], np.arange(lo1.size + 1))
    for a in range(lo1.size):
        rows = order[starts[a]:starts[a + 1]]
        np.add.at(column, c2[rows], sample.x[rows])
        S = np.cumsum(column, axis=0)
        v[a] = np.einsum("ij,ij->i", S, S)
    v /= sample.n
    return _corner_gaps(v, np.outer(lo1, lo2), np.outer(hi1, hi2))


def si_deviation_sup(sample: MarkedSample, family, mu: MeasureSpec | None = None) -> SIDeviation:
    """Deviation statistic over a rectangle family.

    ``family`` is either :class:`LowerLeftRects` with p <= 2 and Lebesgue
    marks (exact mode), or an explicit list of :class:`RectSet` (net mode).
    Exact mode enumerates the cells of the grid cut out by the mark
    coordinates: the sum is constant on each cell and the volume is monotone
    there, so the supremum sits at cell corners.
    """
    if mu is None:
        mu = LebesgueCube(sample.p)
    if mu.dim != sample.p:
        raise SetsumError(f"measure on [0,1]^{mu.dim} for marks in [0,1]^{sample.p}")
    if isinstance(family, LowerLeftRects):
        if family.p != sample.p:
            raise SetsumError(f"family dimension {family.p} differs from mark dimension {sample.p}")
        if not isinstance(mu, LebesgueCube):
            raise SetsumError("exact mode assumes Lebesgue marks; pass an explicit net for other measures")
        if family.p == 1:
            sq, root = _exact_p1(sample)
        elif family.p == 2:
            sq, root = _exact_p2(sample)
        else:
            raise SetsumError(f"exact mode supports p <= 2, got p={family.p}; pass an explicit net (net mode)")
        return SIDeviation(sq, root, "exact")

    net = list(family)
    if not net:
        raise SetsumError("net mode needs a nonempty list of rectangles")
    S = set_sums(sample, net)
    v = np.einsum("ij,ij->i", S, S) / sample.n
    meas = np.array([mu.measure(A) for A in net])
    sq = float(np.abs(v - meas).max())
    root = float(np.abs(np.sqrt(v) - np.sqrt(meas)).max())
    return SIDeviation(sq, root, "net", _lattice_width(net))


def _lattice_width(net: Sequence[RectSet]) -> float | None:
    """p/N if the net is the full lattice {k/N}^p, else None."""
    U = np.array([A.upper for A in net])
    p = U.shape[1]
    N = round(len(net) ** (1.0 / p)) - 1
    if N < 1 or (N + 1) ** p != len(net):
        return None
    if not np.allclose(np.sort(np.unique(np.round(U * N, 9))), np.arange(N + 1)):
        return None
    return min(p / N, 1.0)


def si_gh_report(sample: MarkedSample, net: Sequence[RectSet], mu: MeasureSpec) -> float:
    """GH upper bound between {n^-1/2 S_n(A)} and the spiral net, index correspondence."""
    if len(net) == 0:
        raise SetsumError("si_gh_report needs a nonempty net")
    cloud = PointCloud(set_sums(sample, net) / math.sqrt(sample.n))
    cloud_space = cloud_to_space(cloud)
    ref = spiral_net(net, mu)
    return gh_upper_bound(cloud_space, ref, Correspondence.identity(len(net)))
