"""Wiener spiral metrics and discretized spiral nets.

A governing measure ``mu`` on ``[0,1]^p`` turns a family of sets into a metric
space via ``rho_mu(A, B) = mu(A symdiff B) ** 0.5``. Sets are lower-left
rectangles ``[0, t_1] x ... x [0, t_p]``, closed, so a point ``x`` lies in
``rect(t)`` iff ``0 <= x_i <= t_i`` for every coordinate.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .metricspace import FiniteMetricSpace

WEIGHT_SUM_TOL = 1e-12


class SpiralError(ValueError):
    pass


@dataclass(frozen=True)
class RectSet:
    upper: tuple

    def __post_init__(self):
        upper = tuple(float(t) for t in np.atleast_1d(self.upper))
        if not upper:
            raise SpiralError("rectangle needs at least one coordinate")
        if any(not (0.0 <= t <= 1.0) for t in upper):
            raise SpiralError(f"rectangle corner {upper} outside [0,1]^p")
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return len(self.upper)

    @property
    def volume(self) -> float:
        return math.prod(self.upper)

    def contains(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        return np.all((pts >= 0.0) & (pts <= np.asarray(self.upper)), axis=1)


def rect(*t) -> RectSet:
    if len(t) == 1:
        return RectSet(t[0])
    return RectSet(t)


def _membership(family: Sequence[RectSet], points: np.ndarray) -> np.ndarray:
    uppers = np.array([A.upper for A in family])
    pts = np.asarray(points, dtype=float)
    return np.all((pts[None, :, :] >= 0.0) & (pts[None, :, :] <= uppers[:, None, :]), axis=2)


@dataclass(frozen=True)
class LebesgueCube:
    p: int

    def __post_init__(self):
        if self.p < 1:
            raise SpiralError("LebesgueCube dimension must be >= 1")

    @property
    def dim(self) -> int:
        return self.p

    def measure(self, A: RectSet) -> float:
        return A.volume

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.random((n, self.p))


@dataclass(frozen=True)
class Discrete:
    points: tuple
    weights: tuple

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        if pts.shape[0] != w.size or w.size == 0:
            raise SpiralError("Discrete measure needs one weight per atom")
        if (w < 0).any():
            raise SpiralError("Discrete weights must be nonnegative")
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise SpiralError(f"Discrete weights sum to {w.sum()!r}, not 1")
        if ((pts < 0) | (pts > 1)).any():
            raise SpiralError("Discrete atoms must lie in [0,1]^p")
        object.__setattr__(self, "points", tuple(map(tuple, pts.tolist())))
        object.__setattr__(self, "weights", tuple(w.tolist()))

    @property
    def dim(self) -> int:
        return len(self.points[0])

    @property
    def atoms(self) -> np.ndarray:
        return np.array(self.points)

    def measure(self, A: RectSet) -> float:
        return float(np.dot(A.contains(self.atoms), self.weights))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        idx = rng.choice(len(self.weights), size=n, p=np.array(self.weights))
        return self.atoms[idx]


def Dirac(x) -> Discrete:
    """Unit point mass at ``x``; the spiral it governs has at most two points."""
    x = tuple(float(v) for v in np.atleast_1d(x))
    return Discrete(points=(x,), weights=(1.0,))


MeasureSpec = Union[LebesgueCube, Discrete]


def _check_unit(values, name):
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if ((arr < 0) | (arr > 1)).any() or not np.isfinite(arr).all():
        raise SpiralError(f"{name} must lie in [0,1], got {values!r}")
    return arr


def rho_classic(t: float, s: float) -> float:
    t, s = float(_check_unit(t, "t")[0]), float(_check_unit(s, "s")[0])
    return math.sqrt(abs(t - s))


def rho_ws_m(u, v) -> float:
    """Metric of the m-variate Wiener spiral between corners ``u`` and ``v``."""
    u, v = _check_unit(u, "u"), _check_unit(v, "v")
    if u.shape != v.shape:
        raise SpiralError(f"dimension mismatch: {u.size} vs {v.size}")
    sq = math.prod(u) + math.prod(v) - 2.0 * math.prod(np.minimum(u, v))
    return math.sqrt(max(sq, 0.0))


def _check_dims(mu: MeasureSpec, *sets: RectSet):
    for A in sets:
        if A.dim != mu.dim:
            raise SpiralError(f"rectangle of dimension {A.dim} under a measure on [0,1]^{mu.dim}")


def rho_mu(A: RectSet, B: RectSet, mu: MeasureSpec) -> float:
    _check_dims(mu, A, B)
    if isinstance(mu, LebesgueCube):
        return rho_ws_m(A.upper, B.upper)
    atoms = mu.atoms
    exactly_one = A.contains(atoms) ^ B.contains(atoms)
    return math.sqrt(float(np.dot(exactly_one, mu.weights)))


def spiral_net(family: Sequence[RectSet], mu: MeasureSpec) -> FiniteMetricSpace:
    """Distance matrix of ``family`` under ``rho_mu``.

    Null-measure differences are kept as zero-distance duplicates.
    """
    if len(family) == 0:
        raise SpiralError("spiral net needs a nonempty family")
    _check_dims(mu, *family)
    if isinstance(mu, LebesgueCube):
        U = np.array([A.upper for A in family])
        vol = U.prod(axis=1)
        overlap = np.minimum(U[:, None, :], U[None, :, :]).prod(axis=2)
        sq = vol[:, None] + vol[None, :] - 2.0 * overlap
    else:
        M = _membership(family, mu.atoms).astype(float)
        w = np.asarray(mu.weights)
        mass = M @ w
        overlap = (M * w) @ M.T
        sq = mass[:, None] + mass[None, :] - 2.0 * overlap
    dist = np.sqrt(np.clip(sq, 0.0, None))
    dist = 0.5 * (dist + dist.T)
    np.fill_diagonal(dist, 0.0)
    return FiniteMetricSpace(dist)


def lattice_net(m: int, n: int) -> list:
    """Rectangles ``rect(k / n)`` for ``k`` in ``{0..n}^m``, in C (row-major) order."""
    if m < 1 or n < 1:
        raise SpiralError("lattice net needs m >= 1 and n >= 1")
    return [RectSet(tuple(ki / n for ki in k)) for k in itertools.product(range(n + 1), repeat=m)]


def parse_measure(text: str, p: int) -> MeasureSpec:
    """``lebesgue``, ``dirac:x1,...,xp`` or ``discrete:<json path>``.

    The JSON file holds ``{"points": [[...], ...], "weights": [...]}``.
    """
    kind, _, arg = text.partition(":")
    kind = kind.strip().lower()
    if kind == "lebesgue":
        return LebesgueCube(p)
    if kind == "dirac":
        x = [float(v) for v in arg.split(",")]
        if len(x) != p:
            raise SpiralError(f"dirac point has {len(x)} coordinates, expected {p}")
        return Dirac(x)
    if kind == "discrete":
        import json

        with open(arg) as fh:
            spec = json.load(fh)
        mu = Discrete(points=spec["points"], weights=spec["weights"])
        if mu.dim != p:
            raise SpiralError(f"discrete measure lives on [0,1]^{mu.dim}, expected {p}")
        return mu
    raise SpiralError(f"unknown measure {text!r}")
