"""VC set families on [0,1]^p: traces, shattering, VC dimension, covering and bracketing.

Traces are bitmasks over the input point list (bit i set iff point i is in
the set). For parametric families the traces are enumerated from canonical
parameters built out of the point coordinates: a trace can only change when a
boundary crosses a point, so one parameter per combinatorial cell suffices.
Every returned trace comes with the parameter that realizes it.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .spiral import LebesgueCube, RectSet, _membership

MAX_TRACE_POINTS = 20


class VCError(ValueError):
    pass


def _mask(flags) -> int:
    out = 0
    for i, f in enumerate(flags):
        if f:
            out |= 1 << i
    return out


def _as_points(points, p: int) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return pts.reshape(0, p)
    return pts.reshape(-1, p)


def _combine(per_axis: list) -> dict:
    """AND together one choice per axis; keep the first witness of each mask."""
    combos = {None: ()}
    for options in per_axis:
        nxt = {}
        for m1, w1 in combos.items():
            for m2, w2 in options.items():
                key = m2 if m1 is None else (m1 & m2)
                if key not in nxt:
                    nxt[key] = w1 + (w2,)
        combos = nxt
    return combos


def _unit_cube_points(k: int, p: int, rng: np.random.Generator) -> np.ndarray:
    """Half the time uniform, half the time distinct nodes of a (k+1)-step grid."""
    if rng.random() < 0.5:
        return rng.random((k, p))
    ticks = np.arange(1, k + 2) / (k + 2)
    return rng.choice(ticks, size=(k, p))


@dataclass(frozen=True)
class LowerLeftRects:
    """Closed rectangles [0, t_1] x ... x [0, t_p] with t in [0,1]^p."""

    p: int = 1

    point_dim = property(lambda self: self.p)

    def member(self, params, points) -> np.ndarray:
        pts = _as_points(points, self.p)
        return np.all((pts >= 0) & (pts <= np.asarray(params, dtype=float)), axis=1)

    def traces_with_witnesses(self, points) -> dict:
        pts = _as_points(points, self.p)
        per_axis = []
        for c in range(self.p):
            col = pts[:, c]
            thresholds = np.unique(np.concatenate([[0.0, 1.0], col[(col >= 0) & (col <= 1)]]))
            opts = {}
            for t in thresholds:
                opts.setdefault(_mask((col >= 0) & (col <= t)), float(t))
            per_axis.append(opts)
        return {m: tuple(w) for m, w in _combine(per_axis).items()}

    def random_params(self, rng: np.random.Generator):
        return tuple(rng.random(self.p))

    def random_points(self, k: int, rng: np.random.Generator) -> np.ndarray:
        return _unit_cube_points(k, self.p, rng)


@dataclass(frozen=True)
class Intervals:
    """Closed intervals [a, b] of the real line, plus the empty set."""

    point_dim = 1

    def member(self, params, points) -> np.ndarray:
        a, b = params
        x = _as_points(points, 1)[:, 0]
        return (x >= a) & (x <= b)

    def traces_with_witnesses(self, points) -> dict:
        x = _as_points(points, 1)[:, 0]
        vals = np.unique(x)
        out = {0: (math.inf, -math.inf)}
        for i, a in enumerate(vals):
            for b in vals[i:]:
                out.setdefault(_mask((x >= a) & (x <= b)), (float(a), float(b)))
        return out

    def random_params(self, rng: np.random.Generator):
        a, b = rng.uniform(-0.2, 1.2, size=2)
        return (float(a), float(b))

    def random_points(self, k: int, rng: np.random.Generator) -> np.ndarray:
        return _unit_cube_points(k, 1, rng)


@dataclass(frozen=True)
class AxisRects:
    """Closed boxes prod [a_i, b_i], plus the empty set."""

    p: int = 2

    point_dim = property(lambda self: self.p)

    def member(self, params, points) -> np.ndarray:
        pts = _as_points(points, self.p)
        lo = np.array([ab[0] for ab in params])
        hi = np.array([ab[1] for ab in params])
        return np.all((pts >= lo) & (pts <= hi), axis=1)

    def traces_with_witnesses(self, points) -> dict:
        pts = _as_points(points, self.p)
        per_axis = [Intervals().traces_with_witnesses(pts[:, c]) for c in range(self.p)]
        return {m: tuple(w) for m, w in _combine(per_axis).items()}

    def random_params(self, rng: np.random.Generator):
        return tuple(tuple(sorted(rng.uniform(-0.2, 1.2, size=2)) if rng.random() < 0.9
                           else rng.uniform(-0.2, 1.2, size=2)) for _ in range(self.p))

    def random_points(self, k: int, rng: np.random.Generator) -> np.ndarray:
        return _unit_cube_points(k, self.p, rng)


@dataclass(frozen=True)
class HalfPlanes:
    """Closed half-planes {x in R^2 : w . x >= c}."""

    point_dim = 2

    def member(self, params, points) -> np.ndarray:
        w0, w1, c = params
        pts = _as_points(points, 2)
        return pts @ np.array([w0, w1]) >= c

    def traces_with_witnesses(self, points) -> dict:
        pts = _as_points(points, 2)
        out = {0: (1.0, 0.0, math.inf)}
        if len(pts) == 0:
            return out
        # The order of projections only changes at directions orthogonal to
        # some p_i - p_j; one direction strictly inside each arc suffices.
        crit = []
        for i, j in itertools.combinations(range(len(pts)), 2):
            dx, dy = pts[j] - pts[i]
            if dx or dy:
                phi = math.atan2(dy, dx)
                crit.extend([(phi + math.pi / 2) % (2 * math.pi), (phi - math.pi / 2) % (2 * math.pi)])
        crit = np.unique(crit)
        if crit.size == 0:
            angles = np.array([0.0])
        else:
            nxt = np.append(crit[1:], crit[0] + 2 * math.pi)
            angles = (crit + nxt) / 2
        for phi in angles:
            w = np.array([math.cos(phi), math.sin(phi)])
            proj = pts @ w
            vals = np.unique(proj)
            for c in vals:
                out.setdefault(_mask(proj >= c), (float(w[0]), float(w[1]), float(c)))
        return out

    def random_params(self, rng: np.random.Generator):
        phi = rng.uniform(0, 2 * math.pi)
        return (math.cos(phi), math.sin(phi), float(rng.uniform(-1.5, 1.5)))

    def random_points(self, k: int, rng: np.random.Generator) -> np.ndarray:
        return _unit_cube_points(k, 2, rng)


@dataclass(frozen=True)
class FiniteFamily:
    """Explicit sets over the ground set {0..ground_size-1}, given as bitmasks.

    Points are ground-set indices.
    """

    ground_size: int
    sets: tuple

    def __post_init__(self):
        sets = tuple(int(s) for s in self.sets)
        if self.ground_size < 0:
            raise VCError("ground_size must be nonnegative")
        for s in sets:
            if s < 0 or s >> self.ground_size:
                raise VCError(f"bitmask {s:#b} wider than ground size {self.ground_size}")
        object.__setattr__(self, "sets", sets)

    point_dim = 1

    def _indices(self, points) -> list:
        idx = [int(v) for v in np.asarray(points).ravel()]
        if any(not (0 <= v < self.ground_size) for v in idx):
            raise VCError(f"points must be ground indices in [0, {self.ground_size})")
        return idx

    def member(self, params, points) -> np.ndarray:
        s = self.sets[params]
        return np.array([(s >> v) & 1 == 1 for v in self._indices(points)], dtype=bool)

    def traces_with_witnesses(self, points) -> dict:
        idx = self._indices(points)
        out = {}
        for k, s in enumerate(self.sets):
            out.setdefault(_mask([(s >> v) & 1 for v in idx]), k)
        return out

    def random_params(self, rng: np.random.Generator):
        return int(rng.integers(len(self.sets)))

    @classmethod
    def power_set(cls, g: int) -> "FiniteFamily":
        return cls(g, tuple(range(2**g)))


FamilySpec = (LowerLeftRects, Intervals, AxisRects, HalfPlanes, FiniteFamily)


def _check(family, points):
    if not isinstance(family, FamilySpec):
        raise VCError(f"unsupported family {family!r}")
    n = len(np.asarray(points).reshape(-1, family.point_dim)) if np.asarray(points).size else 0
    if n > MAX_TRACE_POINTS:
        raise VCError(f"trace enumeration supports at most {MAX_TRACE_POINTS} points, got {n}")
    return n


def traces(family, points) -> frozenset:
    """Distinct subsets {i : points[i] in A} over A in the family, as bitmasks."""
    _check(family, points)
    return frozenset(family.traces_with_witnesses(points))


def shatters(family, points) -> bool:
    n = _check(family, points)
    return len(family.traces_with_witnesses(points)) == 2**n


@dataclass(frozen=True)
class VCDimResult:
    """Outcome of a VC-dimension search.

    ``exact`` is True only for exhaustive FiniteFamily searches. Otherwise
    ``value`` is what the sampled candidates support: for variant "some" a
    lower bound, for "all" the largest size at which no sampled set failed.
    ``saturated`` means the search hit ``max_points`` without failing, i.e.
    the answer is ">= value".
    """

    value: int
    variant: str
    exact: bool
    saturated: bool
    budget: int | None
    max_points: int

    def __str__(self) -> str:
        tag = ">=" if self.saturated else ("=" if self.exact else "~")
        return f"{tag}{self.value}"


def _vc_finite(family: FiniteFamily, variant: str) -> VCDimResult:
    g = family.ground_size
    if g > MAX_TRACE_POINTS:
        raise VCError(f"exhaustive search needs ground_size <= {MAX_TRACE_POINTS}")
    if variant == "some":
        best, level = 0, [()]
        while level:
            nxt = set()
            for base in level:
                start = base[-1] + 1 if base else 0
                for e in range(start, g):
                    cand = base + (e,)
                    if shatters(family, cand):
                        nxt.add(cand)
            if nxt:
                best = len(next(iter(nxt)))
            level = sorted(nxt)
        return VCDimResult(best, variant, True, False, None, g)
    best = 0
    for k in range(1, g + 1):
        if all(shatters(family, c) for c in itertools.combinations(range(g), k)):
            best = k
        else:
            break
    return VCDimResult(best, variant, True, False, None, g)


def vc_dim(family, variant: str = "some", search_budget: int = 2000, max_points: int = 8, seed: int = 0) -> VCDimResult:
    """VC dimension, "some" = standard definition, "all" = every set of that size.

    Parametric families are probed with ``search_budget`` candidate point sets
    per cardinality, random and grid-based, so the result is a bound.
    """
    variant = variant.lower()
    if variant not in ("some", "all"):
        raise VCError("variant must be 'some' or 'all'")
    if isinstance(family, FiniteFamily):
        return _vc_finite(family, variant)
    if not isinstance(family, FamilySpec):
        raise VCError(f"unsupported family {family!r}")
    rng = np.random.default_rng(seed)
    max_points = min(max_points, MAX_TRACE_POINTS)
    best = 0
    for k in range(1, max_points + 1):
        cands = (family.random_points(k, rng) for _ in range(search_budget))
        if variant == "some":
            ok = any(shatters(family, c) for c in cands)
        else:
            ok = all(shatters(family, c) for c in cands)
        if not ok:
            return VCDimResult(best, variant, False, False, search_budget, max_points)
        best = k
    return VCDimResult(best, variant, False, True, search_budget, max_points)


def l1_distances(net: Sequence[RectSet], sample) -> np.ndarray:
    """Empirical mu(A symdiff B) for all pairs in ``net`` under the sample's point masses."""
    M = _membership(net, np.asarray(sample, dtype=float).reshape(-1, net[0].dim)).astype(float)
    n = M.shape[1]
    inter = M @ M.T
    mass = M.sum(axis=1)
    return (mass[:, None] + mass[None, :] - 2.0 * inter) / n


def _greedy_cover(close: np.ndarray) -> int:
    """Take the first uncovered element; among centers covering it, pick the one covering most."""
    uncovered = np.ones(close.shape[0], dtype=bool)
    centers = 0
    while uncovered.any():
        e = int(np.argmax(uncovered))
        cand = np.flatnonzero(close[:, e])
        gain = (close[cand] & uncovered).sum(axis=1)
        c = cand[int(np.argmax(gain))]
        uncovered &= ~close[c]
        centers += 1
    return centers


def covering_number_L1(net: Sequence[RectSet], sample, eps: float) -> int:
    """Size of a greedy eps-cover of ``net`` in empirical L1 (symmetric-difference mass).

    A cover at radius r <= eps also covers at eps, so the reported size is the
    smallest greedy cover over all distinct pairwise distances up to eps. That
    keeps the count an upper bound on the covering number of the net and makes
    it nonincreasing in eps.
    """
    if len(net) == 0:
        raise VCError("covering number of an empty net")
    if eps <= 0:
        raise VCError("eps must be positive")
    D = l1_distances(net, sample)
    radii = np.unique(D[D <= eps])
    return min(_greedy_cover(D <= r) for r in radii)


@dataclass(frozen=True)
class BracketNet:
    eps: float
    resolution: int
    brackets: tuple

    def widths(self, mu=None) -> np.ndarray:
        mu = mu or LebesgueCube(self.brackets[0][0].dim)
        return np.array([mu.measure(hi) - mu.measure(lo) for lo, hi in self.brackets])

    def locate(self, A: RectSet) -> tuple:
        """The bracket (lower, upper) with lower <= A <= upper."""
        N = self.resolution
        k = tuple(min(math.floor(t * N), N) for t in A.upper)
        lower = RectSet(tuple(ki / N for ki in k))
        upper = RectSet(tuple(min(ki + 1, N) / N for ki in k))
        return lower, upper


def bracket_net_rects(p: int, eps: float) -> BracketNet:
    """Grid brackets for lower-left rectangles in [0,1]^p with Lebesgue width <= eps.

    N = ceil(p / eps); bracket k pairs rect(k/N) with rect(min(k+1, N)/N).
    The width is at most sum_i 1/N = p/N <= eps.
    """
    if eps <= 0:
        raise VCError("eps must be positive")
    N = max(1, math.ceil(p / eps))
    brackets = []
    for k in itertools.product(range(N + 1), repeat=p):
        lower = RectSet(tuple(ki / N for ki in k))
        upper = RectSet(tuple(min(ki + 1, N) / N for ki in k))
        brackets.append((lower, upper))
    return BracketNet(eps, N, tuple(brackets))


def parse_family(text: str):
    """``intervals``, ``llrects[:p]``, ``axisrects[:p]``, ``halfplanes`` or ``finite:<json path>``.

    The JSON file holds ``{"ground_size": g, "sets": [bitmask, ...]}``.
    """
    kind, _, arg = text.strip().partition(":")
    kind = kind.lower()
    if kind == "intervals":
        return Intervals()
    if kind in ("llrects", "lowerleftrects"):
        return LowerLeftRects(int(arg or 1))
    if kind in ("axisrects", "rects"):
        return AxisRects(int(arg or 2))
    if kind == "halfplanes":
        return HalfPlanes()
    if kind == "finite":
        with open(arg) as fh:
            spec = json.load(fh)
        return FiniteFamily(int(spec["ground_size"]), tuple(spec["sets"]))
    raise VCError(f"unknown family {text!r}")
