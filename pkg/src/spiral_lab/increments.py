"""Increment laws in R^d and seeded random streams.

All "good" generators are centred, have E||X||^2 = 1, uncorrelated
coordinates and coordinate variances of order 1/d. ``aniso`` keeps the first
three properties but puts a fixed share ``theta`` of the variance on the
first coordinate, so it is the negative control for negligibility.

Seeding: a :class:`SeedSpec` ``(master_seed, stream_id)`` maps to
``numpy.random.SeedSequence(master_seed, spawn_key=(stream_id,))`` feeding a
PCG64 generator. Streams for distinct ids are independent and do not depend on
the order in which they are created.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

KINDS = ("sphere", "gauss", "rademacher", "coord", "aniso")
TAIL_PROXY_LEVEL = 10.0
# degenerate statistics (zero spread) count as exact when within rounding
FLOAT_TOL = 1e-12
# two-sided tail mass of a 3-standard-error band
THREE_SE_ALPHA = 2.0 * NormalDist().cdf(-3.0)


class GeneratorError(ValueError):
    pass


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    dim: int
    theta: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GeneratorError(f"unknown generator {self.kind!r}; choose from {', '.join(KINDS)}")
        if self.dim < 1:
            raise GeneratorError("dimension must be >= 1")
        if self.kind == "aniso":
            if self.theta is None or not (0.0 < self.theta < 1.0):
                raise GeneratorError("aniso needs theta strictly between 0 and 1")
            if self.dim < 2:
                raise GeneratorError("aniso needs dimension >= 2")
        elif self.theta is not None:
            raise GeneratorError(f"{self.kind} takes no theta")

    @property
    def label(self) -> str:
        return f"aniso:{self.theta!r}" if self.kind == "aniso" else self.kind

    def with_dim(self, dim: int) -> "GeneratorSpec":
        return GeneratorSpec(self.kind, dim, self.theta)

    def coordinate_variances(self) -> np.ndarray:
        """Exact E X_a^2 for each coordinate."""
        if self.kind == "aniso":
            rest = np.full(self.dim - 1, (1.0 - self.theta) / (self.dim - 1))
            return np.concatenate([[self.theta], rest])
        return np.full(self.dim, 1.0 / self.dim)


_ALIASES = {"gaussiso": "gauss", "coordwalker": "coord", "anisobad": "aniso"}


def parse_generator(text: str, dim: int = 1) -> GeneratorSpec:
    """Parse ``sphere|gauss|rademacher|coord|aniso:<theta>``."""
    kind, _, arg = text.strip().lower().partition(":")
    kind = _ALIASES.get(kind, kind)
    if kind == "aniso":
        if not arg:
            raise GeneratorError("aniso needs a theta, e.g. aniso:0.5")
        return GeneratorSpec(kind, dim, float(arg))
    if arg:
        raise GeneratorError(f"{kind} takes no parameter")
    return GeneratorSpec(kind, dim)


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not (0 <= self.master_seed < 2**64):
            raise GeneratorError("master_seed must be an unsigned 64-bit integer")
        if self.stream_id < 0:
            raise GeneratorError("stream_id must be nonnegative")

    def rng(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))


def derive_seed(master_seed: int, *keys: int) -> int:
    """64-bit seed hashed from ``master_seed`` and integer ``keys`` via SeedSequence."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(keys))
    return int(ss.generate_state(1, np.uint64)[0])


def _unit_sphere(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    g = rng.standard_normal((count, dim))
    norms = np.linalg.norm(g, axis=1)
    zero = norms == 0.0
    while zero.any():
        g[zero] = rng.standard_normal((int(zero.sum()), dim))
        norms[zero] = np.linalg.norm(g[zero], axis=1)
        zero = norms == 0.0
    return g / norms[:, None]


def _signs(rng: np.random.Generator, shape) -> np.ndarray:
    return 2.0 * rng.integers(0, 2, size=shape) - 1.0


def sample_increments(gen: GeneratorSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` i.i.d. increments as rows of a ``(count, dim)`` array."""
    d = gen.dim
    if gen.kind == "sphere":
        return _unit_sphere(rng, count, d)
    if gen.kind == "gauss":
        return rng.standard_normal((count, d)) / math.sqrt(d)
    if gen.kind == "rademacher":
        return _signs(rng, (count, d)) / math.sqrt(d)
    if gen.kind == "coord":
        out = np.zeros((count, d))
        axis = rng.integers(0, d, size=count)
        out[np.arange(count), axis] = _signs(rng, count)
        return out
    # aniso
    first = _signs(rng, count) * math.sqrt(gen.theta)
    rest = _unit_sphere(rng, count, d - 1) * math.sqrt(1.0 - gen.theta)
    return np.column_stack([first, rest])


def sample_increment(gen: GeneratorSpec, seed: SeedSpec) -> np.ndarray:
    return sample_increments(gen, 1, seed.rng())[0]


@dataclass
class ConditionReport:
    """Empirical check of the moment conditions on a finite sample.

    ``tail_proxy`` is E[||X||^2 1{||X||^2 > c}] at a fixed c; uniform
    integrability is a property of the whole sequence of laws and a single
    sample cannot certify it, so this value is a proxy only.
    """

    generator: str
    dim: int
    replicates: int
    mean_norm: float
    mean_z_max: float
    sq_norm_gap: float
    sq_norm_z: float
    max_offdiag_corr: float
    offdiag_z_max: float
    max_coord_var: float
    max_coord_var_se: float
    tail_proxy: float
    tail_level: float = TAIL_PROXY_LEVEL
    negligible_tol: float = 0.0
    flags: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _z(mean: np.ndarray, sd: np.ndarray, n: int) -> np.ndarray:
    se = sd / math.sqrt(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(np.abs(mean) <= FLOAT_TOL, 0.0, np.where(se > 0, np.abs(mean) / se, np.inf))
    return z


def _familywise_3se(count: int) -> float:
    """Critical |z| keeping the family-wise level at that of a single 3-SE test."""
    return NormalDist().inv_cdf(1.0 - THREE_SE_ALPHA / (2.0 * max(count, 1)))


def validate_conditions(
    gen: GeneratorSpec,
    replicates: int,
    seed: SeedSpec,
    negligible_tol: float | None = None,
) -> ConditionReport:
    """Estimate the (a), (b), (d) statistics and the tail proxy from ``replicates`` draws.

    Flags use a 3-standard-error band, Bonferroni-adjusted when a maximum over
    coordinates or pairs is taken. Negligibility is flagged when the largest
    coordinate variance exceeds ``negligible_tol`` (default ``4 / dim``) by more
    than three standard errors.
    """
    if replicates < 1000:
        raise GeneratorError("validate_conditions needs at least 1000 replicates")
    d = gen.dim
    X = sample_increments(gen, replicates, seed.rng())
    n = replicates

    mean = X.mean(axis=0)
    mean_z = _z(mean, X.std(axis=0, ddof=1), n)

    sq = np.einsum("ij,ij->i", X, X)
    sq_gap = sq.mean() - 1.0
    sq_z = float(_z(np.array([sq_gap]), np.array([sq.std(ddof=1)]), n)[0])

    if d > 1:
        iu = np.triu_indices(d, 1)
        cov = (X.T @ X) / n
        sd = np.sqrt(np.diag(cov))
        with np.errstate(divide="ignore", invalid="ignore"):
            corr = cov / np.outer(sd, sd)
        corr = np.nan_to_num(corr[iu])
        prod_sd = np.sqrt(np.maximum((X**2).T @ (X**2) / n - cov**2, 0.0))
        pair_z = _z(cov[iu], prod_sd[iu], n)
        max_corr = float(np.abs(corr).max())
        pair_z_max = float(pair_z.max())
        n_pairs = iu[0].size
    else:
        max_corr, pair_z_max, n_pairs = 0.0, 0.0, 1

    coord_var = (X**2).mean(axis=0)
    top = int(np.argmax(coord_var))
    top_se = float((X[:, top] ** 2).std(ddof=1) / math.sqrt(n))
    tol = 4.0 / d if negligible_tol is None else negligible_tol

    tail = float(np.mean(np.where(sq > TAIL_PROXY_LEVEL, sq, 0.0)))

    flags = {
        "a_centered": bool(mean_z.max() <= _familywise_3se(d)),
        "a_normalized": bool(sq_z <= 3.0),
        "b_uncorrelated": bool(pair_z_max <= _familywise_3se(n_pairs)),
        "d_negligible": bool(coord_var[top] - 3.0 * top_se <= tol),
    }
    return ConditionReport(
        generator=gen.label,
        dim=d,
        replicates=n,
        mean_norm=float(np.linalg.norm(mean)),
        mean_z_max=float(mean_z.max()),
        sq_norm_gap=float(abs(sq_gap)),
        sq_norm_z=sq_z,
        max_offdiag_corr=max_corr,
        offdiag_z_max=pair_z_max,
        max_coord_var=float(coord_var[top]),
        max_coord_var_se=top_se,
        tail_proxy=tail,
        negligible_tol=tol,
        flags=flags,
    )
