"""Finite metric spaces, correspondences and Gromov-Hausdorff distance.

The GH distance between compact metric spaces equals half the infimum of the
distortion over all correspondences. For tiny spaces we compute that infimum
exactly; for experiment-sized spaces we evaluate the distortion of a supplied
correspondence, which bounds the distance from above.
"""
from __future__ import annotations

import io
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist, squareform

GH_EXACT_CELL_CAP = 25
TRIANGLE_RTOL = 1e-9

_HEADER_RE = re.compile(r"^#\s*fms v1,\s*size=(\d+)\s*$")


class MetricSpaceError(ValueError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
            raise MetricSpaceError(f"point cloud must be a nonempty 2-d array, got shape {pts.shape}")
        bad = ~np.isfinite(pts)
        if bad.any():
            row, col = np.argwhere(bad)[0]
            raise MetricSpaceError(f"non-finite coordinate at point {row}, axis {col}: {pts[row, col]!r}")
        object.__setattr__(self, "points", _frozen(pts))

    @property
    def count(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    """Symmetric, zero-diagonal, nonnegative distance matrix.

    Construction checks the cheap invariants. The O(size^3) triangle
    inequality is checked by :meth:`from_matrix` and :meth:`triangle_violation`;
    spaces built internally from Euclidean clouds or measure metrics satisfy
    it by construction.
    """

    dist: np.ndarray

    def __post_init__(self):
        dist = np.asarray(self.dist, dtype=float)
        if dist.ndim != 2 or dist.shape[0] != dist.shape[1] or dist.shape[0] == 0:
            raise MetricSpaceError(f"distance matrix must be square and nonempty, got shape {dist.shape}")
        if not np.isfinite(dist).all():
            raise MetricSpaceError("distance matrix has non-finite entries")
        if (dist < 0).any():
            raise MetricSpaceError("distance matrix has negative entries")
        if np.any(np.diag(dist) != 0):
            raise MetricSpaceError("distance matrix has nonzero diagonal")
        if not np.array_equal(dist, dist.T):
            raise MetricSpaceError("distance matrix is not symmetric")
        object.__setattr__(self, "dist", _frozen(dist))

    @classmethod
    def from_matrix(cls, dist, check_triangle: bool = True) -> "FiniteMetricSpace":
        space = cls(dist)
        if check_triangle:
            excess = space.triangle_violation()
            tol = TRIANGLE_RTOL * space.diameter
            if excess > tol:
                raise MetricSpaceError(f"triangle inequality violated by {excess:.3g} (tolerance {tol:.3g})")
        return space

    @property
    def size(self) -> int:
        return self.dist.shape[0]

    @property
    def diameter(self) -> float:
        return float(self.dist.max())

    def triangle_violation(self) -> float:
        """Largest amount by which d(i,k) exceeds d(i,j) + d(j,k); 0 if none."""
        d = self.dist
        worst = 0.0
        for j in range(self.size):
            via_j = d[:, j, None] + d[None, j, :]
            worst = max(worst, float((d - via_j).max()))
        return worst

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# fms v1, size={self.size}\n")
        for row in self.dist:
            buf.write(",".join(repr(float(v)) for v in row))
            buf.write("\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, check_triangle: bool = True) -> "FiniteMetricSpace":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise MetricSpaceError("empty distance-matrix file")
        match = _HEADER_RE.match(lines[0].strip())
        if match is None:
            raise MetricSpaceError(f"bad header {lines[0]!r}; expected '# fms v1, size=<n>'")
        size = int(match.group(1))
        rows = [[float(tok) for tok in ln.split(",")] for ln in lines[1:]]
        if len(rows) != size or any(len(r) != size for r in rows):
            raise MetricSpaceError(f"header declares size={size} but body is not {size}x{size}")
        return cls.from_matrix(np.array(rows), check_triangle=check_triangle)


def write_space(space: FiniteMetricSpace, path) -> None:
    Path(path).write_text(space.to_csv())


def read_space(path, check_triangle: bool = True) -> FiniteMetricSpace:
    return FiniteMetricSpace.from_csv(Path(path).read_text(), check_triangle=check_triangle)


@dataclass(frozen=True, eq=False)
class Correspondence:
    """A relation between index sets that is surjective in both directions."""

    left_size: int
    right_size: int
    pairs: np.ndarray

    def __post_init__(self):
        pairs = np.asarray(self.pairs, dtype=np.intp).reshape(-1, 2)
        if self.left_size < 1 or self.right_size < 1:
            raise MetricSpaceError("correspondence sides must be nonempty")
        if pairs.size == 0:
            raise MetricSpaceError("correspondence has no pairs")
        if pairs.min() < 0 or pairs[:, 0].max() >= self.left_size or pairs[:, 1].max() >= self.right_size:
            raise MetricSpaceError("correspondence index out of range")
        if np.unique(pairs[:, 0]).size != self.left_size:
            raise MetricSpaceError("correspondence misses some left index")
        if np.unique(pairs[:, 1]).size != self.right_size:
            raise MetricSpaceError("correspondence misses some right index")
        object.__setattr__(self, "pairs", _frozen_int(pairs))

    @classmethod
    def identity(cls, size: int) -> "Correspondence":
        idx = np.arange(size)
        return cls(size, size, np.column_stack([idx, idx]))

    @classmethod
    def from_map(cls, mapping, right_size: int) -> "Correspondence":
        """Graph of a surjective map left index -> right index."""
        mapping = np.asarray(mapping, dtype=np.intp)
        return cls(mapping.size, right_size, np.column_stack([np.arange(mapping.size), mapping]))


def _frozen_int(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def cloud_to_space(cloud: PointCloud) -> FiniteMetricSpace:
    if cloud.count == 1:
        return FiniteMetricSpace(np.zeros((1, 1)))
    return FiniteMetricSpace(squareform(pdist(cloud.points)))


def distortion(corr: Correspondence, X: FiniteMetricSpace, Y: FiniteMetricSpace) -> float:
    if corr.left_size != X.size or corr.right_size != Y.size:
        raise MetricSpaceError(
            f"correspondence is {corr.left_size}x{corr.right_size} but spaces have sizes {X.size}, {Y.size}"
        )
    left, right = corr.pairs[:, 0], corr.pairs[:, 1]
    return float(np.abs(X.dist[np.ix_(left, left)] - Y.dist[np.ix_(right, right)]).max())


def gh_upper_bound(X: FiniteMetricSpace, Y: FiniteMetricSpace, corr: Correspondence) -> float:
    return 0.5 * distortion(corr, X, Y)


def _feasible(compat: np.ndarray, nx: int, ny: int) -> bool:
    """Is there a clique of the compatibility graph covering every row and column?

    Cells are numbered i * ny + j. Branches on the uncovered row or column with
    the fewest admissible cells; any covering clique contains one of them.
    """
    cell_row = np.repeat(np.arange(nx), ny)
    cell_col = np.tile(np.arange(ny), nx)

    def search(allowed: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> bool:
        if rows.all() and cols.all():
            return True
        best = None
        for i in np.flatnonzero(~rows):
            cand = np.flatnonzero(allowed & (cell_row == i))
            if best is None or cand.size < best.size:
                best = cand
        for j in np.flatnonzero(~cols):
            cand = np.flatnonzero(allowed & (cell_col == j))
            if best is None or cand.size < best.size:
                best = cand
        for c in best:
            r2, c2 = rows.copy(), cols.copy()
            r2[cell_row[c]] = True
            c2[cell_col[c]] = True
            if search(allowed & compat[c], r2, c2):
                return True
        return False

    return search(np.ones(nx * ny, dtype=bool), np.zeros(nx, dtype=bool), np.zeros(ny, dtype=bool))


def gh_exact(X: FiniteMetricSpace, Y: FiniteMetricSpace) -> float:
    """Exact GH distance, half the minimal distortion over all correspondences.

    Only for X.size * Y.size <= 25; use :func:`gh_upper_bound` beyond that.
    """
    nx, ny = X.size, Y.size
    if nx * ny > GH_EXACT_CELL_CAP:
        raise MetricSpaceError(
            f"gh_exact enumerates relations on {nx}x{ny}={nx * ny} cells, cap is {GH_EXACT_CELL_CAP}; "
            "use gh_upper_bound with an explicit correspondence"
        )
    # gap[(i,j),(i',j')] = |dX(i,i') - dY(j,j')|
    gap = np.abs(X.dist[:, None, :, None] - Y.dist[None, :, None, :]).reshape(nx * ny, nx * ny)
    levels = np.unique(gap)
    lo, hi = 0, levels.size - 1  # the full relation is feasible at the top level
    while lo < hi:
        mid = (lo + hi) // 2
        if _feasible(gap <= levels[mid], nx, ny):
            hi = mid
        else:
            lo = mid + 1
    return 0.5 * float(levels[lo])
