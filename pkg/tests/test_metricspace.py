import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import distortion_loop, gh_brute, pairwise_loop
from spiral_lab.metricspace import (
    Correspondence,
    FiniteMetricSpace,
    MetricSpaceError,
    PointCloud,
    cloud_to_space,
    distortion,
    gh_exact,
    gh_upper_bound,
    read_space,
    write_space,
)


def space(mat):
    return FiniteMetricSpace(np.array(mat, dtype=float))


def two_point(a):
    return space([[0, a], [a, 0]])


def random_space(rng, size):
    a = rng.random((size, size))
    a = a + a.T
    np.fill_diagonal(a, 0)
    return FiniteMetricSpace(a)


# -- cloud_to_space ---------------------------------------------------------

def test_orthonormal_pair():
    X = cloud_to_space(PointCloud(np.eye(2)))
    assert X.dist[0, 1] == pytest.approx(math.sqrt(2), abs=1e-15)


def test_single_point_cloud():
    X = cloud_to_space(PointCloud([[3.0, -1.0]]))
    assert X.size == 1 and X.dist[0, 0] == 0


def test_cloud_matches_double_loop():
    pts = np.random.default_rng(1).normal(size=(3, 4))
    X = cloud_to_space(PointCloud(pts))
    np.testing.assert_allclose(X.dist, pairwise_loop(pts), atol=1e-12, rtol=0)


def test_cloud_rejects_nonfinite():
    with pytest.raises(MetricSpaceError, match="non-finite coordinate at point 1, axis 0"):
        PointCloud([[0.0, 1.0], [np.nan, 2.0]])


def test_cloud_space_is_metric():
    pts = np.random.default_rng(2).normal(size=(40, 7)) * 1e3
    X = cloud_to_space(PointCloud(pts))
    assert X.triangle_violation() <= 1e-9 * X.diameter


# -- FiniteMetricSpace -------------------------------------------------------

@pytest.mark.parametrize(
    "mat,msg",
    [
        ([[0, 1], [2, 0]], "symmetric"),
        ([[1, 0], [0, 0]], "diagonal"),
        ([[0, -1], [-1, 0]], "negative"),
        ([[0, np.inf], [np.inf, 0]], "non-finite"),
    ],
)
def test_space_invariants(mat, msg):
    with pytest.raises(MetricSpaceError, match=msg):
        space(mat)


def test_from_matrix_checks_triangle():
    bad = [[0, 1, 5], [1, 0, 1], [5, 1, 0]]
    with pytest.raises(MetricSpaceError, match="triangle"):
        FiniteMetricSpace.from_matrix(bad)
    assert FiniteMetricSpace.from_matrix(bad, check_triangle=False).size == 3


def test_csv_round_trip(tmp_path):
    X = cloud_to_space(PointCloud(np.random.default_rng(3).normal(size=(5, 3))))
    path = tmp_path / "x.csv"
    write_space(X, path)
    assert path.read_text().startswith("# fms v1, size=5\n")
    np.testing.assert_array_equal(read_space(path).dist, X.dist)


def test_csv_size_mismatch():
    with pytest.raises(MetricSpaceError, match="size=3"):
        FiniteMetricSpace.from_csv("# fms v1, size=3\n0,1\n1,0\n")


# -- correspondences and distortion -----------------------------------------

def test_correspondence_must_be_surjective():
    with pytest.raises(MetricSpaceError, match="right"):
        Correspondence(2, 2, [(0, 0), (1, 0)])
    with pytest.raises(MetricSpaceError, match="range"):
        Correspondence(2, 2, [(0, 0), (1, 2)])


def test_distortion_identity_zero():
    X = random_space(np.random.default_rng(4), 5)
    assert distortion(Correspondence.identity(5), X, X) == 0


def test_distortion_two_point():
    assert distortion(Correspondence.identity(2), two_point(1), two_point(3)) == 2


def test_distortion_matches_enumeration():
    rng = np.random.default_rng(5)
    X, Y = random_space(rng, 3), random_space(rng, 3)
    pairs = [(0, 1), (1, 0), (2, 2), (1, 2)]
    corr = Correspondence(3, 3, pairs)
    assert distortion(corr, X, Y) == distortion_loop(pairs, X.dist, Y.dist)


def test_distortion_size_mismatch():
    with pytest.raises(MetricSpaceError):
        distortion(Correspondence.identity(2), two_point(1), space([[0]]))


def test_distortion_relabeling_invariant():
    rng = np.random.default_rng(6)
    X, Y = random_space(rng, 4), random_space(rng, 4)
    pairs = np.array([(0, 2), (1, 1), (2, 3), (3, 0), (3, 1)])
    perm = rng.permutation(4)
    inv = np.argsort(perm)
    Xp = FiniteMetricSpace(X.dist[np.ix_(perm, perm)])
    Yp = FiniteMetricSpace(Y.dist[np.ix_(perm, perm)])
    relabeled = np.column_stack([inv[pairs[:, 0]], inv[pairs[:, 1]]])
    assert distortion(Correspondence(4, 4, relabeled), Xp, Yp) == distortion(Correspondence(4, 4, pairs), X, Y)


# -- gh_exact -----------------------------------------------------------------

@pytest.mark.parametrize("a,b", [(1, 3), (0.2, 0.7), (5, 5), (0, 2)])
def test_gh_two_point_closed_form(a, b):
    assert gh_exact(two_point(a), two_point(b)) == pytest.approx(abs(a - b) / 2, abs=1e-15)


def test_gh_point_vs_space_is_half_diameter():
    Y = random_space(np.random.default_rng(7), 4)
    assert gh_exact(space([[0]]), Y) == pytest.approx(Y.diameter / 2, abs=1e-15)
    assert gh_exact(space([[0]]), two_point(2)) == 1


def test_gh_self_and_symmetry():
    rng = np.random.default_rng(8)
    X, Y = random_space(rng, 4), random_space(rng, 3)
    assert gh_exact(X, X) == 0
    assert gh_exact(X, Y) == gh_exact(Y, X)


@pytest.mark.parametrize("shape", [(2, 2), (2, 3), (3, 3), (3, 4), (1, 4)])
def test_gh_exact_matches_brute_force(shape):
    rng = np.random.default_rng(sum(shape))
    for _ in range(3):
        X, Y = random_space(rng, shape[0]), random_space(rng, shape[1])
        assert gh_exact(X, Y) == gh_brute(X.dist, Y.dist)


def test_gh_exact_cap():
    X = random_space(np.random.default_rng(9), 6)
    with pytest.raises(MetricSpaceError, match="gh_upper_bound"):
        gh_exact(X, X)


def test_gh_exact_at_cap_is_fast():
    import time

    rng = np.random.default_rng(10)
    X = cloud_to_space(PointCloud(rng.random((5, 2))))
    Y = cloud_to_space(PointCloud(rng.random((5, 2))))
    t0 = time.perf_counter()
    val = gh_exact(X, Y)
    assert time.perf_counter() - t0 < 1.0
    assert 0 <= val <= gh_upper_bound(X, Y, Correspondence.identity(5))


def _all_correspondences(nx, ny):
    cells = list(itertools.product(range(nx), range(ny)))
    for bits in range(1, 2 ** len(cells)):
        rel = [c for k, c in enumerate(cells) if bits >> k & 1]
        if {i for i, _ in rel} == set(range(nx)) and {j for _, j in rel} == set(range(ny)):
            yield Correspondence(nx, ny, rel)


def test_upper_bound_dominates_exact_2x2():
    rng = np.random.default_rng(11)
    X, Y = random_space(rng, 2), random_space(rng, 2)
    exact = gh_exact(X, Y)
    for corr in _all_correspondences(2, 2):
        assert gh_upper_bound(X, Y, corr) >= exact


matrices = st.integers(1, 4).flatmap(
    lambda k: st.lists(st.floats(0, 10, allow_nan=False), min_size=k * k, max_size=k * k).map(
        lambda vals, k=k: np.array(vals).reshape(k, k)
    )
)


def _sym(a):
    a = np.triu(a, 1)
    return FiniteMetricSpace(a + a.T)


@settings(max_examples=60, deadline=None)
@given(matrices, matrices, st.randoms(use_true_random=False))
def test_upper_bound_dominates_exact_property(a, b, rnd):
    X, Y = _sym(a), _sym(b)
    if X.size * Y.size > 12:
        return
    exact = gh_exact(X, Y)
    left = [rnd.randrange(Y.size) for _ in range(X.size)]
    right = [rnd.randrange(X.size) for _ in range(Y.size)]
    pairs = [(i, left[i]) for i in range(X.size)] + [(right[j], j) for j in range(Y.size)]
    assert gh_upper_bound(X, Y, Correspondence(X.size, Y.size, pairs)) >= exact
    assert exact == gh_exact(Y, X)
