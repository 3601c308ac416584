import itertools
import math

import numpy as np
import pytest

from oracles import exhaustive_q2_rademacher, ms_deviation_grid, prefix_direct, q_double_sum
from spiral_lab.increments import GeneratorSpec, SeedSpec, parse_generator, sample_increments
from spiral_lab.metricspace import Correspondence, cloud_to_space, gh_exact, gh_upper_bound
from spiral_lab.multisum import (
    IncrementTensor,
    MultisumError,
    PrefixTensor,
    deviation_sup_exact,
    ms_cloud,
    ms_gh_report,
    prefix_sums,
    q_field,
    q_second_moment_closed_form,
    q_stat,
    run_ms_replicate,
)
from spiral_lab.spiral import LebesgueCube, lattice_net, spiral_net


def tensor(data, m):
    return IncrementTensor(np.asarray(data, dtype=float), m)


# -- prefix sums ----------------------------------------------------------------

def test_prefix_hand_example():
    S = prefix_sums(tensor(np.array([[1, 2], [3, 4]])[..., None], 2))
    assert S.data[..., 0].tolist() == [[1, 3], [4, 10]]


def test_prefix_origin_term_kept():
    inc = tensor(np.random.default_rng(0).normal(size=(3, 3, 2)), 2)
    np.testing.assert_array_equal(prefix_sums(inc).data[0, 0], inc.data[0, 0])


def test_prefix_zero():
    S = prefix_sums(tensor(np.zeros((3, 3, 3, 2)), 3))
    assert not S.data.any()


SHAPES = [(m, n) for m in (1, 2, 3) for n in range(0, 8) if (n + 1) ** m <= 64]


@pytest.mark.parametrize("m,n", SHAPES)
def test_prefix_matches_direct_summation(m, n):
    rng = np.random.default_rng(10 * m + n)
    for d in (1, 5):
        x = rng.normal(size=(n + 1,) * m + (d,))
        got = prefix_sums(tensor(x, m)).data
        want = prefix_direct(x, m)
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)


def test_lattice_shape_checked():
    with pytest.raises(MultisumError, match="n\\+1"):
        IncrementTensor(np.zeros((2, 3, 1)), 2)
    with pytest.raises(MultisumError, match="non-finite"):
        IncrementTensor(np.array([[np.nan]]), 1)


# -- cloud ----------------------------------------------------------------------

def test_cloud_n1_unscaled():
    e1, e2 = np.eye(2)
    pref = PrefixTensor(np.array([e1, e1 + e2]), 1)
    np.testing.assert_array_equal(ms_cloud(pref).points, [e1, e1 + e2])


def test_cloud_zero_gives_zero_space():
    X = cloud_to_space(ms_cloud(PrefixTensor(np.zeros((4, 3)), 1)))
    assert not X.dist.any()


def test_cloud_distances_m1():
    rng = np.random.default_rng(1)
    n = 6
    S = prefix_sums(tensor(rng.normal(size=(n + 1, 3)), 1))
    X = cloud_to_space(ms_cloud(S))
    for i in range(n + 1):
        for j in range(n + 1):
            want = np.linalg.norm(S.data[j] - S.data[i]) / math.sqrt(n)
            assert X.dist[i, j] == pytest.approx(want, abs=1e-12)


# -- deviation ------------------------------------------------------------------

def test_deviation_zero_walk():
    assert deviation_sup_exact(PrefixTensor(np.zeros((3, 3, 2)), 2)) == 1


def test_deviation_two_step_example():
    e1, e2 = np.eye(3)[:2]
    pref = prefix_sums(tensor([e1, e2], 1))
    assert deviation_sup_exact(pref) == 1
    assert ms_deviation_grid(pref.sq_norms(), 1, 1, 10_000) == 1


@pytest.mark.parametrize("m,n,grid", [(1, 7, 7000), (2, 4, 400), (3, 3, 60)])
def test_deviation_dominates_grid_oracle(m, n, grid):
    rng = np.random.default_rng(m * 100 + n)
    for _ in range(5):
        pref = prefix_sums(tensor(rng.normal(size=(n + 1,) * m + (3,)) / math.sqrt(3), m))
        exact = deviation_sup_exact(pref)
        approx = ms_deviation_grid(pref.sq_norms(), m, n, grid)
        # the volume term moves by at most m / grid between neighbouring grid points
        assert approx - 1e-12 <= exact <= approx + m / grid + 1e-12


# -- Q statistic ------------------------------------------------------------------

def test_q_single_increment():
    inc = tensor(np.random.default_rng(2).normal(size=(3, 3, 2)), 2)
    assert q_stat(prefix_sums(inc), inc, (0, 0)) == pytest.approx(0, abs=1e-15)


def test_q_two_equal_steps():
    e1 = np.array([1.0, 0.0])
    inc = tensor([e1, e1], 1)
    assert q_stat(prefix_sums(inc), inc, 1) == 2


def test_q_identity_vs_double_sum():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(3, 3, 3))
    inc = tensor(x, 2)
    pref = prefix_sums(inc)
    field = q_field(pref, inc)
    for k in itertools.product(range(3), repeat=2):
        want = q_double_sum(x, 2, k)
        assert q_stat(pref, inc, k) == pytest.approx(want, abs=1e-10)
        assert field[k] == pytest.approx(want, abs=1e-10)


def test_q_index_checked():
    inc = tensor(np.zeros((2, 1)), 1)
    with pytest.raises(MultisumError):
        q_stat(prefix_sums(inc), inc, 2)


@pytest.mark.parametrize("m,n,d", [(1, 1, 1), (1, 1, 2), (1, 2, 1), (2, 1, 1)])
def test_q_second_moment_constant_by_enumeration(m, n, d):
    closed = q_second_moment_closed_form(n, m, sigma4_sum=d * (1 / d) ** 2)
    assert closed == pytest.approx(exhaustive_q2_rademacher(m, n, d), abs=1e-9)


def test_q_second_moment_value_at_smallest_case():
    # 4 sign patterns: Q = 2 x0 x1 = +-2, so E Q^2 = 4
    assert exhaustive_q2_rademacher(1, 1, 1) == 4
    assert q_second_moment_closed_form(1, 1, 1.0) == 4


def test_q_second_moment_no_pairs():
    assert q_second_moment_closed_form(0, 3, 0.25) == 0


def test_q_second_moment_monte_carlo_sphere():
    # isotropic sphere: sum_a (1/d)^2 = 1/d
    m, n, d, reps = 1, 3, 16, 4000
    rng = SeedSpec(5).rng()
    x = sample_increments(GeneratorSpec("sphere", d), reps * (n + 1), rng).reshape(reps, n + 1, d)
    s = x.sum(axis=1)
    q = np.einsum("ij,ij->i", s, s) - np.einsum("ijk,ijk->i", x, x)
    target = q_second_moment_closed_form(n, m, 1 / d)
    se = (q**2).std(ddof=1) / math.sqrt(reps)
    assert abs((q**2).mean() - target) <= 4 * se


@pytest.mark.parametrize("kind", ["sphere", "gauss", "rademacher", "coord", "aniso:0.5"])
def test_q_mean_zero(kind):
    gen = parse_generator(kind, 8)
    vals = [run_ms_replicate(gen, 2, 3, SeedSpec(100 + r), with_gh=False).q_normalized for r in range(600)]
    vals = np.array(vals)
    assert abs(vals.mean()) <= 3 * vals.std(ddof=1) / math.sqrt(vals.size)


# -- GH report ------------------------------------------------------------------

def test_gh_report_zero_walk():
    assert ms_gh_report(PrefixTensor(np.zeros((3, 4)), 1)) == 0.5


def test_gh_report_dominates_exact_small():
    rng = np.random.default_rng(6)
    for _ in range(20):
        inc = tensor(rng.normal(size=(2, 3)) / math.sqrt(3), 1)
        pref = prefix_sums(inc)
        X = cloud_to_space(ms_cloud(pref))
        Y = spiral_net(lattice_net(1, 1), LebesgueCube(1))
        assert ms_gh_report(pref) >= gh_exact(X, Y) - 1e-15
        assert ms_gh_report(pref) == gh_upper_bound(X, Y, Correspondence.identity(2))


def test_gh_report_pipeline_finite():
    rep = run_ms_replicate(GeneratorSpec("sphere", 400), 1, 20, SeedSpec(7))
    assert np.isfinite(rep.gh_bound) and 0 <= rep.gh_bound < 0.5


def test_replicate_deterministic():
    gen = GeneratorSpec("gauss", 10)
    a = run_ms_replicate(gen, 2, 4, SeedSpec(8))
    b = run_ms_replicate(gen, 2, 4, SeedSpec(8))
    assert a == b
