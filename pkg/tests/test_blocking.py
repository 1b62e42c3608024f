import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.cluster.hierarchy import linkage
from scipy.spatial.distance import squareform

from gsavg.blocking import (
    DEFAULT_GRID,
    Dendrogram,
    average_linkage,
    correlation_dissimilarity,
    cut_at_percentile,
    cut_height,
    loocv_errors,
    select_percentile_loocv,
)
from gsavg.dataset import DataError, Dataset
from gsavg.dissim import Blocking
from gsavg.gamma import GammaSpec
from gsavg.simgen import SimConfig, gen_example2

from oracles import loocv_ref, pearson_ref, upgma_ref


def rand_data(rng, n1=5, n2=5, d=6):
    x = rng.standard_normal((n1 + n2, d))
    x[n1:, : d // 2] *= 2.0
    return Dataset(x, [1] * n1 + [2] * n2)


def random_dissimilarity(rng, d):
    a = rng.uniform(0, 1, (d, d))
    a = (a + a.T) / 2
    np.fill_diagonal(a, 0)
    return a


# --- correlation dissimilarity ---------------------------------------------

def test_hand_computed_pearson_matrix():
    x = np.array([[1, 2, 1], [2, 1, 0], [3, 4, 0], [4, 3, 1]], dtype=float)
    # centered columns: a=(-1.5,-.5,.5,1.5) b=(-.5,-1.5,1.5,.5) c=(.5,-.5,-.5,.5)
    # rho(a,b) = 3/5, rho(a,c) = rho(b,c) = 0
    expected = np.array([[0, 0.4, 1], [0.4, 0, 1], [1, 1, 0]])
    got = correlation_dissimilarity(x)
    assert np.max(np.abs(got - expected)) <= 1e-12
    for i in range(3):
        for j in range(3):
            if i != j:
                assert abs(got[i, j] - (1 - abs(pearson_ref(x[:, i], x[:, j])))) <= 1e-12


def test_duplicate_and_negated_features(rng):
    x = rng.standard_normal((10, 3))
    x = np.column_stack([x, x[:, 0], -x[:, 1]])
    l = correlation_dissimilarity(x)
    assert l[0, 3] == pytest.approx(0, abs=1e-12)
    assert l[1, 4] == pytest.approx(0, abs=1e-12)


def test_matrix_properties(rng):
    for method in ("pearson", "spearman"):
        l = correlation_dissimilarity(rng.standard_normal((12, 9)), method)
        assert np.array_equal(l, l.T)
        assert np.all(np.diag(l) == 0)
        assert np.all((l >= 0) & (l <= 1))


def test_sign_flip_invariance(rng):
    x = rng.standard_normal((15, 10))
    base = correlation_dissimilarity(x)
    for j in range(10):
        y = x.copy()
        y[:, j] = -y[:, j]
        assert np.array_equal(correlation_dissimilarity(y), base)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), col=st.integers(0, 5),
       f=st.sampled_from([np.exp, np.arctan, lambda v: v**3, lambda v: -np.tanh(v)]))
def test_spearman_invariant_under_monotone_maps(seed, col, f):
    x = np.random.default_rng(seed).standard_normal((12, 6))
    y = x.copy()
    y[:, col] = f(y[:, col])
    assert np.array_equal(correlation_dissimilarity(x, "spearman"),
                          correlation_dissimilarity(y, "spearman"))


def test_constant_feature_warns_and_gets_zero_correlation(rng):
    x = rng.standard_normal((8, 3))
    x[:, 1] = 4.2
    with pytest.warns(RuntimeWarning, match="constant"):
        l = correlation_dissimilarity(x)
    assert l[1, 0] == 1.0 and l[1, 2] == 1.0 and l[1, 1] == 0.0


def test_needs_three_rows():
    with pytest.raises(DataError):
        correlation_dissimilarity(np.zeros((2, 3)))


# --- average linkage --------------------------------------------------------

def test_two_leaves():
    dg = average_linkage([[0, 0.3], [0.3, 0]])
    assert dg.merges == ((0, 1, 0.3, 2),)


def test_three_leaf_hand_trace():
    d = [[0, 0.1, 0.9], [0.1, 0, 0.7], [0.9, 0.7, 0]]
    dg = average_linkage(d)
    assert dg.merges[0][:2] == (0, 1) and dg.merges[0][2] == 0.1
    assert dg.merges[1][:2] == (2, 3)
    assert dg.merges[1][2] == pytest.approx(0.8, abs=1e-15)


def test_equal_dissimilarities_follow_lexicographic_rule():
    d = np.full((5, 5), 0.5)
    np.fill_diagonal(d, 0)
    ref = upgma_ref(d.tolist())
    dg = average_linkage(d)
    # {0,1}, then {0,1} vs 2, then {0,1,2} vs 3, ...
    assert [m[:2] for m in dg.merges] == [(0, 1), (2, 5), (3, 6), (4, 7)]
    assert [sorted(r[:2]) for r in ref] == [[[0], [1]], [[0, 1], [2]], [[0, 1, 2], [3]], [[0, 1, 2, 3], [4]]]


def _members(dg: Dendrogram):
    groups = {i: [i] for i in range(dg.dim)}
    out = []
    for k, (a, b, h, _) in enumerate(dg.merges):
        groups[dg.dim + k] = groups[a] + groups[b]
        out.append(tuple(sorted((tuple(sorted(groups[a])), tuple(sorted(groups[b]))))) + (h,))
    return out


def test_matches_naive_upgma(rng):
    for _ in range(30):
        d = int(rng.integers(2, 10))
        mat = random_dissimilarity(rng, d)
        ref = upgma_ref(mat.tolist())
        got = _members(average_linkage(mat))
        for (ga, gb, gh), (ra, rb, rh) in zip(got, ref):
            assert sorted((ga, gb)) == sorted((tuple(ra), tuple(rb)))
            assert abs(gh - rh) <= 1e-12


def test_heights_agree_with_scipy(rng):
    for d in (5, 20, 60):
        mat = random_dissimilarity(rng, d)
        ours = average_linkage(mat).heights
        ref = linkage(squareform(mat, checks=False), method="average")[:, 2]
        assert np.allclose(ours, ref, atol=1e-12, rtol=0)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 100_000), d=st.integers(2, 25))
def test_heights_monotone_and_counts(seed, d):
    dg = average_linkage(random_dissimilarity(np.random.default_rng(seed), d))
    h = dg.heights
    assert len(dg.merges) == d - 1
    assert np.all(np.diff(h) >= 0)
    leaves = {m[0] for m in dg.merges} | {m[1] for m in dg.merges}
    assert set(range(d)) <= leaves


def test_rejects_bad_input():
    with pytest.raises(ValueError, match="symmetric"):
        average_linkage([[0, 0.1], [0.2, 0]])
    with pytest.raises(ValueError, match="NaN"):
        average_linkage([[0, np.nan], [np.nan, 0]])
    with pytest.raises(ValueError, match="square"):
        average_linkage(np.zeros((2, 3)))


# --- cuts -------------------------------------------------------------------

def test_cut_endpoints_and_hand_example():
    d = [[0, 0.1, 0.9], [0.1, 0, 0.7], [0.9, 0.7, 0]]
    dg = average_linkage(d)
    assert cut_at_percentile(dg, 0.0) == Blocking.singletons(3)
    assert cut_at_percentile(dg, 1.0) == Blocking.single(3)
    half = cut_at_percentile(dg, 0.5)
    assert 0.1 <= cut_height(dg, 0.5) < 0.8
    assert half.blocks == ((0, 1), (2,))


def test_zero_height_merges_still_singletons_at_p0():
    d = np.array([[0, 0, 1], [0, 0, 1], [1, 1, 0]], dtype=float)
    dg = average_linkage(d)
    assert cut_at_percentile(dg, 0.0).n_blocks == 3
    assert cut_at_percentile(dg, 0.1).n_blocks == 2


def test_percentile_out_of_range():
    dg = average_linkage([[0, 0.3], [0.3, 0]])
    for p in (-0.1, 1.1):
        with pytest.raises(ValueError):
            cut_at_percentile(dg, p)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 100_000), d=st.integers(2, 30))
def test_block_count_monotone_in_p(seed, d):
    dg = average_linkage(random_dissimilarity(np.random.default_rng(seed), d))
    grid = np.linspace(0, 1, 21)
    counts = [cut_at_percentile(dg, p).n_blocks for p in grid]
    assert counts[0] == d and counts[-1] == 1
    assert all(a >= b for a, b in zip(counts, counts[1:]))
    for p in grid:
        b = cut_at_percentile(dg, p)
        assert sorted(i for blk in b.blocks for i in blk) == list(range(d))


def test_sign_flip_leaves_blockings_unchanged(rng):
    train, _ = gen_example2(SimConfig(2, 10, 16, seed=5))
    x = train.features.copy()
    x[:, 3] = -x[:, 3]
    flipped = Dataset(x, train.labels)
    d0 = average_linkage(correlation_dissimilarity(train))
    d1 = average_linkage(correlation_dissimilarity(flipped))
    assert d0 == d1
    for p in DEFAULT_GRID:
        assert cut_at_percentile(d0, p) == cut_at_percentile(d1, p)


# --- leave-one-out selection -----------------------------------------------

def test_default_grid():
    assert DEFAULT_GRID == (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)


@pytest.mark.parametrize("gamma", [GammaSpec.EXP_SATURATE, GammaSpec.SQRT_HALF, GammaSpec.LOG1P])
def test_loocv_matches_brute_force_refits(gamma, rng):
    for _ in range(8):
        n1, n2 = int(rng.integers(3, 6)), int(rng.integers(3, 6))
        d = int(rng.integers(2, 9))
        data = rand_data(rng, n1, n2, d)
        dg = average_linkage(correlation_dissimilarity(data))
        for p in (0.0, 0.5, 1.0):
            b = cut_at_percentile(dg, p)
            assert loocv_errors(data, b, gamma) == loocv_ref(data, b, gamma)


def test_selection_grid_01_on_six_points(rng):
    data = rand_data(rng, 3, 3, 5)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sel = select_percentile_loocv(data, "exp", grid=(0.0, 1.0))
    dg = average_linkage(correlation_dissimilarity(data))
    expected = [loocv_ref(data, cut_at_percentile(dg, p), GammaSpec.EXP_SATURATE) for p in (0, 1)]
    assert list(sel.errors) == expected
    assert sel.chosen == (0.0 if expected[0] <= expected[1] else 1.0)


def test_separable_data_picks_smallest_p(rng):
    x = np.vstack([rng.normal(-10, 0.01, (4, 6)), rng.normal(10, 0.01, (4, 6))])
    data = Dataset(x, [1] * 4 + [2] * 4)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sel = select_percentile_loocv(data, "exp")
    assert all(e == 0 for e in sel.errors)
    assert sel.chosen == 0.0
    assert sel.chosen_blocking == Blocking.singletons(6)


def test_selection_errors(rng):
    with pytest.raises(ValueError, match="empty"):
        select_percentile_loocv(rand_data(rng), "exp", grid=())
    with pytest.raises(DataError):
        select_percentile_loocv(rand_data(rng, 2, 5), "exp")


def test_large_block_warning(rng):
    data = rand_data(rng, 4, 4, 6)
    with pytest.warns(UserWarning, match="bounded block sizes"):
        select_percentile_loocv(data, "exp", grid=(1.0,))
