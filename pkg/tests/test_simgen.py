import numpy as np
import pytest

from gsavg.blocking import correlation_dissimilarity
from gsavg.dissim import Blocking
from gsavg.simgen import SimConfig, gen_example1, gen_example2, gen_example3, generate, sign

BIG = 10_000


def cls(data, c):
    return data.class_rows(c)


def test_config_validation():
    for kw in ({"example": 4}, {"dim": 3}, {"n_per_class": 1}, {"seed": -1}):
        base = dict(example=1, n_per_class=5, dim=8, seed=0)
        base.update(kw)
        with pytest.raises(ValueError):
            SimConfig(**base)


@pytest.mark.parametrize("example", [1, 2, 3])
def test_deterministic(example):
    a, ba = generate(SimConfig(example, 7, 13, 99))
    b, bb = generate(SimConfig(example, 7, 13, 99))
    assert a.features.tobytes() == b.features.tobytes()
    assert ba == bb
    c, _ = generate(SimConfig(example, 7, 13, 100))
    assert not np.array_equal(a.features, c.features)


@pytest.mark.parametrize("example, dim", [(1, 9), (2, 10), (3, 7)])
def test_oracle_blockings_are_pairs(example, dim):
    data, b = generate(SimConfig(example, 3, dim, 0))
    assert b == Blocking.consecutive(dim, 2)
    assert data.class_counts() == (3, 3)


def test_example1_variances_d4():
    data, _ = gen_example1(SimConfig(1, BIG, 4, 1))
    v1 = cls(data, 1).var(axis=0, ddof=1)
    v2 = cls(data, 2).var(axis=0, ddof=1)
    assert np.allclose(v1, [1, 1, 0.5, 0.5], atol=0.05)
    assert np.allclose(v2, [0.5, 0.5, 1, 1], atol=0.05)
    assert np.all(np.abs(data.features.mean(axis=0)) <= 0.05)


def test_example1_odd_dimension_layout():
    data, _ = gen_example1(SimConfig(1, BIG, 5, 2))
    # floor(5/2) = 2: class 1 (1,1,.5,.5,.5); class 2 (.5,.5,.5,1,1)
    assert np.allclose(cls(data, 1).var(axis=0), [1, 1, 0.5, 0.5, 0.5], atol=0.05)
    assert np.allclose(cls(data, 2).var(axis=0), [0.5, 0.5, 0.5, 1, 1], atol=0.05)


def test_example1_equal_location_and_scale():
    data, _ = gen_example1(SimConfig(1, 2000, 200, 3))
    diff = cls(data, 1).mean(axis=0) - cls(data, 2).mean(axis=0)
    assert np.mean(diff**2) < 0.01
    t1 = cls(data, 1).var(axis=0).sum() / 200
    t2 = cls(data, 2).var(axis=0).sum() / 200
    assert abs(t1 - t2) < 0.02


def test_sign_convention():
    assert sign(np.array([-1.0, 0.0, 2.0])).tolist() == [-1.0, 1.0, 1.0]


@pytest.mark.parametrize("gen", [gen_example2, gen_example3])
def test_sign_coupling(gen):
    data, _ = gen(SimConfig(2 if gen is gen_example2 else 3, BIG, 8, 4))
    x1, x2 = cls(data, 1), cls(data, 2)
    for k in (0, 4):
        assert np.all(np.sign(x1[:, k + 2]) == np.sign(x1[:, k + 3]))
        assert np.all(np.sign(x2[:, k]) == np.sign(x2[:, k + 1]))
        # uncoupled pairs agree in sign about half the time
        assert abs(np.mean(np.sign(x1[:, k]) == np.sign(x1[:, k + 1])) - 0.5) <= 0.02
        assert abs(np.mean(np.sign(x2[:, k + 2]) == np.sign(x2[:, k + 3])) - 0.5) <= 0.02


def test_example2_marginals():
    data, _ = gen_example2(SimConfig(2, BIG, 10, 5))
    for c in (1, 2):
        x = cls(data, c)
        assert np.all(np.abs(x.mean(axis=0)) <= 0.05)
        assert np.all(np.abs(x.var(axis=0, ddof=1) - 1) <= 0.05)


def test_partial_run_uncoupled():
    data, _ = gen_example2(SimConfig(2, BIG, 6, 6))
    x2 = cls(data, 2)
    # coordinates 5-6 form an incomplete run of four and stay independent
    assert abs(np.mean(np.sign(x2[:, 4]) == np.sign(x2[:, 5])) - 0.5) <= 0.02


def test_example3_medians_and_heavy_tails():
    data, _ = gen_example3(SimConfig(3, BIG, 8, 7))
    for c in (1, 2):
        x = cls(data, c)
        assert np.all(np.abs(np.median(x, axis=0)) <= 0.1)
        # standard Cauchy quartiles are +-1
        assert np.allclose(np.percentile(x, 75, axis=0), 1, atol=0.1)


def test_example3_spearman_detects_coupled_pair():
    data, _ = gen_example3(SimConfig(3, 500, 8, 8))
    l = correlation_dissimilarity(data.class_rows(1), "spearman")
    assert l[2, 3] < l[0, 2] - 0.3
