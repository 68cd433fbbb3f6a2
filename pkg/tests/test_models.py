import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from hcmm.models import (
    ClusterSpec,
    RuntimeModel,
    WorkerSpec,
    cdf_runtime,
    mean_runtime,
    runtime_quantile,
    sample_runtime,
    unit_time,
)
from oracles import mean_runtime_oracle, runtime_cdf_oracle

positive = st.floats(min_value=1e-3, max_value=1e3, allow_nan=False, allow_infinity=False)
shapes = st.floats(min_value=0.3, max_value=5.0)


def test_model_validation():
    with pytest.raises(ValueError):
        RuntimeModel(0.0, 1.0)
    with pytest.raises(ValueError):
        RuntimeModel(1.0, -2.0)
    with pytest.raises(ValueError):
        RuntimeModel(1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        RuntimeModel(float("nan"), 1.0)
    assert RuntimeModel.exponential(1, 2).kind == "exponential"
    assert RuntimeModel.weibull(1, 2, 1.5).kind == "weibull"
    assert RuntimeModel(1, 2).shape == 1.0


def test_cluster_spec():
    m1, m2 = RuntimeModel(1, 1), RuntimeModel(4, 0.5)
    c = ClusterSpec.from_groups([(2, m1), (3, m2)])
    assert c.n == 5
    assert [w.id for w in c.workers] == list(range(5))
    a, mu, alpha = c.params()
    np.testing.assert_array_equal(a, [1, 1, 4, 4, 4])
    np.testing.assert_array_equal(alpha, np.ones(5))
    with pytest.raises(ValueError):
        ClusterSpec(())
    with pytest.raises(ValueError):
        ClusterSpec((WorkerSpec(0, m1), WorkerSpec(0, m2)))


def test_cdf_support_and_shift():
    m = RuntimeModel(2.0, 0.5)
    assert cdf_runtime(m, 3, 5.9) == 0.0
    assert cdf_runtime(m, 3, 6.0) == 0.0
    assert cdf_runtime(m, 3, 1e9) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        cdf_runtime(m, 0, 1.0)


@given(positive, positive, shapes, st.integers(1, 10_000), st.floats(0.0, 20.0))
def test_cdf_matches_scipy(a, mu, alpha, load, excess):
    m = RuntimeModel(a, mu, alpha)
    t = a * load + excess * load / mu
    assert cdf_runtime(m, load, t) == pytest.approx(runtime_cdf_oracle(a, mu, alpha, load, t), abs=1e-12)


@given(positive, positive, shapes, st.integers(1, 1000), st.floats(1e-9, 1 - 1e-9))
def test_quantile_inverts_cdf(a, mu, alpha, load, u):
    m = RuntimeModel(a, mu, alpha)
    t = runtime_quantile(m, load, u)
    assert t >= a * load
    # t - a*load cancels when the tail is tiny next to the shift; scale the tolerance
    tail = t - a * load
    cond = 1.0 + a * load / max(tail, 1e-300)
    assert cdf_runtime(m, load, t) == pytest.approx(u, rel=1e-12 * cond * (1 + 1 / alpha) + 1e-9)


@pytest.mark.parametrize("a,mu,alpha,load", [(1, 1, 1, 1), (4, 0.5, 1, 100), (1, 0.5, 0.9, 20), (12, 0.25, 1.5, 7)])
def test_mean_matches_quadrature(a, mu, alpha, load):
    m = RuntimeModel(a, mu, None if alpha == 1 else alpha)
    assert mean_runtime(m, load) == pytest.approx(mean_runtime_oracle(a, mu, alpha, load), rel=1e-9)


def test_unit_time():
    assert unit_time(RuntimeModel(1.0, 2.0)) == pytest.approx(1.5)


def test_samples_follow_law():
    m = RuntimeModel(1.0, 0.5, 1.2)
    x = sample_runtime(m, 10, np.random.default_rng(3), size=20_000)
    ks = stats.kstest(x - 10.0, stats.weibull_min(c=1.2, scale=20.0).cdf)
    assert ks.pvalue > 1e-3
    assert abs(x.mean() - mean_runtime(m, 10)) < 4 * x.std() / math.sqrt(x.size)


def test_sampling_is_seeded():
    m = RuntimeModel(1.0, 1.0)
    a = sample_runtime(m, 5, np.random.default_rng(9), size=10)
    b = sample_runtime(m, 5, np.random.default_rng(9), size=10)
    np.testing.assert_array_equal(a, b)
