import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subdivlab.core import RandomSource
from subdivlab.stats import (
    StreamingMoments,
    fit_slope,
    kolmogorov_sf,
    ks_2samp,
    ks_critical_value,
    ks_test,
    merge,
    merge_all,
    uniform_cdf,
)


def test_merge_with_empty_is_identity():
    a = StreamingMoments.of([1.0, 2.0, 5.0])
    for m in (merge(a, StreamingMoments()), merge(StreamingMoments(), a)):
        assert m.count == 3
        assert np.allclose(m.mean, a.mean) and np.allclose(m.m2, a.m2)


def test_merge_small_sets():
    m = merge(StreamingMoments.of([1.0, 2.0]), StreamingMoments.of([3.0, 4.0]))
    assert m.count == 4
    assert m.mean[0] == 2.5
    assert m.variance()[0] == pytest.approx(np.var([1, 2, 3, 4]))


def test_merge_dimension_mismatch():
    with pytest.raises(ValueError):
        merge(StreamingMoments.of(np.ones((3, 2))), StreamingMoments.of([1.0, 2.0]))


def test_shards_match_single_pass():
    x = RandomSource(1).uniform(10**6)
    whole = StreamingMoments.of(x)
    cuts = np.sort(RandomSource(2).integers(10**6, size=9))
    parts = merge_all(StreamingMoments.of(s) for s in np.split(x, cuts))
    assert parts.count == whole.count
    assert abs(parts.mean[0] / whole.mean[0] - 1) < 1e-12
    assert abs(parts.variance()[0] / whole.variance()[0] - 1) < 1e-12


def test_large_offset_variance_is_stable():
    u = RandomSource(3).uniform(10**6)
    acc = merge_all(StreamingMoments.of(c) for c in np.array_split(1e9 + u, 16))
    # the offset costs ~1e-7 absolute precision per value, so compare
    # against the variance of the uniforms as actually stored
    assert abs(acc.variance()[0] / np.var(u) - 1) < 1e-6
    assert abs(acc.variance()[0] * 12 - 1) < 1e-2


def test_covariance_matches_numpy():
    x = RandomSource(4).uniform((1000, 3))
    acc = merge_all(StreamingMoments.of(c) for c in np.array_split(x, 7))
    assert np.allclose(acc.covariance(ddof=1), np.cov(x.T), rtol=1e-12, atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=60), st.integers(1, 59), st.integers(1, 59))
def test_merge_is_associative(xs, i, j):
    i, j = sorted((min(i, len(xs)), min(j, len(xs))))
    a, b, c = (StreamingMoments.of(xs[s]) for s in (slice(0, i), slice(i, j), slice(j, None)))
    left = merge(merge(a, b), c)
    right = merge(a, merge(b, c))
    full = StreamingMoments.of(xs)
    scale = max(1.0, float(np.max(np.abs(xs))))
    assert left.count == right.count == len(xs)
    assert abs(left.mean[0] - right.mean[0]) <= 1e-12 * scale
    assert abs(left.m2[0, 0] - full.m2[0, 0]) <= 1e-9 * max(full.m2[0, 0], scale * scale)


def test_ks_near_perfect_fit():
    n = 99
    r = ks_test(np.arange(1, n + 1) / (n + 1), uniform_cdf(0, 1))
    assert r.d_statistic == pytest.approx(1 / (n + 1))
    assert r.p_value > 0.999


def test_ks_point_mass():
    r = ks_test(np.full(20, 0.5), uniform_cdf(0, 1))
    assert r.d_statistic == 0.5


def test_ks_errors():
    with pytest.raises(ValueError):
        ks_test([], uniform_cdf(0, 1))
    with pytest.raises(ValueError):
        ks_test([0.1, 0.2], uniform_cdf(0, 1))


def test_kolmogorov_sf_known_values():
    # P(K > 1.36) ~ 0.05 and P(K > 1.63) ~ 0.01
    assert kolmogorov_sf(1.358) == pytest.approx(0.05, abs=2e-4)
    assert kolmogorov_sf(1.628) == pytest.approx(0.01, abs=1e-4)
    assert kolmogorov_sf(0.0) == 1.0
    # the two series agree where they meet
    assert kolmogorov_sf(1.0 - 1e-12) == pytest.approx(kolmogorov_sf(1.0), abs=1e-9)
    assert ks_critical_value(1) == pytest.approx(1.6276, abs=1e-3)


def test_kolmogorov_sf_against_scipy():
    stats = pytest.importorskip("scipy.stats")
    for lam in (0.3, 0.6, 0.9, 1.1, 1.5, 2.2):
        assert kolmogorov_sf(lam) == pytest.approx(stats.kstwobign.sf(lam), abs=1e-9)


def test_ks_calibration_on_uniform_halves():
    src = RandomSource(2024)
    passes = sum(ks_test(0.5 + 0.5 * src.child(k).uniform(10**5), uniform_cdf(0.5, 1.0)).p_value > 0.01 for k in range(100))
    assert passes >= 98


@pytest.mark.slow
def test_ks_rejection_rate_under_null():
    src = RandomSource(77)
    rejections = sum(ks_test(src.child(k).uniform(10**4), uniform_cdf(0, 1)).p_value < 0.01 for k in range(1000))
    assert 5 <= rejections <= 15


def test_ks_2samp_against_scipy():
    stats = pytest.importorskip("scipy.stats")
    src = RandomSource(8)
    x, y = src.uniform(3000), src.uniform(2000) ** 1.05
    r = ks_2samp(x, y)
    ref = stats.ks_2samp(x, y)
    assert r.d_statistic == pytest.approx(ref.statistic, abs=1e-12)
    en = 3000 * 2000 / 5000
    assert r.p_value == pytest.approx(stats.kstwobign.sf(math.sqrt(en) * ref.statistic), abs=1e-9)


def test_fit_slope_exact_line():
    xs = np.arange(10.0)
    s, b, se = fit_slope(xs, 2 * xs + 1)
    assert s == pytest.approx(2) and b == pytest.approx(1) and se == pytest.approx(0, abs=1e-12)


def test_fit_slope_constant_and_noisy():
    xs = np.arange(100.0)
    assert fit_slope(xs, np.full(100, 3.0))[0] == 0.0
    noise = RandomSource(9).generator.normal(0, 0.01, 100)
    s, _, se = fit_slope(xs, -0.5 * xs + noise)
    assert abs(s + 0.5) < 3 * se


def test_fit_slope_errors():
    with pytest.raises(ValueError):
        fit_slope([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValueError):
        fit_slope([1, 2], [1, 2])


def test_stderr():
    acc = StreamingMoments.of(np.array([1.0, 2.0, 3.0, 4.0]))
    assert acc.stderr()[0] == pytest.approx(math.sqrt(np.var([1, 2, 3, 4], ddof=1) / 4))
