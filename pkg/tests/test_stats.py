import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robinsim.stats import BatchAccumulator, geometric_rate, log_slope, merge, merge_many


def test_from_samples_matches_numpy():
    rng = np.random.default_rng(7)
    x = rng.normal(3.0, 2.0, size=1000)
    acc = BatchAccumulator.from_samples(x)
    assert acc.n == 1000
    assert acc.mean == pytest.approx(np.mean(x), rel=1e-12)
    assert acc.variance == pytest.approx(np.var(x, ddof=1), rel=1e-12)
    assert acc.stderr == pytest.approx(np.std(x, ddof=1) / np.sqrt(1000.0), rel=1e-12)
    assert acc.ci95 == pytest.approx(1.96 * acc.stderr, rel=1e-12)


def test_merge_equals_single_pass():
    rng = np.random.default_rng(11)
    x = rng.exponential(1.0, size=997)
    whole = BatchAccumulator.from_samples(x)
    parts = [BatchAccumulator.from_samples(c) for c in np.array_split(x, 13)]
    merged = merge_many(parts)
    assert merged.n == whole.n
    assert merged.mean == pytest.approx(whole.mean, rel=1e-12)
    assert merged.variance == pytest.approx(whole.variance, rel=1e-12)


def test_merge_with_empty_is_identity():
    x = np.array([1.0, 2.0, 4.0])
    acc = BatchAccumulator.from_samples(x)
    out = merge(acc, BatchAccumulator.empty())
    assert out.n == acc.n
    assert out.mean == pytest.approx(acc.mean)
    assert out.variance == pytest.approx(acc.variance)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(
        st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
        min_size=2,
        max_size=200,
    ),
    st.integers(min_value=1, max_value=7),
)
def test_merge_split_invariance(values, pieces):
    x = np.asarray(values)
    whole = BatchAccumulator.from_samples(x)
    parts = [
        BatchAccumulator.from_samples(c)
        for c in np.array_split(x, min(pieces, len(values)))
    ]
    merged = merge_many(parts)
    assert merged.n == whole.n
    assert merged.mean == pytest.approx(whole.mean, rel=1e-9, abs=1e-9)
    assert merged.variance == pytest.approx(whole.variance, rel=1e-9, abs=1e-9)


def test_merge_is_associative():
    rng = np.random.default_rng(3)
    a, b, c = (BatchAccumulator.from_samples(rng.normal(size=50)) for _ in range(3))
    left = merge(merge(a, b), c)
    right = merge(a, merge(b, c))
    assert left.mean == pytest.approx(right.mean, rel=1e-12)
    assert left.variance == pytest.approx(right.variance, rel=1e-12)


def test_log_slope_recovers_halving():
    vals = 5.0 * 0.5 ** np.arange(12)
    assert log_slope(vals) == pytest.approx(-np.log(2.0), rel=1e-12)


def test_log_slope_rejects_nonpositive():
    with pytest.raises(ValueError):
        log_slope(np.array([1.0, 0.0, 2.0]))


def test_geometric_rate_absorbs_polynomial_factor():
    k = np.arange(1, 21, dtype=float)
    vals = 3.0 * k**1.7 * 0.8**k
    assert geometric_rate(vals) == pytest.approx(np.log(0.8), abs=1e-9)
    flat = 2.0 * k**0.5
    assert geometric_rate(flat) == pytest.approx(0.0, abs=1e-9)


def test_geometric_rate_needs_enough_points():
    with pytest.raises(ValueError):
        geometric_rate(np.array([1.0, 0.5, 0.25]))


def test_ci95_refuses_small_samples():
    acc = BatchAccumulator.from_samples(np.arange(10.0))
    with pytest.raises(ValueError):
        acc.ci95
