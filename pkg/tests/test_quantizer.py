import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from qsgd import (
    ConfigError,
    NormMode,
    QuantizerConfig,
    Scheme,
    dequantize,
    level_assign,
    quantize,
    quantize_bucket,
    substream,
)


def cfg(**kw):
    return QuantizerConfig(**kw)


# ---------------------------------------------------------------- level rule


def test_level_assign_examples():
    assert level_assign(0.0, 4, 0.9) == 0
    assert level_assign(1.0, 4, 0.0) == 4
    assert level_assign(1.0, 4, 0.999) == 4
    # 0.3 * 4 = 1.2 -> floor 1, promotion probability 0.2
    assert level_assign(0.3, 4, 0.1) == 2
    assert level_assign(0.3, 4, 0.5) == 1


def test_level_assign_vectorized():
    a = np.array([0.0, 0.3, 0.3, 1.0])
    u = np.array([0.5, 0.1, 0.5, 0.2])
    out = level_assign(a, 4, u)
    assert out.dtype == np.int32
    assert list(out) == [0, 2, 1, 4]


def test_level_assign_rejects_out_of_range():
    with pytest.raises(ValueError):
        level_assign(1.5, 4, 0.5)
    with pytest.raises(ValueError):
        level_assign(-0.1, 4, 0.5)
    with pytest.raises(ValueError):
        level_assign(np.array([0.2, np.nan]), 4, np.array([0.5, 0.5]))


def test_level_assign_is_unbiased():
    rng = substream(7, "levels")
    a = 0.3
    s = 4
    draws = level_assign(np.full(200_000, a), s, rng.random(200_000))
    se = draws.std() / math.sqrt(draws.size) / s
    assert abs(draws.mean() / s - a) <= 5 * se


def test_level_grid_is_exact_on_grid_points():
    # When a*s is an integer no randomness is involved.
    for ell in range(5):
        out = level_assign(np.full(16, ell / 4), 4, substream(1, "u").random(16))
        assert (out == ell).all()


# ---------------------------------------------------------------- one bucket


def test_zero_bucket():
    q = quantize_bucket(np.zeros(5), 4)
    assert q.scale == 0.0
    assert (q.levels == 0).all()
    assert (q.signs == 1).all()
    assert (dequantize_bucket_values(q, 4) == 0).all()


def dequantize_bucket_values(bucket, s):
    return bucket.scale * bucket.signs * (bucket.levels / s)


def test_one_hot_bucket_is_deterministic():
    v = np.array([0.0, -5.0, 0.0])
    q = quantize_bucket(v, 4, rng=substream(0, "irrelevant"))
    assert q.scale == 5.0
    assert list(q.levels) == [0, 4, 0]
    assert list(q.signs) == [1, -1, 1]
    assert (dequantize_bucket_values(q, 4) == v).all()


def test_scale_is_float32_rounded():
    v = np.array([0.1, 0.2, -0.2])
    q = quantize_bucket(v, 1)
    assert q.scale == float(np.float32(np.linalg.norm(v)))


def test_scale_overflow_raises():
    with pytest.raises(ValueError):
        quantize_bucket(np.array([1e39]), 1)


def test_max_norm_single_coordinate_identity():
    rng = substream(3, "f32")
    vals = rng.standard_normal(64).astype(np.float32).astype(np.float64)
    for v in vals:
        q = quantize_bucket(np.array([v]), 7, norm_mode=NormMode.MAX)
        assert dequantize_bucket_values(q, 7)[0] == v


def test_bucket_two_level_probabilities():
    # v = (3, 4), unit levels: P(level_0 = 1) = 3/5, P(level_1 = 1) = 4/5.
    rng = substream(9, "mc")
    n = 20_000
    hits = np.zeros(2)
    for _ in range(n):
        q = quantize_bucket(np.array([3.0, 4.0]), 1, rng=rng)
        hits += q.levels
    for k, p in enumerate([0.6, 0.8]):
        se = math.sqrt(p * (1 - p) / n)
        assert abs(hits[k] / n - p) <= 5 * se


# ---------------------------------------------------------------- full vector


def test_bucket_split_sizes():
    v = substream(2, "v").standard_normal(1000)
    q = quantize(v, cfg(levels=1, bucket_size=512))
    assert [b.dim for b in q.buckets] == [512, 488]
    assert q.total_dim == 1000


def test_dequantize_shape_and_grid():
    v = substream(4, "v").standard_normal(300)
    c = cfg(levels=4, bucket_size=128)
    q = quantize(v, c)
    x = dequantize(q)
    assert x.shape == v.shape
    start = 0
    for b in q.buckets:
        seg = x[start : start + b.dim]
        grid = b.scale * (np.arange(5) / 4)
        assert np.isin(np.abs(seg), grid).all()
        start += b.dim


def test_zero_coordinates_stay_zero():
    v = np.array([0.0, 2.0, 0.0, -1.0, 0.0])
    for trial in range(50):
        q = quantize(v, cfg(levels=2, bucket_size=5, seed=11), nonce=(trial,))
        x = dequantize(q)
        assert (x[v == 0] == 0).all()


def test_nonce_reproducibility():
    v = substream(5, "v").standard_normal(100)
    c = cfg(levels=2, bucket_size=32, seed=42)
    a = dequantize(quantize(v, c, nonce=(3,)))
    b = dequantize(quantize(v, c, nonce=(3,)))
    other = dequantize(quantize(v, c, nonce=(4,)))
    assert (a == b).all()
    assert (a != other).any()


def test_explicit_rng_consumes_sequentially():
    v = substream(6, "v").standard_normal(100)
    c = cfg(levels=2, bucket_size=32, seed=0)
    out1 = dequantize(quantize(v, c, rng=substream(1, "q")))
    rng = substream(1, "q")
    out2 = dequantize(quantize(v, c, rng=rng))
    assert (out1 == out2).all()
    # The same generator keeps advancing, so a second call differs.
    out3 = dequantize(quantize(v, c, rng=rng))
    assert (out3 != out2).any()


def test_unbiasedness_montecarlo():
    v = substream(8, "v").standard_normal(32)
    c = cfg(levels=4, bucket_size=32)
    n = 20_000
    rng = substream(8, "q")
    draws = np.empty((n, 32))
    for i in range(n):
        draws[i] = dequantize(quantize(v, c, rng=rng))
    se = draws.std(axis=0, ddof=1) / math.sqrt(n)
    assert (np.abs(draws.mean(axis=0) - v) <= 5 * np.maximum(se, 1e-12) + 1e-12).all()


def variance_bound(d, s):
    return min(d / s**2, math.sqrt(d) / s)


@pytest.mark.parametrize("d,s", [(16, 1), (16, 4), (512, 1), (512, 4), (512, 16)])
def test_second_moment_inflation(d, s):
    v = substream(100 + d + s, "v").standard_normal(d)
    c = cfg(levels=s, bucket_size=d)
    rng = substream(100 + d + s, "q")
    n = 1500
    total = 0.0
    for _ in range(n):
        err = dequantize(quantize(v, c, rng=rng)) - v
        total += err @ err
    ratio = total / n / (v @ v)
    assert ratio <= variance_bound(d, s) * 1.01


def test_expected_support_size():
    d, s = 10_000, 1
    v = substream(55, "v").standard_normal(d)
    c = cfg(levels=s, bucket_size=d)
    rng = substream(55, "q")
    n = 200
    nnz = sum(np.count_nonzero(dequantize(quantize(v, c, rng=rng))) for _ in range(n)) / n
    assert nnz <= (s * (s + math.sqrt(d)) + 1) * 1.05


# ---------------------------------------------------------------- properties

finite_vectors = hnp.arrays(
    np.float64,
    st.integers(1, 40),
    elements=st.floats(-1e6, 1e6, allow_nan=False, width=32),
)


@settings(deadline=None)
@given(finite_vectors, st.integers(1, 16), st.sampled_from([NormMode.L2, NormMode.MAX]))
def test_quantize_invariants(v, s, norm_mode):
    c = cfg(levels=s, bucket_size=16, norm_mode=norm_mode, seed=1)
    q = quantize(v, c, nonce=(0,))
    assert q.total_dim == v.size
    start = 0
    for b in q.buckets:
        assert b.scale >= 0.0
        assert ((b.levels >= 0) & (b.levels <= s)).all()
        assert np.isin(b.signs, [-1, 1]).all()
        seg = v[start : start + b.dim]
        if b.scale == 0.0:
            assert (b.levels == 0).all()
        assert (b.levels[seg == 0] == 0).all()
        assert (b.signs[seg > 0] == 1).all()
        assert (b.signs[seg < 0] == -1).all()
        start += b.dim
    x = dequantize(q)
    assert np.isfinite(x).all()
    assert (np.sign(x) == np.sign(v))[x != 0].all()


# ---------------------------------------------------------------- validation


def test_config_validation():
    with pytest.raises(ConfigError):
        cfg(levels=0)
    with pytest.raises(ConfigError):
        cfg(levels=-3)
    with pytest.raises(ConfigError):
        cfg(bucket_size=0)
    with pytest.raises(ConfigError):
        cfg(levels=2.5)
    with pytest.raises(ConfigError):
        cfg(norm_mode="euclid")
    with pytest.raises(ConfigError):
        cfg(scheme="fancy")
    assert cfg(norm_mode="max").norm_mode is NormMode.MAX
    assert cfg(scheme="dense").scheme is Scheme.DENSE


def test_quantize_rejects_bad_input():
    c = cfg(levels=1, bucket_size=8)
    with pytest.raises(ValueError):
        quantize(np.array([1.0, np.inf]), c)
    with pytest.raises(ValueError):
        quantize(np.zeros((2, 2)), c)
    with pytest.raises(ValueError):
        quantize(np.array([]), c)
