import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ubssd.arfit import ArModel, innovation
from ubssd.core import (DimensionError, FirFilter, LinearMap, ModelDims, Partition, TimeSeries,
                        apply_fir, apply_linear, compose_demixer)


def brute_force_fir(taps, u):
    """Direct triple loop: y[:, t] = sum_l H_l u[:, t - l], zero before the start."""
    L1, rows, cols = taps.shape
    T = u.shape[1]
    y = np.zeros((rows, T))
    for t in range(T):
        for l in range(L1):
            if t - l < 0:
                continue
            for i in range(rows):
                for j in range(cols):
                    y[i, t] += taps[l, i, j] * u[j, t - l]
    return y


def naive_matmul(A, X):
    out = np.zeros((A.shape[0], X.shape[1]))
    for t in range(X.shape[1]):
        for i in range(A.shape[0]):
            out[i, t] = sum(A[i, k] * X[k, t] for k in range(A.shape[1]))
    return out


class TestTimeSeries:
    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            TimeSeries(np.array([[1.0, np.nan]]))

    def test_rejects_empty(self):
        with pytest.raises(DimensionError):
            TimeSeries(np.zeros((2, 0)))

    def test_immutable(self):
        ts = TimeSeries(np.ones((2, 3)))
        with pytest.raises(ValueError):
            ts.values[0, 0] = 5

    def test_centered_uses_steady_part(self):
        ts = TimeSeries(np.array([[100.0, 1.0, 3.0]]), transient=1)
        np.testing.assert_allclose(ts.centered().steady, [[-1.0, 1.0]])


def test_identity_filter_is_noop():
    u = TimeSeries(np.random.default_rng(0).standard_normal((3, 20)))
    assert apply_fir(FirFilter((np.eye(3),)), u) == u


def test_pure_delay():
    u = np.arange(1.0, 11.0).reshape(2, 5)
    y = apply_fir(FirFilter((np.zeros((2, 2)), np.eye(2))), TimeSeries(u))
    np.testing.assert_array_equal(y.values[:, 0], 0.0)
    np.testing.assert_array_equal(y.values[:, 1:], u[:, :-1])
    assert y.transient == 1


def test_fir_matches_brute_force():
    rng = np.random.default_rng(1)
    taps = rng.standard_normal((2, 4, 2))
    u = rng.standard_normal((2, 100))
    y = apply_fir(FirFilter.from_array(taps), TimeSeries(u))
    assert y.dim == 4 and y.len == 100
    np.testing.assert_allclose(y.values, brute_force_fir(taps, u), atol=1e-12)


def test_fir_shape_mismatch():
    with pytest.raises(DimensionError):
        apply_fir(FirFilter((np.eye(3),)), TimeSeries(np.ones((2, 4))))


def test_fir_taps_must_agree():
    with pytest.raises(DimensionError):
        FirFilter((np.eye(2), np.eye(3)))
    with pytest.raises(ValueError):
        FirFilter(())


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), a=st.floats(-5, 5), b=st.floats(-5, 5),
       L=st.integers(0, 4))
def test_fir_is_linear(seed, a, b, L):
    rng = np.random.default_rng(seed)
    F = FirFilter.from_array(rng.standard_normal((L + 1, 3, 2)))
    u, v = rng.standard_normal((2, 2, 30))
    lhs = apply_fir(F, TimeSeries(a * u + b * v)).values
    rhs = a * apply_fir(F, TimeSeries(u)).values + b * apply_fir(F, TimeSeries(v)).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-10 * (1 + abs(a) + abs(b)) * 10)


@settings(max_examples=20, deadline=None)
@given(k=st.integers(0, 6), T=st.integers(1, 15))
def test_delay_shifts_exactly(k, T):
    u = np.random.default_rng(k * 100 + T).standard_normal((2, T))
    taps = np.zeros((k + 1, 2, 2))
    taps[k] = np.eye(2)
    y = apply_fir(FirFilter.from_array(taps), TimeSeries(u)).values
    expect = np.zeros_like(u)
    if k < T:
        expect[:, k:] = u[:, :T - k]
    np.testing.assert_array_equal(y, expect)


class TestApplyLinear:
    def test_identity(self):
        u = TimeSeries(np.random.default_rng(2).standard_normal((2, 10)))
        assert apply_linear(LinearMap(np.eye(2)), u) == u

    def test_zero(self):
        u = TimeSeries(np.random.default_rng(2).standard_normal((2, 10)))
        np.testing.assert_array_equal(apply_linear(LinearMap(np.zeros((2, 2))), u).values, 0)

    def test_matches_naive(self):
        rng = np.random.default_rng(3)
        A, X = rng.standard_normal((3, 2)), rng.standard_normal((2, 10))
        np.testing.assert_allclose(apply_linear(LinearMap(A), TimeSeries(X)).values,
                                   naive_matmul(A, X), atol=1e-13)

    def test_mismatch(self):
        with pytest.raises(DimensionError):
            apply_linear(LinearMap(np.eye(3)), TimeSeries(np.ones((2, 2))))


class TestComposeDemixer:
    def test_order_zero_identity(self):
        F = compose_demixer(LinearMap(np.eye(3)), LinearMap(np.eye(3)),
                            ArModel((), np.eye(3)))
        assert F.degree == 0
        np.testing.assert_array_equal(F.taps[0], np.eye(3))

    def test_ar1_taps(self):
        A1 = np.array([[0.5, 0.1], [-0.2, 0.3]])
        F = compose_demixer(LinearMap(np.eye(2)), LinearMap(np.eye(2)), ArModel((A1,), np.eye(2)))
        np.testing.assert_array_equal(F.taps[0], np.eye(2))
        np.testing.assert_array_equal(F.taps[1], -A1)

    def test_matches_staged_application(self):
        rng = np.random.default_rng(4)
        D_x, D_s, Q, T = 6, 3, 3, 200
        model = ArModel(tuple(0.2 * rng.standard_normal((D_x, D_x)) for _ in range(Q)),
                        np.eye(D_x))
        w_pca, w_isa = LinearMap(rng.standard_normal((D_s, D_x))), LinearMap(rng.standard_normal((D_s, D_s)))
        x = TimeSeries(rng.standard_normal((D_x, T)))
        composed = apply_fir(compose_demixer(w_isa, w_pca, model), x)
        staged = apply_linear(w_isa, apply_linear(w_pca, innovation(x, model)))
        # staged output starts at t = Q; the composed filter is exact beyond the transient
        np.testing.assert_allclose(composed.values[:, Q:], staged.values, atol=1e-10)

    def test_chain_mismatch(self):
        with pytest.raises(DimensionError):
            compose_demixer(LinearMap(np.eye(2)), LinearMap(np.eye(3)), ArModel((), np.eye(3)))
        with pytest.raises(DimensionError):
            compose_demixer(LinearMap(np.eye(2)), LinearMap(np.ones((2, 3))), ArModel((), np.eye(4)))


class TestPartitionAndDims:
    def test_groups_must_be_equal(self):
        with pytest.raises(ValueError):
            Partition(2, 2, (0, 0, 0, 1))

    def test_from_groups_canonical(self):
        p = Partition.from_groups([[3, 1], [0, 2]])
        assert p.groups == [[0, 2], [1, 3]]

    def test_undercomplete_required(self):
        with pytest.raises(ValueError):
            ModelDims(d=2, M=2, D_x=4, L=1, T=100)
        assert ModelDims(2, 2, 8, 1, 100).D_s == 4
