import numpy as np
import pytest

from ubssd.core import FirFilter, ModelDims, TimeSeries, apply_fir
from ubssd.datagen import SourceSpec, make_scene
from ubssd.metrics import GlobalMatrix, amari_index
from ubssd.pipelines import (DeconvResult, PipelineError, lag_predecessor_scores, lpa_deconvolve,
                             run_method, stack_lags, stacked_mixing, stacking_depth, tcc_deconvolve)

LETTERS = SourceSpec("letters", 2, 2)


@pytest.fixture(scope="module")
def scene():
    return make_scene(LETTERS, ModelDims(2, 2, 8, 2, 20_000), seed=3)


@pytest.mark.parametrize("L", [0, 1, 5, 30])
def test_stacking_depth_twice_Ds(L):
    assert stacking_depth(8, 4, L) == max(L, 1)


def test_stacking_depth_general():
    # 6 L' >= 4 (2 + L') -> L' >= 4
    assert stacking_depth(6, 4, 2) == 4
    with pytest.raises(ValueError):
        stacking_depth(4, 4, 1)


def test_stack_lags():
    x = np.arange(10.0).reshape(2, 5)
    X = stack_lags(x, 2)
    np.testing.assert_array_equal(X, [[1, 2, 3, 4], [6, 7, 8, 9], [0, 1, 2, 3], [5, 6, 7, 8]])


def test_stacked_mixing_reproduces_stacked_observation():
    rng = np.random.default_rng(0)
    taps = FirFilter.from_array(rng.standard_normal((3, 6, 2)))
    s = rng.standard_normal((2, 40))
    x = apply_fir(taps, TimeSeries(s)).values
    depth = 2
    H = stacked_mixing(taps, depth)
    X = stack_lags(x, depth)
    n_lag = taps.degree + depth
    for col, t in enumerate(range(depth - 1, 40)):
        if t - n_lag + 1 < 0:
            continue
        s_bar = np.concatenate([s[:, t - j] for j in range(n_lag)])
        np.testing.assert_allclose(X[:, col], H @ s_bar, atol=1e-12)


def test_predecessor_scores_find_newest_lag():
    rng = np.random.default_rng(1)
    s = rng.standard_normal((2, 5001))
    y = np.vstack([s[:, :-1], s[:, 1:]])  # group 1 is the newer copy
    scores = lag_predecessor_scores(y, 2)
    assert scores[0] > 0.9 and scores[1] < 0.05


def test_lpa_letters(scene):
    res = lpa_deconvolve(scene.observation, scene.dims, seed=0, h0=scene.ground_truth_H0)
    assert res.method == "LPA"
    assert res.amari < 0.02
    assert res.diagnostics["ar_order"] == scene.dims.L
    assert res.diagnostics["ar_q_max"] == 2 * (scene.dims.L + 1)
    assert res.amari == amari_index(GlobalMatrix(res.g_matrix.matrix, 2))
    assert res.estimates.dim == 4 and res.estimates.transient == 0
    assert set(res.timings) >= {"ar_fit", "innovation", "isa", "demix", "evaluate"}


def test_lpa_estimates_follow_from_demixer(scene):
    res = lpa_deconvolve(scene.observation, scene.dims, seed=0)
    assert res.amari is None and res.g_matrix is None
    xc = scene.observation.centered()
    np.testing.assert_allclose(res.estimates.values, apply_fir(res.demixer, xc).steady, atol=1e-12)
    # the estimates are the sources up to a block-wise invertible map
    skip = scene.observation.transient + res.demixer.degree
    C = np.corrcoef(np.vstack([res.estimates.values, scene.sources.values[:, skip:]]))
    cross = np.abs(C[:4, 4:])
    blocks = cross.reshape(2, 2, 2, 2).sum(axis=(1, 3))
    assert np.all(blocks.max(axis=1) > 5 * np.sort(blocks, axis=1)[:, 0])


def test_lpa_deterministic(scene):
    a = lpa_deconvolve(scene.observation, scene.dims, seed=4, h0=scene.ground_truth_H0)
    b = lpa_deconvolve(scene.observation, scene.dims, seed=4, h0=scene.ground_truth_H0)
    assert a.amari == b.amari
    np.testing.assert_array_equal(a.demixer.stacked(), b.demixer.stacked())


def test_lpa_instantaneous_selects_order_zero():
    orders = []
    for seed in range(5):
        sc = make_scene(LETTERS, ModelDims(2, 2, 8, 0, 10_000), seed=seed)
        orders.append(lpa_deconvolve(sc.observation, sc.dims, seed=0).diagnostics["ar_order"])
    assert sum(q == 0 for q in orders) >= 3


def test_tcc_letters(scene):
    res = tcc_deconvolve(scene.observation, scene.dims, seed=0, mixing=scene.mixing)
    L = scene.dims.L
    assert res.method == "TCC"
    assert res.diagnostics["stack_depth"] == L
    assert res.diagnostics["stacked_components"] == 2 * 2 * L
    assert 0 <= res.amari <= 1 and 0 <= res.diagnostics["amari_lag0"] <= 1
    assert res.amari == amari_index(GlobalMatrix(res.g_matrix.matrix, 2))
    assert res.amari < 0.05
    assert res.demixer.rows == 4 and res.demixer.degree == L - 1


def test_tcc_needs_twice_Ds():
    sc = make_scene(LETTERS, ModelDims(2, 2, 6, 1, 500), seed=0)
    with pytest.raises(ValueError):
        tcc_deconvolve(sc.observation, sc.dims)


def test_stage_failure_is_identified():
    sc = make_scene(LETTERS, ModelDims(2, 2, 8, 5, 60), seed=0)
    with pytest.raises(PipelineError) as info:
        lpa_deconvolve(sc.observation, sc.dims)
    assert info.value.stage == "ar_fit"


def test_run_method_and_record(scene):
    res = run_method("lpa", scene, seed=0)
    assert isinstance(res, DeconvResult)
    rec = res.record()
    assert rec["amari_percent"] == round(100 * res.amari, 2)
    assert "estimates" not in rec
    with pytest.raises(ValueError):
        run_method("xyz", scene)
