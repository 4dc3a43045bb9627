import threading

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fresqo.csi import AutocorrCache, csi_map, csi_value
from fresqo.errors import UndefinedCSIError
from fresqo.models import SystemParams, Variant, make_model
from fresqo.sensors import SensorEngine


def test_csi_value_boundary():
    assert csi_value(2.0, 2.0, 2.0) == 1.0
    assert csi_value(3.0, 1.0, 2.0) == 4.5


@pytest.mark.parametrize("g11,g22", [(0.0, 1.0), (1.0, 0.0), (-1.0, 2.0), (np.inf, 1.0)])
def test_csi_value_undefined(g11, g22):
    with pytest.raises(UndefinedCSIError):
        csi_value(1.0, g11, g22)


@given(st.floats(0, 1e3), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_csi_value_nonnegative(g12, g11, g22):
    assert csi_value(g12, g11, g22) >= 0


def test_coherent_map_all_ones(coherent_model):
    w = np.array([-0.5, 0.0, 0.5])
    grid = csi_map(coherent_model, w, w, 0.3)
    assert np.allclose(grid.values, 1.0, atol=1e-3)


def test_thermal_light_classical():
    m = make_model(Variant.OM_FULL, SystemParams(0.0, 2.0, 0.0, 0.0, n_th=0.3), 2, 12)
    w = np.linspace(-2.5, -1.5, 5)
    grid = csi_map(m, w, w, 0.2, target="b")
    assert grid.values.max() <= 1 + 1e-3
    assert np.all(grid.values >= 0)


def test_autocorr_calls_once_per_frequency(om_small, om_engine):
    w1 = np.array([-2.0, -1.0, 0.0, 1.0])
    w2 = np.array([0.0, 1.0, 2.0])
    eng = SensorEngine(om_small, 0.5, L=om_engine.L, rho=om_engine.rho)
    cache = AutocorrCache(eng)
    grid = csi_map(om_small, w1, w2, 0.5, threads=2, engine=eng, cache=cache)
    assert cache.calls == 5
    assert grid.metadata["autocorr_calls"] == 5
    csi_map(om_small, w2, w2, 0.5, engine=eng, cache=cache)
    assert cache.calls == 5


def test_map_matches_pointwise(om_small, om_engine):
    w = np.array([-2.0, 0.5, 2.0])
    grid = csi_map(om_small, w, w, 0.5, engine=om_engine)
    assert np.allclose(grid.values, grid.values.T, rtol=1e-8)
    g = om_engine.g2(-2.0, 2.0)
    expect = csi_value(g, om_engine.autocorr(-2.0), om_engine.autocorr(2.0))
    assert grid.values[0, 2] == pytest.approx(expect, rel=1e-9)


def test_cache_concurrent_single_evaluation(om_small, om_engine):
    eng = SensorEngine(om_small, 0.5, L=om_engine.L, rho=om_engine.rho)
    cache = AutocorrCache(eng)
    threads = [threading.Thread(target=cache.get, args=(0.7,)) for _ in range(6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert cache.calls == 1


def test_cross_method_agrees(om_small, om_engine):
    auto = AutocorrCache(om_engine, method="auto")
    cross = AutocorrCache(om_engine, method="cross")
    assert cross.get(-1.0) == pytest.approx(auto.get(-1.0), rel=1e-9)
    with pytest.raises(ValueError):
        AutocorrCache(om_engine, method="other")


def test_empty_grid_rejected(coherent_model):
    with pytest.raises(ValueError):
        csi_map(coherent_model, [], [0.0], 0.3)
