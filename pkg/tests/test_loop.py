import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from thermoshell.errors import ConfigError, UndefinedTransitError
from thermoshell.loop import (ML_PER_MIN, PumpMap, WaterLoopState, advect, advect_temperatures,
                              mean_transit_time, pump_flow)
from thermoshell.materials import CoverGeometry, LoopGeometry

RHO_C = 998.0 * 4186.0


def test_pump_map_examples():
    pump = PumpMap()
    assert pump_flow(pump, 0.0) == 0.0
    assert pump_flow(pump, 5.0) == pytest.approx(80 / 60 * 1e-6)
    assert pump_flow(pump, 5.0) == pytest.approx(1.333e-6, rel=1e-3)
    assert pump_flow(pump, (0.5 + 5.0) / 2) == pytest.approx(pump.q_max / 2)
    assert pump_flow(pump, 9.0) == pump.q_max
    assert pump_flow(pump, -1.0) == 0.0


def test_pump_map_invariants():
    with pytest.raises(ConfigError):
        PumpMap(v_min=5.0, v_max=5.0)
    with pytest.raises(ConfigError):
        PumpMap(q_max=0.0)


@given(st.floats(-2, 8), st.floats(-2, 8))
def test_pump_flow_monotone(a, b):
    pump = PumpMap()
    lo, hi = sorted((a, b))
    assert pump_flow(pump, lo) <= pump_flow(pump, hi)
    assert 0.0 <= pump_flow(pump, hi) <= pump.q_max


@given(st.floats(0.0, 1.0))
def test_pump_flow_surjective(fraction):
    pump = PumpMap()
    q = fraction * pump.q_max
    v = pump.deadband + fraction * (pump.v_max - pump.deadband)
    assert pump_flow(pump, v) == pytest.approx(q, abs=1e-18)


def ring(temps, volumes, flow=0.0):
    return WaterLoopState(tuple(f"c{i}" for i in range(len(temps))), volumes, temps, flow)


def test_state_invariants():
    with pytest.raises(ConfigError):
        ring([20.0, 30.0], [1e-6, 0.0])
    with pytest.raises(ConfigError):
        ring([20.0, 30.0], [1e-6, 1e-6], flow=-1.0)
    with pytest.raises(ConfigError):
        WaterLoopState(("a",), [1e-6, 1e-6], [20.0, 20.0])


def test_zero_flow_unchanged():
    s = ring([10.0, 30.0, 50.0], [1e-6, 2e-6, 1e-6])
    np.testing.assert_array_equal(advect(s, 1.0).temperatures, s.temperatures)


def test_uniform_unchanged():
    s = ring([22.0] * 5, [1e-6, 2e-6, 3e-6, 1e-6, 1e-6], flow=1e-6)
    np.testing.assert_allclose(advect(s, 3.7).temperatures, 22.0, rtol=0, atol=1e-12)


def test_two_cell_swap():
    s = ring([50.0, 10.0], [1e-6, 1e-6], flow=1e-6)
    np.testing.assert_allclose(advect(s, 1.0).temperatures, [10.0, 50.0], atol=1e-12)


def test_whole_cell_moves_compose_exactly():
    temps = np.array([10.0, 20.0, 35.0, 50.0, 15.0])
    s = ring(temps, [2e-6] * 5, flow=2e-6)
    out = s
    for _ in range(3):
        out = advect(out, 1.0)
    np.testing.assert_allclose(out.temperatures, np.roll(temps, 3), atol=1e-12)
    np.testing.assert_allclose(advect(s, 3.0).temperatures, np.roll(temps, 3), atol=1e-12)


def test_advect_rejects_nonpositive_dt():
    with pytest.raises(ValueError):
        advect(ring([20.0, 30.0], [1e-6, 1e-6], 1e-6), 0.0)


temps_st = arrays(np.float64, st.integers(2, 12), elements=st.floats(-10.0, 100.0))


@st.composite
def ring_case(draw):
    t = draw(temps_st)
    v = draw(arrays(np.float64, t.size, elements=st.floats(1e-7, 1e-5)))
    displaced = draw(st.floats(0.0, 5.0)) * v.min()
    return t, v, displaced


@given(ring_case())
def test_advection_conserves_energy(case):
    t, v, d = case
    after = advect_temperatures(t, v, d)
    before_e = RHO_C * np.dot(v, t)
    scale = RHO_C * np.dot(v, np.abs(t)) + 1e-30
    assert abs(RHO_C * np.dot(v, after) - before_e) <= 1e-13 * scale


@given(ring_case())
def test_advection_preserves_envelope(case):
    t, v, d = case
    after = advect_temperatures(t, v, d)
    assert after.min() >= t.min() - 1e-12
    assert after.max() <= t.max() + 1e-12


@given(temps_st.flatmap(lambda t: st.tuples(
    st.just(t), arrays(np.float64, t.size, elements=st.floats(1e-7, 1e-5)),
    st.floats(0.0, 1.0), st.floats(0.0, 1.0))))
def test_split_step_composition_bound(case):
    # below the stability limit, splitting a move into two calls differs from
    # one call by at most a second-order mixing term 2 f1 f2 (max - min)
    t, v, a, b = case
    vmin = v.min()
    d1, d2 = a * vmin / 2, b * vmin / 2
    one = advect_temperatures(t, v, d1 + d2)
    two = advect_temperatures(advect_temperatures(t, v, d1), v, d2)
    bound = 2 * (d1 / vmin) * (d2 / vmin) * (t.max() - t.min())
    assert np.max(np.abs(one - two)) <= bound + 1e-9


def test_mean_transit_time():
    loop, cover = LoopGeometry(), CoverGeometry()
    q = 80 * ML_PER_MIN
    tube = mean_transit_time(loop, cover, q, segments=("tube",))
    assert tube == pytest.approx(math.pi * 1.25e-3 ** 2 * 1.46 / q, rel=1e-12)
    assert tube == pytest.approx(5.4, abs=0.05)
    assert mean_transit_time(loop, cover, 2 * q) == pytest.approx(mean_transit_time(loop, cover, q) / 2)
    with pytest.raises(UndefinedTransitError):
        mean_transit_time(loop, cover, 0.0)


def test_loop_energy_helper():
    s = ring([20.0, 40.0], [1e-6, 3e-6])
    assert s.energy() == pytest.approx(RHO_C * (20e-6 + 120e-6))
    assert [c[0] for c in s.cells] == ["c0", "c1"]
