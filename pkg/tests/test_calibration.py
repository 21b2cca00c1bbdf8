from dataclasses import replace

import pytest

from thermoshell.calibration import (BOUNDS, SHIPPED_PARAMETERS, CalibrationTargets, FreeParameters, calibrate,
                                     measure_all, measure_range, measure_total_tau, read_parameters_file,
                                     verify_total_lag, write_parameters)
from thermoshell.errors import CalibrationError, ConfigError, InvariantViolation
from thermoshell.simulator import PlantConfig


def test_target_identity():
    t = CalibrationTargets()
    assert t.tau_water + t.tau_cover == pytest.approx(t.tau_total, abs=1e-12)
    with pytest.raises(ConfigError):
        CalibrationTargets(tau_total=40.0)
    with pytest.raises(ConfigError):
        CalibrationTargets(range_min=70.0)


def test_free_parameter_bounds():
    with pytest.raises(ConfigError):
        FreeParameters(water_wall=0.5)
    with pytest.raises(ConfigError):
        FreeParameters(surface_ambient=2e4)
    assert set(FreeParameters().values()) == set(BOUNDS)


def test_apply_keeps_channel_length_consistent():
    cfg = FreeParameters(active_area=0.03).apply(PlantConfig())
    assert cfg.cover.channel_total_length * cfg.cover.channel_pitch == pytest.approx(0.03)


def test_own_responses_are_a_fixed_point():
    base = PlantConfig()
    m = measure_all(base, method="exact")
    targets = CalibrationTargets(tau_water=m["tau_water"], tau_cover=m["tau_cover"],
                                 tau_total=m["tau_water"] + m["tau_cover"],
                                 range_min=m["range_min"], range_max=m["range_max"])
    initial = FreeParameters.from_config(base)
    params, report = calibrate(targets, initial, base)
    assert params == initial
    assert report.objective == 0.0
    assert all(v == 0.0 for v in report.residuals.values())


def test_calibration_is_deterministic():
    runs = [calibrate(max_evals=30, tau_tol=10.0, range_tol=100.0) for _ in range(2)]
    assert runs[0][0] == runs[1][0]
    assert runs[0][1].history == runs[1][1].history


def test_unreachable_targets_raise_with_residuals():
    with pytest.raises(CalibrationError) as info:
        calibrate(CalibrationTargets(range_max=100.0), max_evals=20)
    assert set(info.value.residuals) == {"tau_water", "tau_cover", "range_min", "range_max"}


def test_shipped_parameters_meet_targets(calibrated):
    targets = CalibrationTargets()
    m = measure_all(calibrated, method="exact")
    assert m["tau_water"] == pytest.approx(targets.tau_water, rel=0.005)
    assert m["tau_cover"] == pytest.approx(targets.tau_cover, rel=0.005)
    lo, hi = measure_range(calibrated)
    assert lo == pytest.approx(15.8, abs=1.5)
    assert hi == pytest.approx(66.6, abs=1.5)


@pytest.mark.slow
def test_calibration_from_prior_reaches_targets():
    params, report = calibrate(initial=FreeParameters())
    assert report.passed(CalibrationTargets())
    for k, (lo, hi) in BOUNDS.items():
        assert lo <= getattr(params, k) <= hi


def test_parameters_file_round_trip(tmp_path):
    params = read_parameters_file(SHIPPED_PARAMETERS)
    path = tmp_path / "p.params"
    write_parameters(path, params)
    assert read_parameters_file(path) == params
    with pytest.raises(ConfigError):
        read_parameters_file(tmp_path / "missing.params")
    bad = tmp_path / "bad.params"
    bad.write_text("[calibration]\ntank_volume = 1e-5\n")
    with pytest.raises(ConfigError):
        read_parameters_file(bad)


def test_total_lag_and_ideal_water(calibrated):
    # holding every water cell at the face temperature leaves only the cover lag
    assert measure_total_tau(calibrated, ideal_water=True) == pytest.approx(5.578, rel=0.01)
    coupled = measure_total_tau(calibrated)
    assert coupled > 45.0
    bigger = replace(calibrated, loop=replace(calibrated.loop, tank_volume=2 * calibrated.loop.tank_volume))
    assert measure_total_tau(bigger) > coupled


def test_verify_total_lag(calibrated):
    reach = verify_total_lag(calibrated)
    assert 45.0 < reach < 120.0
    bigger = replace(calibrated, loop=replace(calibrated.loop, tank_volume=2 * calibrated.loop.tank_volume))
    assert verify_total_lag(bigger) > reach
    with pytest.raises(InvariantViolation):
        verify_total_lag(calibrated, minimum=500.0)
