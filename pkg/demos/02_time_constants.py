"""Measure the calibrated plant the way the bench rig was measured.

The water loop answers a face step in about half a minute; the cover then
lags the water by a few seconds. The faces pinned at their extremes bound the
temperatures the surface can ever show.

Run: python3 demos/02_time_constants.py
"""
from thermoshell.calibration import (CalibrationTargets, calibrated_config, measure_cover_tau, measure_range,
                                     measure_total_tau, measure_water_tau)

cfg = calibrated_config()
targets = CalibrationTargets()
tau_w = measure_water_tau(cfg)
tau_c = measure_cover_tau(cfg)
print(f"water step response   {tau_w:7.3f} s   (target {targets.tau_water})")
print(f"cover step response   {tau_c:7.3f} s   (target {targets.tau_cover})")
print(f"cover with ideal water {measure_total_tau(cfg, ideal_water=True):6.3f} s")
print(f"surface after a face step, coupled loop {measure_total_tau(cfg):6.1f} s")
lo, hi = measure_range(cfg, targets.face_hot, targets.face_cold)
print(f"surface range with faces at {targets.face_cold}/{targets.face_hot} degC: {lo:.2f} .. {hi:.2f} degC "
      f"(target {targets.range_min} .. {targets.range_max})")
