"""Staircase tracking under MPC, step by step.

For every step the table shows when the tank water plateaued and when the
surface entered the +-0.5 degC band, both in seconds after the step. A
negative lag means the surface settled before the water finished moving.

Run: python3 demos/03_step_tracking.py
"""
import os

from thermoshell import runner
from thermoshell.config import parse_config

here = os.path.join(os.path.dirname(__file__), os.pardir, "src", "thermoshell", "scenarios")
for name in ("fig6_heat.ini", "fig6_cool.ini"):
    run = runner.run_scenario(parse_config(os.path.join(here, name)))
    print(f"\n{name}: rms error {run.summary.rms_error_C:.2f} degC, violations {run.summary.violations}")
    print("   step at   setpoint   water plateau   surface settled   lag after plateau")
    for s in run.summary.extra["steps"]:
        print(f"   {s['start_s']:7.1f}   {s['setpoint_C']:8.1f}   {s['plateau_s']:13.1f}   {s['settle_s']:15.1f}   {s['after_plateau_s']:+17.1f}")
