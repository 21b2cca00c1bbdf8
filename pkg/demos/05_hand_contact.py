"""A palm on the cover for three minutes.

The water ring stores far more heat than the hand can draw, so the surface
barely moves even while the skin is ten degrees warmer.

Run: python3 demos/05_hand_contact.py
"""
import os

import numpy as np

from thermoshell import runner
from thermoshell.config import parse_config

path = os.path.join(os.path.dirname(__file__), os.pardir, "src", "thermoshell", "scenarios", "hand_disturbance.ini")
run = runner.run_scenario(parse_config(path))
ts = run.result.telemetry
print(f"max deviation during contact: {run.summary.extra['hand_max_deviation_C']:.3f} degC")
for t0 in (60, 120, 150, 180, 240, 299, 330, 400):
    i = int(np.searchsorted(ts["t_s"], t0))
    print(f"  t={ts['t_s'][i]:5.1f} s  hand={'on ' if ts['disturbance_active'][i] else 'off'}  "
          f"surface {ts['T_surface_C'][i]:6.3f} degC  command {ts['u_peltier_C'][i]:6.2f} degC")
